"""
Сетка портов fluid-антенны и угловая сетка (φ, θ).

Нумерация портов: l = n·M + m (m - строка, меняется быстрее).
Нумерация направлений: z = q·P + p (столбцовая укладка, как vectorize).
"""

import logging
import math
from dataclasses import dataclass
from typing import Iterable, Tuple

import numpy as np
from scipy.spatial.distance import pdist

from .errors import ParameterError

logger = logging.getLogger(__name__)


def _frozen(array: np.ndarray) -> np.ndarray:
    array.setflags(write=False)
    return array


@dataclass(frozen=True)
class PortGrid:
    """M×N решетка выбираемых позиций антенны с шагом d, центрированная в нуле"""

    rows: int
    cols: int
    spacing: float
    wavelength: float
    positions: np.ndarray  # (L, 2): x, y в метрах

    @property
    def size(self) -> int:
        return self.rows * self.cols

    @property
    def aperture(self) -> Tuple[float, float]:
        """Размеры апертуры по x и y в метрах"""
        return ((self.rows - 1) * self.spacing, (self.cols - 1) * self.spacing)

    def index_to_rc(self, index) -> Tuple[np.ndarray, np.ndarray]:
        index = self.check_indices(index)
        return index % self.rows, index // self.rows

    def rc_to_index(self, m, n) -> np.ndarray:
        m = np.asarray(m, dtype=np.int64)
        n = np.asarray(n, dtype=np.int64)
        if np.any((m < 0) | (m >= self.rows) | (n < 0) | (n >= self.cols)):
            raise ParameterError("Координаты (m, n) вне сетки портов")
        return n * self.rows + m

    def check_indices(self, indices) -> np.ndarray:
        """Проверить индексы портов, вернуть int64 массив"""
        array = np.asarray(indices, dtype=np.int64)
        if array.size and (array.min() < 0 or array.max() >= self.size):
            raise ParameterError(f"Индекс порта вне диапазона [0, {self.size})")
        return array


def build_port_grid(rows: int, cols: int, spacing: float, wavelength: float) -> PortGrid:
    """Построить центрированную сетку портов"""
    if rows < 1 or cols < 1:
        raise ParameterError(f"Размеры сетки портов должны быть >= 1: M={rows}, N={cols}")
    if not spacing > 0 or not wavelength > 0:
        raise ParameterError(f"Шаг и длина волны должны быть положительными: d={spacing}, λ={wavelength}")

    x = (np.arange(rows) - (rows - 1) / 2) * spacing
    y = (np.arange(cols) - (cols - 1) / 2) * spacing
    # l = n·M + m
    positions = np.column_stack([np.tile(x, cols), np.repeat(y, rows)])

    return PortGrid(int(rows), int(cols), float(spacing), float(wavelength), _frozen(positions))


def port_grid_from_count(count: int, spacing: float, wavelength: float) -> PortGrid:
    """Квадратная сетка M = N = sqrt(L), когда задано только L"""
    side = math.isqrt(count) if count > 0 else 0
    if side * side != count or side < 1:
        raise ParameterError(f"Число портов {count} не является полным квадратом")
    return build_port_grid(side, side, spacing, wavelength)


@dataclass(frozen=True)
class AngularGrid:
    """Равномерная сетка P×Q по азимуту и углу места, включая концы [-π/2, π/2]"""

    phi: np.ndarray
    theta: np.ndarray

    @property
    def P(self) -> int:
        return self.phi.size

    @property
    def Q(self) -> int:
        return self.theta.size

    @property
    def Z(self) -> int:
        return self.P * self.Q

    @property
    def shape(self) -> Tuple[int, int]:
        return (self.P, self.Q)

    def flat_angles(self) -> Tuple[np.ndarray, np.ndarray]:
        """φ_z и θ_z для всех z = q·P + p"""
        return np.tile(self.phi, self.Q), np.repeat(self.theta, self.P)

    def same_as(self, other: "AngularGrid") -> bool:
        return (
            self is other
            or (np.array_equal(self.phi, other.phi) and np.array_equal(self.theta, other.theta))
        )


def build_angular_grid(P: int, Q: int) -> AngularGrid:
    if P < 2 or Q < 2:
        raise ParameterError(f"Угловая сетка требует P, Q >= 2: P={P}, Q={Q}")
    half = np.pi / 2
    return AngularGrid(_frozen(np.linspace(-half, half, P)), _frozen(np.linspace(-half, half, Q)))


def pairwise_min_distance(grid: PortGrid, indices: Iterable[int]) -> float:
    """Минимальное попарное расстояние между портами; +inf для одного порта"""
    idx = grid.check_indices(list(indices))
    if idx.size == 0:
        raise ParameterError("Пустой набор портов")
    if idx.size == 1:
        return math.inf

    # расстояние считается по целочисленным смещениям решетки: d·hypot(Δm, Δn)
    m, n = idx % grid.rows, idx // grid.rows
    cells = np.column_stack([m, n]).astype(float)
    return float(pdist(cells).min() * grid.spacing)
