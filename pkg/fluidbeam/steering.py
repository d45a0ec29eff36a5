"""
Словарь направляющих векторов D (Z×L) и синтез луча y = D_A·w_A.

Показатель экспоненты разделяется по x_m и y_n, поэтому кроме плотного
хранения поддерживается точное факторизованное: D(z, l(m,n)) = U(z,m)·V(z,n).
"""

import logging
from enum import Enum
from typing import TYPE_CHECKING, Optional, Sequence, Tuple

import numpy as np

from .beam_spec import BeamPattern, matricize
from .errors import CapacityError, ParameterError
from .geometry import AngularGrid, PortGrid

if TYPE_CHECKING:
    from .port_select import Selection

logger = logging.getLogger(__name__)

_COMPLEX_BYTES = np.dtype(np.complex128).itemsize


class VMode(str, Enum):
    """Подстановка для пространственной частоты v"""

    COUPLED = "coupled"  # v = sinθ·sinφ/λ
    DECOUPLED = "decoupled"  # v = sinφ/λ


def direction_cosines(phi, theta, vmode: VMode) -> Tuple[np.ndarray, np.ndarray]:
    """(u·λ, v·λ) для заданных углов"""
    phi = np.asarray(phi, dtype=float)
    theta = np.asarray(theta, dtype=float)
    u = np.sin(theta) * np.cos(phi)
    if VMode(vmode) is VMode.COUPLED:
        v = np.sin(theta) * np.sin(phi)
    else:
        v = np.sin(phi) * np.ones_like(theta)
    return u, v


def steering_entry(port: Sequence[float], angle: Sequence[float], wavelength: float, vmode: VMode) -> complex:
    """exp{-j(2π/λ)(x·u + y·v)} для одного порта и одного направления"""
    x, y = float(port[0]), float(port[1])
    u, v = direction_cosines(angle[0], angle[1], vmode)
    return complex(np.exp(-2j * np.pi / wavelength * (x * u + y * v)))


class SteeringDictionary:
    """Неизменяемый словарь D с плотным или факторизованным хранением"""

    def __init__(
        self,
        ports: PortGrid,
        angles: AngularGrid,
        vmode: VMode,
        dense: Optional[np.ndarray] = None,
        factors: Optional[Tuple[np.ndarray, np.ndarray]] = None,
    ):
        if (dense is None) == (factors is None):
            raise ParameterError("Нужно ровно одно из: dense или factors")
        self.ports = ports
        self.angles = angles
        self.vmode = VMode(vmode)
        self._dense = dense
        self._factors = factors
        for array in (dense,) if dense is not None else factors:
            array.setflags(write=False)

    @property
    def Z(self) -> int:
        return self.angles.Z

    @property
    def L(self) -> int:
        return self.ports.size

    @property
    def storage(self) -> str:
        return "dense" if self._dense is not None else "factored"

    @property
    def column_norm(self) -> float:
        """‖D_j‖ = sqrt(Z) для всех столбцов: все элементы единичного модуля"""
        return float(np.sqrt(self.Z))

    @property
    def stored_entries(self) -> int:
        if self._dense is not None:
            return self._dense.size
        U, V = self._factors
        return U.size + V.size

    @property
    def nbytes(self) -> int:
        return self.stored_entries * _COMPLEX_BYTES

    def column_norms(self) -> np.ndarray:
        """Нормы всех столбцов, посчитанные из хранимых данных"""
        if self._dense is not None:
            return np.linalg.norm(self._dense, axis=0)
        U, V = self._factors
        sq = (np.abs(U) ** 2).T @ (np.abs(V) ** 2)
        return np.sqrt(sq).ravel(order="F")

    def max_modulus_deviation(self) -> float:
        """max | |D(z,l)| - 1 | по хранимым элементам"""
        arrays = (self._dense,) if self._dense is not None else self._factors
        return float(max(np.max(np.abs(np.abs(a) - 1.0)) for a in arrays))

    def dense(self) -> np.ndarray:
        """Плотная матрица Z×L (материализуется для факторизованного хранения)"""
        if self._dense is not None:
            return self._dense
        return self.columns(np.arange(self.L))

    def columns(self, indices) -> np.ndarray:
        idx = self.ports.check_indices(indices)
        if self._dense is not None:
            return self._dense[:, idx]
        U, V = self._factors
        m, n = idx % self.ports.rows, idx // self.ports.rows
        return U[:, m] * V[:, n]

    def column(self, index: int) -> np.ndarray:
        return self.columns([index])[:, 0]

    def correlate(self, e: np.ndarray) -> np.ndarray:
        """Скалярные произведения ⟨D_j, e⟩ = D_j^H e для всех j (длина L)"""
        e = np.asarray(e, dtype=np.complex128)
        if e.shape != (self.Z,):
            raise ParameterError(f"Длина невязки {e.shape} не равна Z={self.Z}")
        if self._dense is not None:
            return self._dense.conj().T @ e
        # двухэтапная свертка: сначала с U, затем с V
        U, V = self._factors
        C = (U.conj() * e[:, None]).T @ V.conj()
        return C.ravel(order="F")

    def synthesize(self, weights: np.ndarray) -> np.ndarray:
        """y = D·w для полного вектора весов длины L"""
        w = np.asarray(weights, dtype=np.complex128)
        if w.shape != (self.L,):
            raise ParameterError(f"Длина весов {w.shape} не равна L={self.L}")
        if self._dense is not None:
            return self._dense @ w
        U, V = self._factors
        W = w.reshape((self.ports.rows, self.ports.cols), order="F")
        return np.sum((U @ W) * V, axis=1)


def estimate_dictionary_bytes(ports: PortGrid, angles: AngularGrid, storage: str) -> int:
    if storage == "dense":
        return angles.Z * ports.size * _COMPLEX_BYTES
    if storage == "factored":
        return angles.Z * (ports.rows + ports.cols) * _COMPLEX_BYTES
    raise ParameterError(f"Неизвестный тип хранения: {storage}")


def build_dictionary(
    ports: PortGrid,
    angles: AngularGrid,
    vmode: VMode = VMode.DECOUPLED,
    storage: str = "factored",
    memory_cap_bytes: Optional[int] = None,
) -> SteeringDictionary:
    """Построить D(z,l) = steering_entry(position(l), angle(z))"""
    estimate = estimate_dictionary_bytes(ports, angles, storage)
    if memory_cap_bytes is not None and estimate > memory_cap_bytes:
        raise CapacityError(
            f"Словарь {storage} займет {estimate / 2**20:.1f} MB при лимите "
            f"{memory_cap_bytes / 2**20:.1f} MB; используйте storage=factored"
        )

    phi_z, theta_z = angles.flat_angles()
    u, v = direction_cosines(phi_z, theta_z, vmode)
    k = 2 * np.pi / ports.wavelength

    if storage == "dense":
        x, y = ports.positions[:, 0], ports.positions[:, 1]
        dense = np.exp(-1j * k * (np.outer(u, x) + np.outer(v, y)))
        dictionary = SteeringDictionary(ports, angles, vmode, dense=dense)
    else:
        x = ports.positions[: ports.rows, 0]
        y = ports.positions[:: ports.rows, 1]
        U = np.exp(-1j * k * np.outer(u, x))
        V = np.exp(-1j * k * np.outer(v, y))
        dictionary = SteeringDictionary(ports, angles, vmode, factors=(U, V))

    logger.info(
        f"Словарь {storage}: Z={angles.Z}, L={ports.size}, vmode={VMode(vmode).value}, "
        f"{dictionary.nbytes / 2**20:.1f} MB"
    )
    return dictionary


def synthesize_beam(dictionary: SteeringDictionary, selection: "Selection") -> BeamPattern:
    """y = D_A·w_A по активным портам выбора"""
    support = dictionary.ports.check_indices(list(selection.support))
    weights = np.asarray(selection.weights, dtype=np.complex128)
    if weights.shape != support.shape:
        raise ParameterError("Число весов не совпадает с числом портов выбора")
    if not np.all(np.isfinite(weights)):
        raise ParameterError("Веса содержат бесконечные или NaN значения")
    if support.size == 0:
        return BeamPattern.zeros(dictionary.angles)

    if dictionary.storage == "dense":
        y = dictionary.columns(support) @ weights
    else:
        full = np.zeros(dictionary.L, dtype=np.complex128)
        np.add.at(full, support, weights)
        y = dictionary.synthesize(full)
    return matricize(y, dictionary.angles)
