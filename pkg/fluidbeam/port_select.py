"""
Жадный выбор портов (модифицированный OMP) с ограничением минимального
расстояния d_min между активными портами.
"""

import logging
from dataclasses import dataclass, field
from typing import List, Optional, Tuple, Union

import numpy as np
from dataclasses_json import dataclass_json
from tqdm import tqdm

from .beam_spec import BeamPattern, matricize, vectorize
from .errors import DegenerateBeamError, InfeasibleSpacingError, ParameterError
from .fourier import weights_from_beam
from .geometry import PortGrid
from .steering import SteeringDictionary

logger = logging.getLogger(__name__)


@dataclass_json
@dataclass(frozen=True)
class SelectionStep:
    """Запись одного шага выбора"""

    index: int
    score: float
    residual_norm: float
    # кандидаты, отклоненные проверкой достижимости S на этом шаге
    deferred: Tuple[int, ...] = ()


@dataclass
class Selection:
    """Упорядоченный набор активных портов A и их веса w_A"""

    support: List[int] = field(default_factory=list)
    weights: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.complex128))
    trace: List[SelectionStep] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.support)


def _neighbor_offsets(grid: PortGrid, d_min: float) -> np.ndarray:
    """Смещения (Δm, Δn) решетки с 0 < d·hypot(Δm, Δn) < d_min"""
    if d_min <= 0:
        return np.zeros((0, 2), dtype=np.int64)
    reach = int(np.ceil(d_min / grid.spacing))
    dm, dn = np.meshgrid(np.arange(-reach, reach + 1), np.arange(-reach, reach + 1), indexing="ij")
    dist = grid.spacing * np.hypot(dm, dn)
    keep = (dist > 0) & (dist < d_min)
    return np.column_stack([dm[keep], dn[keep]]).astype(np.int64)


def _neighbors(grid: PortGrid, index: int, offsets: np.ndarray) -> np.ndarray:
    m, n = index % grid.rows, index // grid.rows
    mm, nn = m + offsets[:, 0], n + offsets[:, 1]
    inside = (mm >= 0) & (mm < grid.rows) & (nn >= 0) & (nn < grid.cols)
    return np.sort(nn[inside] * grid.rows + mm[inside])


def excluded_neighbors(grid: PortGrid, index: int, d_min: float) -> np.ndarray:
    """Порты j с 0 < dist(index, j) < d_min; на расстоянии ровно d_min порты доступны"""
    grid.check_indices(index)
    if d_min < 0:
        raise ParameterError(f"d_min не может быть отрицательным: {d_min}")
    return _neighbors(grid, int(index), _neighbor_offsets(grid, d_min))


def _first_fit_reaches(available: np.ndarray, need: int, table: List[np.ndarray]) -> bool:
    """Можно ли добрать need портов первым подходящим по возрастанию индекса"""
    if need <= 0:
        return True
    free = available.copy()
    for _ in range(need):
        idx = int(np.argmax(free))
        if not free[idx]:
            return False
        free[idx] = False
        free[table[idx]] = False
    return True


def select_ports(
    dictionary: SteeringDictionary,
    g: Union[np.ndarray, BeamPattern],
    sparsity: int,
    alpha: float,
    d_min: float,
    grid: Optional[PortGrid] = None,
    normalize_columns: bool = True,
    residual_mode: str = "normalized",
    feasibility_guard: bool = True,
    progress: bool = False,
) -> Selection:
    """
    Модифицированный OMP.

    На шаге k выбирается λ_k = argmax |⟨D_j, e_{k-1}⟩| среди разрешенных j
    (при равенстве - наименьший индекс), веса новой позиции считаются по
    замкнутой формуле Фурье, e_k = g - α·y/‖y‖₂. В режиме least-squares
    веса всего набора - МНК, e_k = g - D_A·w_A.
    """
    grid = grid or dictionary.ports
    if grid.size != dictionary.L:
        raise ParameterError("Сетка портов не совпадает со словарем")
    if sparsity < 1:
        raise ParameterError(f"S должно быть >= 1: {sparsity}")
    if d_min < 0:
        raise ParameterError(f"d_min не может быть отрицательным: {d_min}")
    if residual_mode not in ("normalized", "least-squares"):
        raise ParameterError(f"Неизвестный режим невязки: {residual_mode}")

    beam = g if isinstance(g, BeamPattern) else matricize(np.asarray(g, dtype=np.complex128), dictionary.angles)
    if not beam.grid.same_as(dictionary.angles):
        raise ParameterError("Желаемый луч задан на другой угловой сетке")
    g_vec = vectorize(beam)

    offsets = _neighbor_offsets(grid, d_min)
    table = [_neighbors(grid, i, offsets) for i in range(grid.size)]
    forbidden = np.zeros(grid.size, dtype=bool)
    scale = 1.0 / dictionary.column_norm if normalize_columns else 1.0

    guard = feasibility_guard and offsets.size > 0
    if guard and not _first_fit_reaches(~forbidden, sparsity, table):
        logger.warning(f"Проверка достижимости отключена: даже первый подходящий не набирает S={sparsity}")
        guard = False

    support: List[int] = []
    weights: List[complex] = []
    trace: List[SelectionStep] = []
    e = g_vec.copy()
    y = np.zeros_like(g_vec)

    for k in tqdm(range(sparsity), desc="port selection", disable=not progress, leave=False):
        scores = np.abs(dictionary.correlate(e)) * scale
        scores[forbidden] = -np.inf

        best = int(np.argmax(scores))
        deferred: List[int] = []
        while True:
            if scores[best] == -np.inf:
                raise InfeasibleSpacingError(achieved=k, requested=sparsity)
            if not guard:
                break
            free = ~forbidden
            free[best] = False
            free[table[best]] = False
            if _first_fit_reaches(free, sparsity - k - 1, table):
                break
            deferred.append(best)
            scores[best] = -np.inf
            best = int(np.argmax(scores))

        score = float(scores[best])
        support.append(best)
        forbidden[best] = True
        forbidden[table[best]] = True

        if residual_mode == "normalized":
            w = weights_from_beam(beam, grid.positions[best], grid.wavelength, dictionary.vmode).values[0]
            weights.append(w)
            y = y + dictionary.column(best) * w
            y_norm = np.linalg.norm(y)
            if y_norm == 0:
                raise DegenerateBeamError(f"Нулевой луч на шаге {k + 1} при непустом наборе портов")
            e = g_vec - alpha * y / y_norm
        else:
            D_A = dictionary.columns(support)
            w_ls, *_ = np.linalg.lstsq(D_A, g_vec, rcond=None)
            weights = list(w_ls)
            y = D_A @ w_ls
            e = g_vec - y

        step = SelectionStep(best, score, float(np.linalg.norm(e)), tuple(deferred))
        trace.append(step)
        logger.debug(
            f"Шаг {k + 1}: порт {best}, |<D,e>|={score:.6e}, отложено {len(deferred)}",
            extra={"selection_step": step.to_dict()},
        )
        if deferred:
            logger.info(
                f"Шаг {k + 1}: отложено {len(deferred)} портов {deferred}, "
                f"иначе S={sparsity} недостижимо; выбран порт {best}"
            )

    total_deferred = sum(len(step.deferred) for step in trace)
    logger.info(
        f"Выбрано {len(support)} портов из {grid.size}, d_min={d_min:g}, отложено победителей {total_deferred}"
    )
    return Selection(support, np.asarray(weights, dtype=np.complex128), trace)


def full_selection(dictionary: SteeringDictionary, beam: BeamPattern) -> Selection:
    """Все порты активны, веса по замкнутой формуле (фиксированная решетка)"""
    ports = dictionary.ports
    w = weights_from_beam(beam, ports.positions, ports.wavelength, dictionary.vmode)
    return Selection(list(range(ports.size)), w.values, [])

