"""
Метрики и экспорт результатов: ошибка реконструкции, нормированные
карты, статистика главного и боковых лепестков, сечения.
"""

import io
import logging
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np
from dataclasses_json import dataclass_json
from scipy.ndimage import binary_dilation

from .beam_spec import BeamPattern, TargetRegion, region_mask
from .errors import DegenerateBeamError, ParameterError

logger = logging.getLogger(__name__)

METRIC_FIELDS = (
    "reconstruction_error",
    "aligned_error",
    "mainlobe_mean_gain",
    "peak_sidelobe",
    "peak_gain_db",
)


@dataclass_json
@dataclass(frozen=True)
class BeamMetrics:
    """
    reconstruction_error - Σ|g - c·y|² при c = ‖g‖/‖y‖ (y приведен к энергии g),
    aligned_error - ошибка только по амплитудам с МНК-масштабом,
    mainlobe_mean_gain - средняя |y| в области при ‖y‖² = числу точек области.
    """

    reconstruction_error: float
    aligned_error: float
    mainlobe_mean_gain: float
    peak_sidelobe: float
    peak_gain_db: float

    def as_row(self) -> Tuple[float, ...]:
        return tuple(getattr(self, name) for name in METRIC_FIELDS)


@dataclass
class ComparisonTable:
    """Метрики по схемам (метки могут повторяться) и попарные разности b - a"""

    rows: List[Tuple[str, BeamMetrics]] = field(default_factory=list)
    deltas: List[Tuple[str, str, BeamMetrics]] = field(default_factory=list)

    def metrics_for(self, label: str) -> BeamMetrics:
        for name, metrics in self.rows:
            if name == label:
                return metrics
        raise KeyError(label)


def _check_same_grid(a: BeamPattern, b: BeamPattern):
    if not a.grid.same_as(b.grid):
        raise ParameterError("Диаграммы заданы на разных угловых сетках")


def reconstruction_error(g: BeamPattern, y: BeamPattern) -> float:
    """Σ_z |g_z - y_z|²"""
    _check_same_grid(g, y)
    return float(np.sum(np.abs(g.values - y.values) ** 2))


def normalize_beam(y: BeamPattern) -> np.ndarray:
    """|y| / max|y|"""
    magnitude = y.magnitude
    peak = magnitude.max()
    if peak == 0:
        raise DegenerateBeamError("Нельзя нормировать нулевую диаграмму")
    return magnitude / peak


def aligned_magnitude_error(g: BeamPattern, y: BeamPattern) -> float:
    """Ошибка |g| против c·|y| с МНК-коэффициентом c >= 0 (c = 0 для нулевого y)"""
    _check_same_grid(g, y)
    target, actual = g.magnitude, y.magnitude
    energy = float(np.sum(actual ** 2))
    gain = float(np.sum(target * actual)) / energy if energy > 0 else 0.0
    return reconstruction_error(BeamPattern(g.grid, target), BeamPattern(g.grid, gain * actual))


def match_energy(y: BeamPattern, reference: BeamPattern) -> BeamPattern:
    """
    y·‖reference‖/‖y‖. Масштаб y = D·w произволен (в D·D^H нет множителя
    1/(P·Q)), поэтому перед сравнением лучи приводятся к энергии цели.
    Нулевой луч остается нулевым.
    """
    _check_same_grid(reference, y)
    energy = float(np.linalg.norm(y.values))
    if energy == 0:
        return y
    return BeamPattern(y.grid, y.values * (float(np.linalg.norm(reference.values)) / energy))


def mainlobe_gain(y: BeamPattern, mainlobe: np.ndarray) -> float:
    """
    mean_R |y| · sqrt(|R|) / ‖y‖: доля энергии, собранная равномерно в области.

    1 только для луча, плоского в области и нулевого вне ее; не больше 1
    по неравенству Коши-Буняковского.
    """
    energy = float(np.linalg.norm(y.values))
    if energy == 0:
        return 0.0
    inside = y.magnitude[mainlobe]
    return float(inside.mean() * np.sqrt(inside.size) / energy)


def sidelobe_mask(grid_shape: Tuple[int, int], mainlobe: np.ndarray, guard_cells: int) -> np.ndarray:
    """Точки вне главной области, расширенной на guard_cells ячеек"""
    if guard_cells < 0:
        raise ParameterError(f"Ширина защитной полосы не может быть отрицательной: {guard_cells}")
    if guard_cells == 0:
        return ~mainlobe
    structure = np.ones((2 * guard_cells + 1, 2 * guard_cells + 1), dtype=bool)
    return ~binary_dilation(mainlobe, structure=structure)


def beam_metrics(
    target: BeamPattern,
    y: BeamPattern,
    region: TargetRegion,
    guard_cells: int = 3,
    db_floor: float = -80.0,
) -> BeamMetrics:
    """target - луч, который схема синтезировала (после уточнения фазы, если оно было)"""
    _check_same_grid(target, y)
    mainlobe = region_mask(y.grid, region)
    if not mainlobe.any():
        raise ParameterError("Целевая область не содержит точек сетки")

    peak = float(y.magnitude.max())
    if peak > 0:
        normalized = normalize_beam(y)
    else:
        normalized = np.zeros(y.grid.shape)
    outside = sidelobe_mask(y.grid.shape, mainlobe, guard_cells)
    peak_db = 20 * np.log10(peak) if peak > 0 else db_floor

    return BeamMetrics(
        reconstruction_error=reconstruction_error(target, match_energy(y, target)),
        aligned_error=aligned_magnitude_error(target, y),
        mainlobe_mean_gain=mainlobe_gain(y, mainlobe),
        peak_sidelobe=float(normalized[outside].max()) if outside.any() else 0.0,
        peak_gain_db=float(max(peak_db, db_floor)),
    )


def cross_section(y: BeamPattern, axis: str, angle: float) -> np.ndarray:
    """
    Сечение нормированной диаграммы по ближайшей линии сетки.

    fixed-theta: профиль по φ при θ ≈ angle; fixed-phi: профиль по θ при φ ≈ angle.
    Возвращает массив (K, 2): угол в радианах, нормированная амплитуда.
    """
    grid = y.grid
    if axis == "fixed-theta":
        fixed, free = grid.theta, grid.phi
    elif axis == "fixed-phi":
        fixed, free = grid.phi, grid.theta
    else:
        raise ParameterError(f"Неизвестная ось сечения: {axis}")
    if not fixed[0] <= angle <= fixed[-1]:
        raise ParameterError(f"Угол {angle} вне диапазона сетки")

    # argmin возвращает первый минимум: при равенстве - меньший индекс
    line = int(np.argmin(np.abs(fixed - angle)))
    normalized = normalize_beam(y)
    profile = normalized[:, line] if axis == "fixed-theta" else normalized[line, :]
    return np.column_stack([free, profile])


def compare_configs(
    results: Sequence[Tuple[str, BeamPattern]],
    region: TargetRegion,
    desired: BeamPattern,
    guard_cells: int = 3,
    db_floor: float = -80.0,
    targets: Optional[Sequence[BeamPattern]] = None,
) -> ComparisonTable:
    """
    Метрики для каждой схемы и попарные разности.

    targets - собственная цель каждой схемы (уточненная фаза); без них все
    лучи сравниваются с desired.
    """
    if targets is None:
        targets = [desired] * len(results)
    if len(targets) != len(results):
        raise ParameterError("Число целей не совпадает с числом схем")
    for (_, beam), target in zip(results, targets):
        _check_same_grid(desired, beam)
        _check_same_grid(desired, target)

    table = ComparisonTable()
    for (label, beam), target in zip(results, targets):
        table.rows.append((label, beam_metrics(target, beam, region, guard_cells, db_floor)))

    for i, (label_a, a) in enumerate(table.rows):
        for label_b, b in table.rows[i + 1:]:
            diff = BeamMetrics(*(vb - va for va, vb in zip(a.as_row(), b.as_row())))
            table.deltas.append((label_a, label_b, diff))
    return table


# Экспорт: детерминированные текстовые форматы

_FLOAT = "%.12e"


def _matrix_csv(matrix: np.ndarray) -> str:
    buffer = io.StringIO()
    np.savetxt(buffer, matrix, delimiter=",", fmt=_FLOAT)
    return buffer.getvalue()


def heatmap_csv(y: BeamPattern) -> str:
    """P строк × Q столбцов нормированной амплитуды"""
    return _matrix_csv(normalize_beam(y))


def heatmap_db_csv(y: BeamPattern, db_floor: float = -80.0) -> str:
    normalized = normalize_beam(y)
    with np.errstate(divide="ignore"):
        db = 20 * np.log10(normalized)
    return _matrix_csv(np.maximum(db, db_floor))


def phase_map_csv(beam: BeamPattern) -> str:
    return _matrix_csv(beam.phase)


def cross_section_csv(profile: np.ndarray) -> str:
    buffer = io.StringIO()
    data = np.column_stack([np.degrees(profile[:, 0]), profile[:, 1]])
    np.savetxt(buffer, data, delimiter=",", fmt=_FLOAT, header="angle_deg,magnitude", comments="")
    return buffer.getvalue()


def overlaid_cross_sections_csv(labels: Sequence[str], profiles: Sequence[np.ndarray]) -> str:
    """Общая колонка углов и по столбцу на схему"""
    if not profiles:
        raise ParameterError("Нет сечений для экспорта")
    buffer = io.StringIO()
    data = np.column_stack([np.degrees(profiles[0][:, 0])] + [p[:, 1] for p in profiles])
    header = ",".join(["angle_deg", *labels])
    np.savetxt(buffer, data, delimiter=",", fmt=_FLOAT, header=header, comments="")
    return buffer.getvalue()


def metrics_csv(table: ComparisonTable) -> str:
    lines = [",".join(("scheme",) + METRIC_FIELDS)]
    for label, metrics in table.rows:
        lines.append(",".join([label] + [_FLOAT % v for v in metrics.as_row()]))
    return "\n".join(lines) + "\n"


def deltas_csv(table: ComparisonTable) -> str:
    lines = [",".join(("scheme_a", "scheme_b") + METRIC_FIELDS)]
    for label_a, label_b, diff in table.deltas:
        lines.append(",".join([label_a, label_b] + [_FLOAT % v for v in diff.as_row()]))
    return "\n".join(lines) + "\n"


def metrics_text(table: ComparisonTable) -> str:
    """Таблица метрик для чтения человеком"""
    header = f"{'scheme':<18} {'recon_error':>14} {'aligned':>14} {'mainlobe':>10} {'sidelobe':>10} {'peak_dB':>10}"
    lines = [header, "-" * len(header)]
    for label, m in table.rows:
        lines.append(
            f"{label:<18} {m.reconstruction_error:>14.6e} {m.aligned_error:>14.6e} {m.mainlobe_mean_gain:>10.4f} "
            f"{m.peak_sidelobe:>10.4f} {m.peak_gain_db:>10.2f}"
        )
    return "\n".join(lines) + "\n"
