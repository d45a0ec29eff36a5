"""
Цепочка стадий для схем сравнения в стиле frame processor:
каждая стадия дополняет кадр схемы и передает его дальше по цепочке.
"""

import asyncio
import logging
import time
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from fluidbeam.beam_spec import BeamPattern, TargetRegion, make_desired_beam
from fluidbeam.config import Config, RunConfig
from fluidbeam.errors import BeamformingError, with_context
from fluidbeam.evaluation import BeamMetrics, ComparisonTable, beam_metrics, compare_configs
from fluidbeam.fourier import phase_retrieve, phase_retrieve_on_array
from fluidbeam.geometry import AngularGrid, PortGrid, build_angular_grid
from fluidbeam.port_select import Selection, full_selection, select_ports
from fluidbeam.steering import SteeringDictionary, build_dictionary, synthesize_beam

logger = logging.getLogger(__name__)


@dataclass
class SchemeFrame:
    """Кадр схемы: все промежуточные и итоговые данные одного прогона"""

    scheme: str
    config: RunConfig
    angles: Optional[AngularGrid] = None
    region: Optional[TargetRegion] = None
    desired: Optional[BeamPattern] = None
    target: Optional[BeamPattern] = None
    retrieval_history: List[float] = field(default_factory=list)
    ports: Optional[PortGrid] = None
    dictionary: Optional[SteeringDictionary] = None
    selection: Optional[Selection] = None
    beam: Optional[BeamPattern] = None
    metrics: Optional[BeamMetrics] = None
    elapsed: float = 0.0

    @property
    def is_fluid(self) -> bool:
        return self.scheme.startswith("fluid")

    @property
    def uses_phase_retrieval(self) -> bool:
        return self.scheme.endswith("phaseopt")


class StageProcessor:
    """Базовая стадия: обработать кадр и передать дальше"""

    def __init__(self):
        self.downstream: Optional["StageProcessor"] = None

    def set_downstream(self, processor: "StageProcessor") -> "StageProcessor":
        """Установить следующую стадию, вернуть ее для построения цепочки"""
        self.downstream = processor
        return processor

    def process_frame(self, frame: SchemeFrame) -> SchemeFrame:
        frame = self.handle(frame)
        if self.downstream:
            return self.downstream.process_frame(frame)
        return frame

    def handle(self, frame: SchemeFrame) -> SchemeFrame:
        return frame


class DesiredBeamStage(StageProcessor):
    def handle(self, frame):
        cfg = frame.config
        frame.angles = build_angular_grid(cfg.angles_p, cfg.angles_q)
        frame.region = TargetRegion(cfg.region_phi_lo, cfg.region_phi_hi, cfg.region_theta_lo, cfg.region_theta_hi)
        frame.desired = make_desired_beam(frame.angles, frame.region, cfg.phase_slope, cfg.phase_convention)
        frame.target = frame.desired
        return frame


class ArrayStage(StageProcessor):
    def handle(self, frame):
        cfg = frame.config
        frame.ports = cfg.fluid_ports() if frame.is_fluid else cfg.fixed_ports()
        frame.dictionary = build_dictionary(
            frame.ports, frame.angles, cfg.vmode, cfg.storage, Config.memory_cap_bytes()
        )
        return frame


class PhaseRetrievalStage(StageProcessor):
    def __init__(self, progress: bool = False):
        super().__init__()
        self.progress = progress

    def handle(self, frame):
        cfg = frame.config
        if cfg.retrieval_aperture == "array":
            # апертура - порты самой схемы: вся сетка fluid или решетка L_a×L_a
            frame.target, frame.retrieval_history = phase_retrieve_on_array(
                frame.desired,
                frame.dictionary,
                cfg.retrieval_iters,
                early_stop=cfg.early_stop,
                return_history=True,
                progress=self.progress,
            )
            return frame
        # блок ДПФ: sqrt(S) для fluid, L_a для фиксированной решетки
        active = cfg.active_ports if frame.is_fluid else cfg.fixed_size ** 2
        frame.target, frame.retrieval_history = phase_retrieve(
            frame.desired,
            active,
            cfg.retrieval_iters,
            block_shift=cfg.block_shift,
            early_stop=cfg.early_stop,
            return_history=True,
            progress=self.progress,
        )
        return frame


class SelectionStage(StageProcessor):
    def __init__(self, progress: bool = False):
        super().__init__()
        self.progress = progress

    def handle(self, frame):
        cfg = frame.config
        if not frame.is_fluid:
            frame.selection = full_selection(frame.dictionary, frame.target)
            return frame
        frame.selection = select_ports(
            frame.dictionary,
            frame.target,
            cfg.active_ports,
            cfg.alpha,
            cfg.min_spacing,
            frame.ports,
            normalize_columns=cfg.normalize_columns,
            residual_mode=cfg.residual_mode,
            feasibility_guard=cfg.feasibility_guard,
            progress=self.progress,
        )
        return frame


class SynthesisStage(StageProcessor):
    def handle(self, frame):
        frame.beam = synthesize_beam(frame.dictionary, frame.selection)
        return frame


class EvaluationStage(StageProcessor):
    def handle(self, frame):
        cfg = frame.config
        frame.metrics = beam_metrics(frame.target, frame.beam, frame.region, cfg.guard_cells, cfg.db_floor)
        return frame


def build_pipeline(scheme: str, progress: bool = False) -> StageProcessor:
    """Собрать цепочку стадий для схемы"""
    head = DesiredBeamStage()
    tail = head.set_downstream(ArrayStage())
    if scheme.endswith("phaseopt"):
        tail = tail.set_downstream(PhaseRetrievalStage(progress))
    tail = tail.set_downstream(SelectionStage(progress))
    tail = tail.set_downstream(SynthesisStage())
    tail.set_downstream(EvaluationStage())
    return head


def run_scheme(cfg: RunConfig, scheme: str, progress: bool = False) -> SchemeFrame:
    """Прогнать одну схему; ошибки модулей получают имя схемы в сообщении"""
    logger.info(f"Запуск схемы {scheme}")
    started = time.perf_counter()
    try:
        frame = build_pipeline(scheme, progress).process_frame(SchemeFrame(scheme, cfg))
    except BeamformingError as e:
        raise with_context(e, f"схема {scheme}") from e
    frame.elapsed = time.perf_counter() - started
    logger.info(f"Схема {scheme} завершена за {frame.elapsed:.2f}с")
    return frame


async def run_schemes(cfg: RunConfig, schemes: Sequence[str], progress: bool = False) -> List[SchemeFrame]:
    """Схемы выполняются параллельно в потоках; порядок результатов - порядок schemes"""
    tasks = [asyncio.to_thread(run_scheme, cfg, scheme, progress) for scheme in schemes]
    return list(await asyncio.gather(*tasks))


def compare_frames(frames: Sequence[SchemeFrame]) -> Tuple[ComparisonTable, List[str]]:
    """Общая таблица метрик; каждая схема сравнивается со своей целью"""
    labels = unique_labels([f.scheme for f in frames])
    cfg = frames[0].config
    table = compare_configs(
        [(label, f.beam) for label, f in zip(labels, frames)],
        frames[0].region,
        frames[0].desired,
        cfg.guard_cells,
        cfg.db_floor,
        targets=[f.target for f in frames],
    )
    return table, labels


def unique_labels(schemes: Sequence[str]) -> List[str]:
    """Повторные схемы получают суффиксы -2, -3, ..."""
    seen = {}
    labels = []
    for scheme in schemes:
        seen[scheme] = seen.get(scheme, 0) + 1
        labels.append(scheme if seen[scheme] == 1 else f"{scheme}-{seen[scheme]}")
    return labels


def selected_port_table(frame: SchemeFrame) -> np.ndarray:
    """(index, m, n, x, y, Re w, Im w) для активных портов"""
    support = np.asarray(frame.selection.support, dtype=np.int64)
    m, n = support % frame.ports.rows, support // frame.ports.rows
    positions = frame.ports.positions[support]
    weights = np.asarray(frame.selection.weights)
    return np.column_stack([support, m, n, positions, weights.real, weights.imag])
