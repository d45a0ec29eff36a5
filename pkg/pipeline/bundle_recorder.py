import io
import json
import logging
import os
import shutil
import tempfile
from contextlib import asynccontextmanager
from typing import AsyncIterator, Dict, Optional, Sequence

import aiofiles
import numpy as np

from fluidbeam.config import Config, RunConfig
from fluidbeam.errors import ConfigError
from fluidbeam.evaluation import (
    ComparisonTable,
    cross_section,
    cross_section_csv,
    deltas_csv,
    heatmap_csv,
    heatmap_db_csv,
    metrics_csv,
    metrics_text,
    overlaid_cross_sections_csv,
    phase_map_csv,
)
from pipeline.scheme_processor import SchemeFrame, selected_port_table

logger = logging.getLogger(__name__)

# Любой каталог результатов содержит хотя бы один из этих файлов
BUNDLE_MARKERS = ("config.env", "meta.json")


class BundleWriter:
    """Запись файлов одного каталога результатов"""

    def __init__(self, path: str):
        self.path = path
        os.makedirs(self.path, exist_ok=True)

    def subdir(self, name: str) -> "BundleWriter":
        return BundleWriter(os.path.join(self.path, name))

    async def write_text(self, filename: str, text: str):
        async with aiofiles.open(os.path.join(self.path, filename), "w", encoding="utf-8", newline="\n") as f:
            await f.write(text)

    async def write_json(self, filename: str, payload: Dict):
        await self.write_text(filename, json.dumps(payload, indent=2, sort_keys=True) + "\n")


class BundleRecorder:
    """
    Каталоги результатов запусков.

    Файлы пишутся во временный каталог рядом с целевым и переименовываются
    только после успешной записи всех файлов; при ошибке временный каталог
    удаляется, так что неполных каталогов результатов не остается.
    Существующий каталог заменяется, только если он пуст или записан
    этой программой (есть файл из BUNDLE_MARKERS).
    """

    def __init__(self, output_root: str = None):
        self.output_root = output_root or Config.OUTPUT_ROOT

    def resolve(self, name: str, output_dir: Optional[str] = None) -> str:
        return os.path.abspath(output_dir or os.path.join(self.output_root, name))

    def check(self, name: str, output_dir: Optional[str] = None):
        """Проверить каталог до расчета, чтобы не считать впустую"""
        check_replaceable(self.resolve(name, output_dir))

    @asynccontextmanager
    async def bundle(self, name: str, output_dir: Optional[str] = None) -> AsyncIterator[BundleWriter]:
        target = self.resolve(name, output_dir)
        check_replaceable(target)
        parent = os.path.dirname(target)
        os.makedirs(parent, exist_ok=True)
        staging = tempfile.mkdtemp(prefix=f".{os.path.basename(target)}.partial-", dir=parent)
        try:
            yield BundleWriter(staging)
        except BaseException:
            shutil.rmtree(staging, ignore_errors=True)
            logger.error(f"Запись результатов прервана, временный каталог удален: {staging}")
            raise
        try:
            # каталог мог появиться, пока шел расчет
            check_replaceable(target)
        except ConfigError:
            shutil.rmtree(staging, ignore_errors=True)
            raise
        if os.path.exists(target):
            shutil.rmtree(target)
        os.replace(staging, target)
        logger.info(f"Результаты сохранены: {target}")


def check_replaceable(target: str):
    """ConfigError, если по пути лежит чужой файл или непустой чужой каталог"""
    if not os.path.exists(target):
        return
    if not os.path.isdir(target):
        raise ConfigError(f"Путь результатов занят файлом: {target}")
    entries = os.listdir(target)
    if entries and not any(marker in entries for marker in BUNDLE_MARKERS):
        raise ConfigError(
            f"Каталог {target} не пуст и не похож на каталог результатов; укажите другой --output-dir"
        )


def _ports_csv(frame: SchemeFrame) -> str:
    buffer = io.StringIO()
    np.savetxt(
        buffer,
        selected_port_table(frame),
        delimiter=",",
        fmt=["%d", "%d", "%d", "%.12e", "%.12e", "%.12e", "%.12e"],
        header="index,m,n,x,y,weight_re,weight_im",
        comments="",
    )
    return buffer.getvalue()


def history_csv(history: Sequence[float]) -> str:
    lines = ["iteration,residual"] + [f"{i},{r:.12e}" for i, r in enumerate(history)]
    return "\n".join(lines) + "\n"


def scheme_meta(frame: SchemeFrame) -> Dict:
    """Метаданные без времени выполнения, чтобы каталоги были воспроизводимыми"""
    cfg = frame.config
    fluid = cfg.fluid_ports()
    fluid_x, fluid_y = ((fluid.rows - 1) * cfg.d_wl, (fluid.cols - 1) * cfg.d_wl)
    fixed_edge = (cfg.fixed_size - 1) * cfg.fixed_spacing_wl
    return {
        "scheme": frame.scheme,
        "grid": {
            "P": frame.angles.P,
            "Q": frame.angles.Q,
            "phi_range": [float(frame.angles.phi[0]), float(frame.angles.phi[-1])],
            "theta_range": [float(frame.angles.theta[0]), float(frame.angles.theta[-1])],
        },
        "vmode": cfg.vmode.value,
        "ports": {"rows": frame.ports.rows, "cols": frame.ports.cols, "active": len(frame.selection.support)},
        "aperture_wavelengths": {"fluid": [fluid_x, fluid_y], "fixed": [fixed_edge, fixed_edge]},
        "metrics": frame.metrics.to_dict(),
        "selection_trace": [step.to_dict() for step in frame.selection.trace],
        "config": json.loads(cfg.model_dump_json()),
    }


async def write_scheme_bundle(writer: BundleWriter, frame: SchemeFrame, table: ComparisonTable):
    """heatmap, сечения, метрики, порты, карта фазы и метаданные схемы"""
    cfg = frame.config
    xsec_theta = cross_section(frame.beam, "fixed-theta", np.radians(cfg.xsec_theta_deg))
    xsec_phi = cross_section(frame.beam, "fixed-phi", np.radians(cfg.xsec_phi_deg))

    await writer.write_text("heatmap.csv", heatmap_csv(frame.beam))
    await writer.write_text("heatmap_db.csv", heatmap_db_csv(frame.beam, cfg.db_floor))
    await writer.write_text("xsec_theta.csv", cross_section_csv(xsec_theta))
    await writer.write_text("xsec_phi.csv", cross_section_csv(xsec_phi))
    await writer.write_text("metrics.csv", metrics_csv(table))
    await writer.write_text("metrics.txt", metrics_text(table))
    await writer.write_text("ports.csv", _ports_csv(frame))
    await writer.write_text("phase_map.csv", phase_map_csv(frame.target))
    if frame.retrieval_history:
        await writer.write_text("retrieval.csv", history_csv(frame.retrieval_history))
    await writer.write_json("meta.json", scheme_meta(frame))


async def write_comparison_bundle(
    writer: BundleWriter,
    frames: Sequence[SchemeFrame],
    labels: Sequence[str],
    table: ComparisonTable,
):
    """Общая таблица, разности и наложенные сечения; схемы - в подкаталогах"""
    cfg = frames[0].config
    theta_profiles = [cross_section(f.beam, "fixed-theta", np.radians(cfg.xsec_theta_deg)) for f in frames]
    phi_profiles = [cross_section(f.beam, "fixed-phi", np.radians(cfg.xsec_phi_deg)) for f in frames]

    await writer.write_text("metrics.csv", metrics_csv(table))
    await writer.write_text("metrics.txt", metrics_text(table))
    await writer.write_text("deltas.csv", deltas_csv(table))
    await writer.write_text("xsec_theta.csv", overlaid_cross_sections_csv(labels, theta_profiles))
    await writer.write_text("xsec_phi.csv", overlaid_cross_sections_csv(labels, phi_profiles))
    await writer.write_text("config.env", cfg.to_env_text())

    for label, frame in zip(labels, frames):
        row = ComparisonTable(rows=[(label, table.metrics_for(label))])
        await write_scheme_bundle(writer.subdir(label), frame, row)
