import argparse
import asyncio
import logging
import math
from typing import Dict, List, Optional, Sequence

import numpy as np

from fluidbeam.beam_spec import BeamPattern, TargetRegion, make_desired_beam, matricize, vectorize
from fluidbeam.config import Config, RunConfig
from fluidbeam.errors import BeamformingError, ConfigError
from fluidbeam.evaluation import METRIC_FIELDS, compare_configs, heatmap_csv, metrics_csv, metrics_text, phase_map_csv
from fluidbeam.fourier import aperture_mask, phase_retrieve, phase_retrieve_on_array, project_to_aperture
from fluidbeam.geometry import build_angular_grid
from fluidbeam.steering import VMode, build_dictionary, estimate_dictionary_bytes
from pipeline.bundle_recorder import BundleRecorder, history_csv, write_comparison_bundle, write_scheme_bundle
from pipeline.scheme_processor import compare_frames, run_scheme, run_schemes
from utils.perf_monitor import PerformanceMonitor

logger = logging.getLogger(__name__)

SCHEMES = ("fixed", "fixed-phaseopt", "fluid", "fluid-phaseopt")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="файл конфигурации KEY=VALUE")
    common.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                        help="переопределить поле конфигурации (можно повторять)")
    common.add_argument("--output-dir", help="каталог результатов (иначе $FLUIDBEAM_OUTPUT_ROOT/<команда>)")
    common.add_argument("--vmode", choices=[m.value for m in VMode])
    common.add_argument("--iters", type=int, help="число итераций восстановления фазы")
    common.add_argument("--no-progress", action="store_true", help="отключить индикаторы прогресса")

    parser = argparse.ArgumentParser(prog="fluidbeam", description="Синтез диаграмм fluid-антенны")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", parents=[common], help="одна схема")
    run.add_argument("--scheme", choices=SCHEMES, default="fluid-phaseopt")

    compare = sub.add_parser("compare", parents=[common], help="сравнение схем")
    compare.add_argument("--schemes", help="схемы через запятую (по умолчанию из конфигурации)")

    sub.add_parser("phase-retrieve", parents=[common], help="только восстановление фазы")
    sub.add_parser("export-dict-stats", parents=[common], help="статистика словарей")

    sweep = sub.add_parser("sweep-k", parents=[common], help="сравнение для набора наклонов фазы k")
    sweep.add_argument("--slopes", default="0.0,0.1,0.3,1.0", help="значения k через запятую")
    sweep.add_argument("--schemes", help="схемы через запятую")
    return parser


def parse_overrides(items: Sequence[str]) -> Dict[str, str]:
    overrides = {}
    for item in items:
        if "=" not in item:
            raise ConfigError(f"Ожидается KEY=VALUE: {item}")
        key, value = item.split("=", 1)
        overrides[key.strip().upper()] = value.strip()
    return overrides


def load_config(args: argparse.Namespace) -> RunConfig:
    """Файл конфигурации + --set + отдельные флаги"""
    overrides = parse_overrides(args.overrides)
    if args.vmode:
        overrides["VMODE"] = args.vmode
    if args.iters is not None:
        overrides["RETRIEVAL_ITERS"] = str(args.iters)
    if getattr(args, "schemes", None):
        overrides["SCHEMES"] = args.schemes
    if args.output_dir:
        overrides["OUTPUT_DIR"] = args.output_dir
    return RunConfig.from_env_file(args.config, overrides)


class ConsoleBeamRunner:
    """Консольный интерфейс: команды запуска схем и экспорта"""

    def __init__(self, cfg: RunConfig, progress: bool = True, recorder: BundleRecorder = None):
        self.cfg = cfg
        self.progress = progress
        self.recorder = recorder or BundleRecorder()

    def print_metrics(self, text: str):
        print("\n📊 Метрики:")
        print(text)

    async def run(self, scheme: str) -> str:
        """Одна схема: каталог run-<scheme>"""
        self.recorder.check(f"run-{scheme}", self.cfg.output_dir)
        with PerformanceMonitor(f"run {scheme}"):
            frame = await asyncio.to_thread(run_scheme, self.cfg, scheme, self.progress)
        table = compare_configs([(scheme, frame.beam)], frame.region, frame.desired,
                                self.cfg.guard_cells, self.cfg.db_floor, targets=[frame.target])

        async with self.recorder.bundle(f"run-{scheme}", self.cfg.output_dir) as writer:
            await write_scheme_bundle(writer, frame, table)
            await writer.write_text("config.env", self.cfg.to_env_text())

        self.print_metrics(metrics_text(table))
        return self.recorder.resolve(f"run-{scheme}", self.cfg.output_dir)

    async def compare(self) -> str:
        """Все схемы конфигурации на одном желаемом луче"""
        self.recorder.check("compare", self.cfg.output_dir)
        with PerformanceMonitor("compare"):
            frames = await run_schemes(self.cfg, self.cfg.schemes, self.progress)
        table, labels = compare_frames(frames)

        async with self.recorder.bundle("compare", self.cfg.output_dir) as writer:
            await write_comparison_bundle(writer, frames, labels, table)

        self.print_metrics(metrics_text(table))
        return self.recorder.resolve("compare", self.cfg.output_dir)

    async def sweep(self, slopes: Sequence[float]) -> str:
        """compare для каждого k; общий sweep.csv"""
        self.recorder.check("sweep-k", self.cfg.output_dir)
        lines = [",".join(("k", "scheme") + METRIC_FIELDS)]
        texts = []
        for slope in slopes:
            cfg = self.cfg.with_overrides(phase_slope=slope)
            frames = await run_schemes(cfg, cfg.schemes, self.progress)
            table, _ = compare_frames(frames)
            for row in metrics_csv(table).splitlines()[1:]:
                lines.append(f"{slope!r},{row}")
            texts.append(f"k = {slope}\n{metrics_text(table)}")

        async with self.recorder.bundle("sweep-k", self.cfg.output_dir) as writer:
            await writer.write_text("sweep.csv", "\n".join(lines) + "\n")
            await writer.write_text("metrics.txt", "\n".join(texts))
            await writer.write_text("config.env", self.cfg.to_env_text())

        self.print_metrics("\n".join(texts))
        return self.recorder.resolve("sweep-k", self.cfg.output_dir)

    async def phase_retrieve(self) -> str:
        """Исходная и уточненная карта фазы, история невязки апертуры"""
        cfg = self.cfg
        self.recorder.check("phase-retrieve", cfg.output_dir)
        angles = build_angular_grid(cfg.angles_p, cfg.angles_q)
        region = TargetRegion(cfg.region_phi_lo, cfg.region_phi_hi, cfg.region_theta_lo, cfg.region_theta_hi)
        desired = make_desired_beam(angles, region, cfg.phase_slope, cfg.phase_convention)

        if cfg.retrieval_aperture == "array":
            ports = cfg.fluid_ports()
            dictionary = build_dictionary(ports, angles, cfg.vmode, cfg.storage, Config.memory_cap_bytes())
            refined, history = await asyncio.to_thread(
                phase_retrieve_on_array, desired, dictionary, cfg.retrieval_iters,
                cfg.early_stop, 1e-6, True, self.progress,
            )
            realized = matricize(dictionary.synthesize(dictionary.correlate(vectorize(refined))), angles)
            aperture = {"aperture": "array", "aperture_rows": ports.rows, "aperture_cols": ports.cols}
        else:
            refined, history = await asyncio.to_thread(
                phase_retrieve, desired, cfg.active_ports, cfg.retrieval_iters,
                cfg.block_shift, cfg.early_stop, 1e-6, True, self.progress,
            )
            side = math.isqrt(cfg.active_ports)
            mask = aperture_mask(angles.shape, side, cfg.block_shift)
            realized = BeamPattern(angles, project_to_aperture(refined.values, mask))
            aperture = {"aperture": "grid", "aperture_side": side, "block_shift": cfg.block_shift}

        async with self.recorder.bundle("phase-retrieve", cfg.output_dir) as writer:
            await writer.write_text("phase_map_initial.csv", phase_map_csv(desired))
            await writer.write_text("phase_map.csv", phase_map_csv(refined))
            await writer.write_text("retrieval.csv", history_csv(history))
            await writer.write_text("heatmap.csv", heatmap_csv(realized))
            await writer.write_json("meta.json", {
                "iterations": len(history) - 1,
                "initial_residual": history[0],
                "final_residual": history[-1],
                **aperture,
            })
            await writer.write_text("config.env", cfg.to_env_text())

        print(f"\n🔁 Итераций: {len(history) - 1}, невязка {history[0]:.4e} → {history[-1]:.4e}")
        return self.recorder.resolve("phase-retrieve", cfg.output_dir)

    async def export_dict_stats(self) -> str:
        """Размеры плотного и факторизованного хранения, проверки словаря"""
        cfg = self.cfg
        self.recorder.check("dict-stats", cfg.output_dir)
        angles = build_angular_grid(cfg.angles_p, cfg.angles_q)
        arrays = {
            "fluid": cfg.fluid_ports(),
            "fixed": cfg.fixed_ports(),
        }
        lines = ["array,Z,L,dense_entries,factored_entries,dense_mb,factored_mb,"
                 "max_modulus_deviation,max_column_norm_deviation,build_seconds,peak_memory_mb"]
        for name, ports in arrays.items():
            with PerformanceMonitor(f"словарь {name}") as monitor:
                dictionary = build_dictionary(ports, angles, cfg.vmode, "factored")
                modulus_dev = dictionary.max_modulus_deviation()
                norm_dev = float(np.max(np.abs(dictionary.column_norms() - dictionary.column_norm)))
            stats = monitor.result
            dense_bytes = estimate_dictionary_bytes(ports, angles, "dense")
            factored_bytes = estimate_dictionary_bytes(ports, angles, "factored")
            lines.append(",".join(str(v) for v in (
                name, angles.Z, ports.size, angles.Z * ports.size, angles.Z * (ports.rows + ports.cols),
                f"{dense_bytes / 2**20:.3f}", f"{factored_bytes / 2**20:.3f}",
                f"{modulus_dev:.3e}", f"{norm_dev:.3e}",
                f"{stats['duration']:.3f}", f"{stats['peak_memory_mb']:.1f}",
            )))
            print(f"📦 {name}: Z={angles.Z}, L={ports.size}, dense {dense_bytes / 2**20:.1f}MB, "
                  f"factored {factored_bytes / 2**20:.1f}MB")

        async with self.recorder.bundle("dict-stats", cfg.output_dir) as writer:
            await writer.write_text("dict_stats.csv", "\n".join(lines) + "\n")
            await writer.write_text("config.env", cfg.to_env_text())
        return self.recorder.resolve("dict-stats", cfg.output_dir)


async def main(argv: Optional[List[str]] = None) -> int:
    """Разобрать аргументы и выполнить команду; вернуть код выхода"""
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args)
        Config.validate()
        runner = ConsoleBeamRunner(cfg, progress=Config.PROGRESS and not args.no_progress)

        if args.command == "run":
            path = await runner.run(args.scheme)
        elif args.command == "compare":
            path = await runner.compare()
        elif args.command == "sweep-k":
            slopes = [float(s) for s in args.slopes.split(",") if s.strip()]
            if not slopes:
                raise ConfigError("Пустой список --slopes")
            path = await runner.sweep(slopes)
        elif args.command == "phase-retrieve":
            path = await runner.phase_retrieve()
        else:
            path = await runner.export_dict_stats()

    except BeamformingError as e:
        logger.error(f"Ошибка: {e}")
        print(f"\n❌ {e}")
        return e.exit_code
    except ValueError as e:
        # например, некорректное число в --slopes
        logger.error(f"Ошибка параметров: {e}")
        print(f"\n❌ {e}")
        return ConfigError.exit_code

    print(f"\n✅ Готово: {path}")
    return 0


def run_cli(argv: Optional[List[str]] = None) -> int:
    return asyncio.run(main(argv))
