import math
import os
from typing import Dict, Literal, Mapping, Optional, Tuple

from dotenv import dotenv_values, load_dotenv
from pydantic import BaseModel, ConfigDict, ValidationError, field_validator, model_validator

from .errors import ConfigError
from .geometry import PortGrid, build_port_grid, port_grid_from_count
from .steering import VMode

load_dotenv()

SchemeName = Literal["fixed", "fixed-phaseopt", "fluid", "fluid-phaseopt"]
DEFAULT_SCHEMES: Tuple[str, ...] = ("fixed", "fixed-phaseopt", "fluid-phaseopt")


class Config:
    # Окружение процесса
    OUTPUT_ROOT = os.getenv('FLUIDBEAM_OUTPUT_ROOT', 'outputs')
    LOG_LEVEL = os.getenv('FLUIDBEAM_LOG_LEVEL', 'INFO')
    LOG_FILE = os.getenv('FLUIDBEAM_LOG_FILE', 'fluidbeam.log')

    # Лимит плотного словаря Z×L
    DICT_MEMORY_CAP_MB = float(os.getenv('FLUIDBEAM_DICT_MEMORY_CAP_MB', '1024'))

    # Индикаторы прогресса tqdm
    PROGRESS = os.getenv('FLUIDBEAM_PROGRESS', '1') not in ('0', 'false', 'no')

    @classmethod
    def memory_cap_bytes(cls) -> int:
        return int(cls.DICT_MEMORY_CAP_MB * 1024 * 1024)

    @classmethod
    def validate(cls):
        """Проверка настроек окружения"""
        if cls.DICT_MEMORY_CAP_MB <= 0:
            raise ConfigError("FLUIDBEAM_DICT_MEMORY_CAP_MB должен быть положительным")

        # Создаем корневую папку для результатов если не существует
        os.makedirs(cls.OUTPUT_ROOT, exist_ok=True)

        return True


class RunConfig(BaseModel):
    """
    Параметры одного запуска. Значения по умолчанию - эталонная конфигурация
    (180×180 направлений, 32×32 порта λ/4, S = 256, решетка 16×16 λ/2).

    Все длины задаются в длинах волн (`*_wl`), поэтому выбор несущей
    не влияет на форму диаграмм.
    """

    model_config = ConfigDict(frozen=True, extra="forbid")

    # Угловая сетка
    angles_p: int = 180
    angles_q: int = 180

    # Сетка портов fluid-антенны
    ports_m: int = 32
    ports_n: int = 32
    # только L: квадратная сетка M = N = sqrt(L)
    ports_l: Optional[int] = None
    wavelength: float = 0.01
    d_wl: float = 0.25
    d_min_wl: float = 0.5

    # Фиксированная решетка L_a×L_a
    fixed_size: int = 16
    fixed_spacing_wl: float = 0.5

    # Желаемый луч
    region_phi_lo: float = math.pi / 6
    region_phi_hi: float = math.pi / 3
    region_theta_lo: float = 0.0
    region_theta_hi: float = math.pi / 6
    phase_slope: float = 0.1
    phase_convention: Literal["index", "radian"] = "index"

    # Алгоритмы
    active_ports: int = 256
    alpha: float = -0.01
    retrieval_iters: int = 50
    early_stop: bool = False
    vmode: VMode = VMode.DECOUPLED
    storage: Literal["dense", "factored"] = "factored"
    retrieval_aperture: Literal["array", "grid"] = "array"
    block_shift: Literal["center", "corner"] = "center"
    residual_mode: Literal["normalized", "least-squares"] = "normalized"
    normalize_columns: bool = True
    feasibility_guard: bool = True

    # Оценка и экспорт
    guard_cells: int = 3
    db_floor: float = -80.0
    xsec_theta_deg: float = 20.0
    xsec_phi_deg: float = 55.0

    output_dir: Optional[str] = None
    schemes: Tuple[SchemeName, ...] = DEFAULT_SCHEMES

    @field_validator("schemes", mode="before")
    @classmethod
    def _split_schemes(cls, value):
        if isinstance(value, str):
            return tuple(part.strip() for part in value.split(",") if part.strip())
        return value

    @field_validator("output_dir", "ports_l", mode="before")
    @classmethod
    def _empty_optional(cls, value):
        return None if value == "" else value

    @field_validator("angles_p", "angles_q")
    @classmethod
    def _angle_count(cls, value: int) -> int:
        if value < 2:
            raise ValueError("угловая сетка требует P, Q >= 2")
        return value

    @field_validator("ports_m", "ports_n", "fixed_size", "active_ports")
    @classmethod
    def _positive_count(cls, value: int) -> int:
        if value < 1:
            raise ValueError("размеры должны быть >= 1")
        return value

    @field_validator("wavelength", "d_wl", "fixed_spacing_wl")
    @classmethod
    def _positive_length(cls, value: float) -> float:
        if not value > 0 or not math.isfinite(value):
            raise ValueError("физические величины должны быть положительными")
        return value

    @field_validator("d_min_wl")
    @classmethod
    def _non_negative_spacing(cls, value: float) -> float:
        if value < 0 or not math.isfinite(value):
            raise ValueError("d_min не может быть отрицательным")
        return value

    @field_validator("retrieval_iters", "guard_cells")
    @classmethod
    def _non_negative_count(cls, value: int) -> int:
        if value < 0:
            raise ValueError("значение не может быть отрицательным")
        return value

    @model_validator(mode="before")
    @classmethod
    def _square_from_count(cls, data):
        """PORTS_L без PORTS_M/PORTS_N задает квадратную сетку"""
        if not isinstance(data, dict) or data.get("ports_l") in (None, ""):
            return data
        try:
            side = math.isqrt(int(data["ports_l"]))
        except (TypeError, ValueError):
            return data
        return {"ports_m": side, "ports_n": side, **data}

    @model_validator(mode="after")
    def _check_consistency(self):
        half_pi = math.pi / 2
        bounds = (self.region_phi_lo, self.region_phi_hi, self.region_theta_lo, self.region_theta_hi)
        if any(abs(b) > half_pi for b in bounds):
            raise ValueError("целевая область выходит за [-pi/2, pi/2]")
        if not (self.region_phi_lo < self.region_phi_hi and self.region_theta_lo < self.region_theta_hi):
            raise ValueError("границы целевой области должны возрастать")
        if self.ports_l is not None:
            side = math.isqrt(self.ports_l) if self.ports_l > 0 else 0
            if side < 1 or side * side != self.ports_l:
                raise ValueError("PORTS_L должно быть полным квадратом")
            if (self.ports_m, self.ports_n) != (side, side):
                raise ValueError("PORTS_L противоречит PORTS_M/PORTS_N")
        if self.active_ports > self.ports_m * self.ports_n:
            raise ValueError("S больше числа портов M*N")
        if not self.schemes:
            raise ValueError("не выбрано ни одной схемы")
        if self.uses_phase_retrieval:
            root = math.isqrt(self.active_ports)
            if root * root != self.active_ports:
                raise ValueError("S должно быть полным квадратом при фазовой оптимизации")
            if root > min(self.angles_p, self.angles_q):
                raise ValueError("sqrt(S) больше размера угловой сетки")
            if self.fixed_size > min(self.angles_p, self.angles_q):
                raise ValueError("L_a больше размера угловой сетки")
        return self

    @property
    def uses_phase_retrieval(self) -> bool:
        return any(s.endswith("phaseopt") for s in self.schemes)

    def fluid_ports(self) -> PortGrid:
        if self.ports_l is not None:
            return port_grid_from_count(self.ports_l, self.port_spacing, self.wavelength)
        return build_port_grid(self.ports_m, self.ports_n, self.port_spacing, self.wavelength)

    def fixed_ports(self) -> PortGrid:
        return build_port_grid(self.fixed_size, self.fixed_size, self.fixed_spacing, self.wavelength)

    @property
    def port_spacing(self) -> float:
        return self.d_wl * self.wavelength

    @property
    def min_spacing(self) -> float:
        return self.d_min_wl * self.wavelength

    @property
    def fixed_spacing(self) -> float:
        return self.fixed_spacing_wl * self.wavelength

    # Файл конфигурации: KEY=VALUE, ключи - имена полей в верхнем регистре

    @classmethod
    def from_mapping(cls, values: Mapping[str, Optional[str]]) -> "RunConfig":
        fields = {}
        for key, raw in values.items():
            name = key.strip().lower()
            if name not in cls.model_fields:
                raise ConfigError(f"Неизвестный ключ конфигурации: {key}")
            fields[name] = raw
        try:
            return cls(**fields)
        except ValidationError as e:
            raise ConfigError(f"Некорректная конфигурация: {e}") from e

    @classmethod
    def from_env_file(cls, path: Optional[str] = None, overrides: Mapping[str, str] = None) -> "RunConfig":
        """Прочитать конфигурацию из файла и применить переопределения"""
        values: Dict[str, Optional[str]] = {}
        if path:
            if not os.path.exists(path):
                raise ConfigError(f"Файл конфигурации не найден: {path}")
            values.update({k.upper(): v for k, v in dotenv_values(path).items()})
        for key, value in (overrides or {}).items():
            values[key.upper()] = value
        return cls.from_mapping(values)

    def with_overrides(self, **changes) -> "RunConfig":
        try:
            return type(self)(**{**self.model_dump(), **changes})
        except ValidationError as e:
            raise ConfigError(f"Некорректная конфигурация: {e}") from e

    def to_env_text(self) -> str:
        lines = []
        for name in type(self).model_fields:
            lines.append(f"{name.upper()}={_format_value(getattr(self, name))}")
        return "\n".join(lines) + "\n"


def _format_value(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, VMode):
        return value.value
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, tuple):
        return ",".join(value)
    return str(value)
