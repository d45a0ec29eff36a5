import os
import sys

import numpy as np
import pytest

_ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
sys.path.insert(0, _ROOT)

from fluidbeam.config import RunConfig  # noqa: E402
from fluidbeam.geometry import build_angular_grid, build_port_grid  # noqa: E402

WAVELENGTH = 0.01


@pytest.fixture
def rng():
    return np.random.default_rng(20240607)


@pytest.fixture
def small_ports():
    """4×4 порта с шагом λ/4"""
    return build_port_grid(4, 4, WAVELENGTH / 4, WAVELENGTH)


@pytest.fixture
def small_angles():
    return build_angular_grid(8, 8)


@pytest.fixture
def small_config(tmp_path):
    """Уменьшенная конфигурация: все схемы проходят за доли секунды"""
    return RunConfig(
        angles_p=24,
        angles_q=24,
        ports_m=8,
        ports_n=8,
        active_ports=16,
        fixed_size=4,
        retrieval_iters=5,
        output_dir=str(tmp_path / "bundle"),
    )


def small_overrides():
    """Те же значения в виде --set для командной строки"""
    return [
        "ANGLES_P=24",
        "ANGLES_Q=24",
        "PORTS_M=8",
        "PORTS_N=8",
        "ACTIVE_PORTS=16",
        "FIXED_SIZE=4",
        "RETRIEVAL_ITERS=5",
    ]
