"""
Синтез диаграмм направленности планарной fluid-антенны
"""

from .beam_spec import BeamPattern, TargetRegion, make_desired_beam, matricize, region_mask, vectorize
from .config import Config, RunConfig
from .errors import (
    BeamformingError,
    CapacityError,
    ConfigError,
    DegenerateBeamError,
    DegenerateRegionError,
    InfeasibleSpacingError,
    ParameterError,
)
from .evaluation import BeamMetrics, ComparisonTable, beam_metrics, compare_configs, cross_section, reconstruction_error
from .fourier import WeightVector, dft2_forward, dft2_inverse, phase_retrieve, weights_from_beam
from .geometry import AngularGrid, PortGrid, build_angular_grid, build_port_grid, pairwise_min_distance
from .port_select import Selection, SelectionStep, full_selection, select_ports
from .steering import SteeringDictionary, VMode, build_dictionary, synthesize_beam

__version__ = "0.1.0"

__all__ = [
    "AngularGrid",
    "BeamMetrics",
    "BeamPattern",
    "BeamformingError",
    "CapacityError",
    "ComparisonTable",
    "Config",
    "ConfigError",
    "DegenerateBeamError",
    "DegenerateRegionError",
    "InfeasibleSpacingError",
    "ParameterError",
    "PortGrid",
    "RunConfig",
    "Selection",
    "SelectionStep",
    "SteeringDictionary",
    "TargetRegion",
    "VMode",
    "WeightVector",
    "beam_metrics",
    "build_angular_grid",
    "build_dictionary",
    "build_port_grid",
    "compare_configs",
    "cross_section",
    "dft2_forward",
    "dft2_inverse",
    "full_selection",
    "make_desired_beam",
    "matricize",
    "pairwise_min_distance",
    "phase_retrieve",
    "reconstruction_error",
    "region_mask",
    "select_ports",
    "synthesize_beam",
    "vectorize",
    "weights_from_beam",
]
