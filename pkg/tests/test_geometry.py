"""Сетки портов и углов, минимальное расстояние"""

import math

import numpy as np
import pytest

from fluidbeam.errors import ParameterError
from fluidbeam.geometry import (
    build_angular_grid,
    build_port_grid,
    pairwise_min_distance,
    port_grid_from_count,
)

LAM = 0.01


def test_single_port_at_origin():
    grid = build_port_grid(1, 1, 0.3, LAM)
    assert grid.size == 1
    np.testing.assert_array_equal(grid.positions, [[0.0, 0.0]])


def test_reference_fluid_grid():
    grid = build_port_grid(32, 32, LAM / 4, LAM)
    assert grid.size == 1024
    assert grid.aperture == pytest.approx((31 * LAM / 4, 31 * LAM / 4))


def test_fixed_baseline_grid():
    grid = build_port_grid(16, 16, LAM / 2, LAM)
    assert grid.size == 256
    assert grid.aperture[0] == pytest.approx(15 * LAM / 2)


def test_port_indexing_round_trip():
    grid = build_port_grid(5, 3, LAM / 4, LAM)
    idx = np.arange(grid.size)
    m, n = grid.index_to_rc(idx)
    np.testing.assert_array_equal(grid.rc_to_index(m, n), idx)
    # m меняется быстрее: l = n·M + m
    assert tuple(int(v) for v in grid.index_to_rc(6)) == (1, 1)
    assert grid.positions[1, 0] - grid.positions[0, 0] == pytest.approx(LAM / 4)
    assert grid.positions[1, 1] == grid.positions[0, 1]


def test_grid_is_centered():
    grid = build_port_grid(6, 7, LAM / 4, LAM)
    np.testing.assert_allclose(grid.positions.sum(axis=0), [0.0, 0.0], atol=1e-15)


def test_positions_read_only():
    grid = build_port_grid(2, 2, LAM / 4, LAM)
    with pytest.raises(ValueError):
        grid.positions[0, 0] = 1.0


@pytest.mark.parametrize("rows, cols, d, lam", [(0, 3, 1.0, 1.0), (3, 3, 0.0, 1.0), (3, 3, 1.0, -1.0)])
def test_invalid_port_grid(rows, cols, d, lam):
    with pytest.raises(ParameterError):
        build_port_grid(rows, cols, d, lam)


def test_port_grid_from_count():
    assert port_grid_from_count(1024, LAM / 4, LAM).rows == 32
    with pytest.raises(ParameterError):
        port_grid_from_count(1000, LAM / 4, LAM)


def test_angular_grid_sizes():
    grid = build_angular_grid(180, 180)
    assert grid.Z == 32400
    assert np.all(np.diff(grid.phi) > 0)
    np.testing.assert_allclose(build_angular_grid(2, 2).phi, [-np.pi / 2, np.pi / 2])
    np.testing.assert_allclose(build_angular_grid(3, 4).phi, [-np.pi / 2, 0.0, np.pi / 2], atol=1e-15)


def test_angular_grid_too_small():
    with pytest.raises(ParameterError):
        build_angular_grid(1, 5)


def test_flat_angles_column_stacking():
    grid = build_angular_grid(3, 2)
    phi_z, theta_z = grid.flat_angles()
    # z = q·P + p
    assert phi_z[4] == grid.phi[1]
    assert theta_z[4] == grid.theta[1]


def test_pairwise_min_distance_examples():
    grid = build_port_grid(4, 4, LAM / 4, LAM)
    assert pairwise_min_distance(grid, [5]) == math.inf
    assert pairwise_min_distance(grid, [0, 1]) == pytest.approx(LAM / 4)
    assert pairwise_min_distance(grid, [0, 5]) == pytest.approx(LAM * math.sqrt(2) / 4)


def test_pairwise_min_distance_permutation_invariant(rng):
    grid = build_port_grid(6, 6, LAM / 4, LAM)
    idx = rng.choice(grid.size, size=7, replace=False)
    assert pairwise_min_distance(grid, idx) == pairwise_min_distance(grid, idx[::-1])


def test_pairwise_min_distance_errors():
    grid = build_port_grid(2, 2, LAM / 4, LAM)
    with pytest.raises(ParameterError):
        pairwise_min_distance(grid, [0, 4])
    with pytest.raises(ParameterError):
        pairwise_min_distance(grid, [])
