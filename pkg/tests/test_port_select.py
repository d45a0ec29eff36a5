"""Жадный выбор портов с ограничением d_min"""

import logging

import numpy as np
import pytest

from fluidbeam.beam_spec import BeamPattern, TargetRegion, make_desired_beam, matricize
from fluidbeam.errors import DegenerateBeamError, InfeasibleSpacingError, ParameterError
from fluidbeam.geometry import build_angular_grid, build_port_grid, pairwise_min_distance
from fluidbeam.port_select import excluded_neighbors, full_selection, select_ports
from fluidbeam.steering import VMode, build_dictionary, steering_entry

LAM = 0.01
ALPHA = -0.01


def random_beam(rng, angles):
    values = rng.normal(size=angles.shape) + 1j * rng.normal(size=angles.shape)
    return BeamPattern(angles, values)


def straight_line_omp(ports, angles, g, sparsity, alpha):
    """Пошаговый перебор: все скаляры считаются явными циклами"""
    phi_z, theta_z = angles.flat_angles()
    D = np.empty((angles.Z, ports.size), dtype=complex)
    for z in range(angles.Z):
        for l in range(ports.size):
            D[z, l] = steering_entry(ports.positions[l], (phi_z[z], theta_z[z]), LAM, VMode.DECOUPLED)
    norms = [np.sqrt(sum(abs(D[z, l]) ** 2 for z in range(angles.Z))) for l in range(ports.size)]

    support, weights = [], []
    e = g.copy()
    for _ in range(sparsity):
        best, best_score = None, -1.0
        for j in range(ports.size):
            if j in support:
                continue
            score = abs(sum(np.conj(D[z, j]) * e[z] for z in range(angles.Z))) / norms[j]
            if score > best_score:
                best, best_score = j, score
        support.append(best)
        weights.append(sum(g[z] * np.conj(D[z, best]) for z in range(angles.Z)))
        y = sum(D[:, j] * w for j, w in zip(support, weights))
        e = g - alpha * y / np.sqrt(np.sum(np.abs(y) ** 2))
    return support, np.array(weights)


def test_excluded_neighbors_examples():
    grid = build_port_grid(32, 32, LAM / 4, LAM)
    interior = int(grid.rc_to_index(10, 10))
    excluded = excluded_neighbors(grid, interior, LAM / 2)
    assert len(excluded) == 8
    # на расстоянии ровно d_min порт остается доступным
    assert int(grid.rc_to_index(12, 10)) not in excluded
    assert len(excluded_neighbors(grid, interior, 0.0)) == 0
    assert len(excluded_neighbors(grid, 0, LAM / 2)) == 3


def test_excluded_neighbors_errors():
    grid = build_port_grid(4, 4, LAM / 4, LAM)
    with pytest.raises(ParameterError):
        excluded_neighbors(grid, 16, LAM / 2)
    with pytest.raises(ParameterError):
        excluded_neighbors(grid, 0, -1.0)


def test_perfect_match_atom_selected_first():
    ports = build_port_grid(4, 4, LAM / 4, LAM)
    angles = build_angular_grid(16, 16)
    dictionary = build_dictionary(ports, angles)
    g = dictionary.column(5)
    selection = select_ports(dictionary, g, 1, ALPHA, 0.0)
    assert selection.support == [5]


def test_matches_straight_line_oracle(rng):
    ports = build_port_grid(4, 4, LAM / 4, LAM)
    angles = build_angular_grid(8, 8)
    g = rng.normal(size=angles.Z) + 1j * rng.normal(size=angles.Z)

    expected_support, expected_weights = straight_line_omp(ports, angles, g, 3, ALPHA)
    for storage in ("dense", "factored"):
        dictionary = build_dictionary(ports, angles, VMode.DECOUPLED, storage)
        selection = select_ports(dictionary, g, 3, ALPHA, 0.0)
        assert selection.support == expected_support
        np.testing.assert_allclose(selection.weights, expected_weights, rtol=1e-9)


def test_spacing_uniqueness_and_trace(rng):
    ports = build_port_grid(8, 8, LAM / 4, LAM)
    angles = build_angular_grid(16, 16)
    dictionary = build_dictionary(ports, angles)
    selection = select_ports(dictionary, random_beam(rng, angles), 12, ALPHA, LAM / 2)

    assert len(set(selection.support)) == len(selection.support) == 12
    assert len(selection.trace) == 12
    assert pairwise_min_distance(ports, selection.support) >= LAM / 2


def test_chosen_index_attains_max_over_allowed(rng):
    ports = build_port_grid(8, 8, LAM / 4, LAM)
    angles = build_angular_grid(12, 12)
    dictionary = build_dictionary(ports, angles, storage="dense")
    g = random_beam(rng, angles).values.ravel(order="F")
    selection = select_ports(dictionary, g, 16, ALPHA, LAM / 2)

    D = dictionary.dense()
    forbidden = np.zeros(ports.size, dtype=bool)
    y = np.zeros(angles.Z, dtype=complex)
    e = g.copy()
    for step, w in zip(selection.trace, selection.weights):
        scores = np.abs(D.conj().T @ e) / np.sqrt(angles.Z)
        allowed = ~forbidden
        allowed[list(step.deferred)] = False
        assert scores[step.index] >= scores[allowed].max() - 1e-9
        assert all(scores[j] >= scores[step.index] - 1e-9 for j in step.deferred)

        forbidden[step.index] = True
        forbidden[excluded_neighbors(ports, step.index, LAM / 2)] = True
        y = y + D[:, step.index] * w
        e = g - ALPHA * y / np.linalg.norm(y)


def test_normalization_is_neutral(rng):
    ports = build_port_grid(5, 5, LAM / 4, LAM)
    angles = build_angular_grid(10, 10)
    dictionary = build_dictionary(ports, angles)
    for _ in range(5):
        g = random_beam(rng, angles)
        with_norm = select_ports(dictionary, g, 6, ALPHA, LAM / 2, normalize_columns=True)
        without = select_ports(dictionary, g, 6, ALPHA, LAM / 2, normalize_columns=False)
        assert with_norm.support == without.support


def test_selection_is_deterministic(rng):
    ports = build_port_grid(6, 6, LAM / 4, LAM)
    angles = build_angular_grid(12, 12)
    dictionary = build_dictionary(ports, angles)
    g = random_beam(rng, angles)
    a = select_ports(dictionary, g, 8, ALPHA, LAM / 2)
    b = select_ports(dictionary, g, 8, ALPHA, LAM / 2)
    assert a.support == b.support
    assert a.weights.tobytes() == b.weights.tobytes()


def test_guard_reaches_maximal_packing():
    # 16×16 порта λ/4 при d_min = λ/2: ровно 64 порта, по одному на блок 2×2
    ports = build_port_grid(16, 16, LAM / 4, LAM)
    angles = build_angular_grid(30, 30)
    desired = make_desired_beam(angles, TargetRegion(np.pi / 6, np.pi / 3, 0.0, np.pi / 6), 0.1)
    dictionary = build_dictionary(ports, angles)
    selection = select_ports(dictionary, desired, 64, ALPHA, LAM / 2)

    assert len(selection) == 64
    assert pairwise_min_distance(ports, selection.support) >= LAM / 2
    m, n = ports.index_to_rc(selection.support)
    assert len(set(zip((m // 2).tolist(), (n // 2).tolist()))) == 64


def test_guard_deferral_is_logged(caplog):
    # средний из трех портов исключает оба соседних: с ним S = 2 недостижимо
    ports = build_port_grid(3, 1, LAM / 4, LAM)
    angles = build_angular_grid(8, 8)
    dictionary = build_dictionary(ports, angles)
    g = matricize(dictionary.column(1), angles)

    caplog.set_level(logging.INFO, logger="fluidbeam.port_select")
    selection = select_ports(dictionary, g, 2, ALPHA, LAM / 2)

    assert sorted(selection.support) == [0, 2]
    assert selection.trace[0].deferred == (1,)
    deferrals = [r for r in caplog.records if r.levelno == logging.INFO and "отложено 1 портов" in r.getMessage()]
    assert len(deferrals) == 1


def test_infeasible_spacing_reports_achieved_count(rng):
    ports = build_port_grid(4, 4, LAM / 4, LAM)
    angles = build_angular_grid(8, 8)
    dictionary = build_dictionary(ports, angles)
    with pytest.raises(InfeasibleSpacingError) as info:
        select_ports(dictionary, random_beam(rng, angles), 9, ALPHA, LAM / 2)
    assert info.value.requested == 9
    assert 1 <= info.value.achieved <= 4
    assert info.value.exit_code == 3


def test_zero_beam_is_degenerate(small_ports, small_angles):
    dictionary = build_dictionary(small_ports, small_angles)
    with pytest.raises(DegenerateBeamError):
        select_ports(dictionary, np.zeros(small_angles.Z), 2, ALPHA, 0.0)


def test_least_squares_residual_is_non_increasing(rng):
    ports = build_port_grid(6, 6, LAM / 4, LAM)
    angles = build_angular_grid(12, 12)
    dictionary = build_dictionary(ports, angles)
    selection = select_ports(dictionary, random_beam(rng, angles), 10, ALPHA, 0.0, residual_mode="least-squares")
    norms = [step.residual_norm for step in selection.trace]
    assert np.all(np.diff(norms) <= 1e-9)


def test_parameter_checks(small_ports, small_angles):
    dictionary = build_dictionary(small_ports, small_angles)
    g = np.ones(small_angles.Z)
    with pytest.raises(ParameterError):
        select_ports(dictionary, g, 0, ALPHA, 0.0)
    with pytest.raises(ParameterError):
        select_ports(dictionary, g, 2, ALPHA, -1.0)
    with pytest.raises(ParameterError):
        select_ports(dictionary, g, 2, ALPHA, 0.0, residual_mode="projection")
    other = matricize(np.ones(100), build_angular_grid(10, 10))
    with pytest.raises(ParameterError):
        select_ports(dictionary, other, 2, ALPHA, 0.0)


def test_full_selection_uses_every_port(small_ports, small_angles):
    dictionary = build_dictionary(small_ports, small_angles)
    desired = make_desired_beam(small_angles, TargetRegion.full(), 0.0)
    selection = full_selection(dictionary, desired)
    assert selection.support == list(range(small_ports.size))
    assert selection.weights.shape == (small_ports.size,)
