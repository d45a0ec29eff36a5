"""Веса по замкнутой формуле, 2-D ДПФ и восстановление фазы"""

import time

import numpy as np
import pytest

from fluidbeam.beam_spec import BeamPattern, TargetRegion, make_desired_beam
from fluidbeam.errors import ParameterError
from fluidbeam.fourier import (
    WeightVector,
    aperture_mask,
    dft2_forward,
    dft2_inverse,
    phase_retrieve,
    phase_retrieve_on_array,
    weights_from_beam,
)
from fluidbeam.geometry import build_angular_grid, build_port_grid
from fluidbeam.port_select import Selection
from fluidbeam.steering import VMode, build_dictionary, steering_entry, synthesize_beam

LAM = 0.01
REFERENCE_REGION = TargetRegion(np.pi / 6, np.pi / 3, 0.0, np.pi / 6)


def impulse(grid, p, q):
    values = np.zeros(grid.shape, dtype=complex)
    values[p, q] = 1.0
    return BeamPattern(grid, values)


def test_impulse_weights_are_conjugate_steering():
    grid = build_angular_grid(9, 9)
    ports = build_port_grid(3, 3, LAM / 4, LAM)
    w = weights_from_beam(impulse(grid, 6, 2), ports.positions, LAM, VMode.COUPLED)
    angle = (grid.phi[6], grid.theta[2])
    expected = [np.conj(steering_entry(pos, angle, LAM, VMode.COUPLED)) for pos in ports.positions]
    np.testing.assert_allclose(w.values, expected, rtol=1e-12)


def test_zero_beam_gives_zero_weights():
    grid = build_angular_grid(5, 5)
    ports = build_port_grid(2, 2, LAM / 4, LAM)
    w = weights_from_beam(BeamPattern.zeros(grid), ports.positions, LAM)
    assert not w.values.any()


def test_weights_match_double_sum(rng):
    grid = build_angular_grid(8, 8)
    values = rng.normal(size=grid.shape) + 1j * rng.normal(size=grid.shape)
    positions = rng.uniform(-LAM, LAM, size=(3, 2))
    for mode in VMode:
        w = weights_from_beam(BeamPattern(grid, values), positions, LAM, mode)
        expected = np.zeros(3, dtype=complex)
        for i, (x, y) in enumerate(positions):
            for p in range(grid.P):
                for q in range(grid.Q):
                    phi, theta = grid.phi[p], grid.theta[q]
                    u = np.sin(theta) * np.cos(phi)
                    v = np.sin(theta) * np.sin(phi) if mode is VMode.COUPLED else np.sin(phi)
                    expected[i] += values[p, q] * np.exp(2j * np.pi / LAM * (u * x + v * y))
        np.testing.assert_allclose(w.values, expected, rtol=1e-10)


def test_impulse_round_trip_peaks_at_impulse(rng):
    grid = build_angular_grid(24, 24)
    ports = build_port_grid(16, 16, LAM / 2, LAM)
    dictionary = build_dictionary(ports, grid, VMode.DECOUPLED)
    support = list(range(ports.size))
    for _ in range(20):
        # края φ = ±π/2 исключены: там все θ дают одно и то же (u, v)
        p, q = int(rng.integers(1, 23)), int(rng.integers(0, 24))
        w = weights_from_beam(impulse(grid, p, q), ports.positions, LAM, VMode.DECOUPLED)
        y = synthesize_beam(dictionary, Selection(support, w.values))
        assert np.unravel_index(np.argmax(y.magnitude), grid.shape) == (p, q)


def test_dft_examples():
    np.testing.assert_allclose(dft2_forward(np.ones((2, 2))), [[4, 0], [0, 0]])
    unit = np.zeros((3, 4))
    unit[0, 0] = 1.0
    np.testing.assert_allclose(dft2_forward(unit), np.ones((3, 4)))


def test_dft_inverse_pair(rng):
    X = rng.normal(size=(16, 16)) + 1j * rng.normal(size=(16, 16))
    np.testing.assert_allclose(dft2_inverse(dft2_forward(X)), X, atol=1e-10)


def test_real_input_gives_conjugate_symmetric_inverse(rng):
    G = rng.normal(size=(6, 5))
    W = dft2_inverse(G)
    mirrored = np.roll(W[::-1, ::-1], shift=(1, 1), axis=(0, 1))
    np.testing.assert_allclose(W, np.conj(mirrored), atol=1e-12)


def test_aperture_mask_center_and_corner():
    center = np.fft.fftshift(aperture_mask((8, 8), 4, "center"))
    assert center[2:6, 2:6].all() and center.sum() == 16
    corner = aperture_mask((8, 8), 4, "corner")
    assert corner[:4, :4].all() and corner.sum() == 16
    with pytest.raises(ParameterError):
        aperture_mask((8, 8), 4, "middle")


def test_zero_iterations_returns_input():
    grid = build_angular_grid(20, 20)
    beam = make_desired_beam(grid, REFERENCE_REGION, 0.1)
    assert phase_retrieve(beam, 16, 0).values.tobytes() == beam.values.tobytes()


def test_realizable_beam_is_fixed_point(rng):
    grid = build_angular_grid(180, 180)
    mask = aperture_mask(grid.shape, 16, "center")
    W = np.zeros(grid.shape, dtype=complex)
    W[mask] = rng.normal(size=256) + 1j * rng.normal(size=256)
    G0 = dft2_forward(W)

    G1 = phase_retrieve(BeamPattern(grid, G0), 256, 1)
    assert np.max(np.abs(np.angle(G1.values * np.conj(G0)))) < 1e-9


def test_residual_is_non_increasing_at_reference():
    grid = build_angular_grid(180, 180)
    beam = make_desired_beam(grid, REFERENCE_REGION, 0.1)
    started = time.perf_counter()
    refined, history = phase_retrieve(beam, 256, 50, return_history=True)
    elapsed = time.perf_counter() - started

    assert len(history) == 51
    assert np.all(np.diff(history) <= 1e-9)
    assert history[-1] <= history[0]
    np.testing.assert_allclose(refined.magnitude, beam.magnitude, atol=1e-12)
    assert elapsed < 10.0


def test_early_stop_shortens_history():
    grid = build_angular_grid(40, 40)
    beam = make_desired_beam(grid, REFERENCE_REGION, 0.1)
    _, full = phase_retrieve(beam, 64, 200, return_history=True)
    _, stopped = phase_retrieve(beam, 64, 200, early_stop=True, tolerance=1e-3, return_history=True)
    assert len(stopped) < len(full)


def test_array_retrieval_zero_iterations_returns_input(small_ports):
    grid = build_angular_grid(20, 20)
    beam = make_desired_beam(grid, REFERENCE_REGION, 0.1)
    dictionary = build_dictionary(small_ports, grid)
    assert phase_retrieve_on_array(beam, dictionary, 0).values.tobytes() == beam.values.tobytes()


def test_array_retrieval_single_port_phase_is_flat():
    # один порт в начале координат: D = 1, луч апертуры - константа
    grid = build_angular_grid(24, 24)
    beam = make_desired_beam(grid, REFERENCE_REGION, 0.3)
    dictionary = build_dictionary(build_port_grid(1, 1, LAM / 4, LAM), grid)
    once = phase_retrieve_on_array(beam, dictionary, 1)

    inside = beam.magnitude > 0
    np.testing.assert_allclose(once.magnitude, beam.magnitude, atol=1e-12)
    relative = np.angle(once.values[inside] * np.conj(once.values[inside][0]))
    assert np.max(np.abs(relative)) < 1e-12

    twice = phase_retrieve_on_array(once, dictionary, 1)
    np.testing.assert_allclose(twice.values, once.values, atol=1e-12)


def test_array_retrieval_history_and_storage(small_ports):
    grid = build_angular_grid(24, 24)
    beam = make_desired_beam(grid, REFERENCE_REGION, 0.1)
    dense = build_dictionary(small_ports, grid, storage="dense")
    factored = build_dictionary(small_ports, grid, storage="factored")

    a, history = phase_retrieve_on_array(beam, dense, 6, return_history=True)
    b = phase_retrieve_on_array(beam, factored, 6)
    assert len(history) == 7
    np.testing.assert_allclose(a.magnitude, beam.magnitude, atol=1e-12)
    np.testing.assert_allclose(a.values, b.values, atol=1e-9)


def test_array_retrieval_rejects_bad_input(small_ports):
    beam = make_desired_beam(build_angular_grid(20, 20), REFERENCE_REGION, 0.1)
    with pytest.raises(ParameterError):
        phase_retrieve_on_array(beam, build_dictionary(small_ports, build_angular_grid(8, 8)), 1)
    with pytest.raises(ParameterError):
        phase_retrieve_on_array(beam, build_dictionary(small_ports, beam.grid), -1)


@pytest.mark.parametrize("active", [15, 0, 441])
def test_invalid_aperture_sizes(active):
    grid = build_angular_grid(20, 20)
    beam = make_desired_beam(grid, REFERENCE_REGION, 0.1)
    with pytest.raises(ParameterError):
        phase_retrieve(beam, active, 1)


def test_weight_vector_support_checks():
    with pytest.raises(ParameterError):
        WeightVector(np.ones(2), support=np.array([1, 1]))
    with pytest.raises(ParameterError):
        WeightVector(np.ones(2), support=np.array([1]))


def test_vmode_discrimination_along_zero_elevation():
    grid = build_angular_grid(37, 37)
    zero_theta = int(np.argmin(np.abs(grid.theta)))
    ports = build_port_grid(8, 8, LAM / 2, LAM)
    region = TargetRegion(-np.pi / 9, np.pi / 9, -np.pi / 18, np.pi / 18)
    desired = make_desired_beam(grid, region, 0.0)
    support = list(range(ports.size))

    lines = {}
    for mode in VMode:
        dictionary = build_dictionary(ports, grid, mode)
        w = weights_from_beam(desired, ports.positions, LAM, mode)
        y = synthesize_beam(dictionary, Selection(support, w.values))
        lines[mode] = y.magnitude[:, zero_theta] / y.magnitude.max()

    decoupled, coupled = lines[VMode.DECOUPLED], lines[VMode.COUPLED]
    assert decoupled.max() - decoupled.min() > 0.5
    assert coupled.max() - coupled.min() < 1e-9
