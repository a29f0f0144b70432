import math

import numpy as np
import pytest

from fiberpinn import (FieldGrid, SolutionSurface, TrainingConfig,
                       derive_secondary_params, eye_diagram, eye_histogram,
                       eye_opening, frame_for, init_mlp, make_frame, make_ook,
                       make_pulse, nrmse, predict_surface,
                       predict_surface_polarized, propagate_gnlse,
                       sample_profile, train, with_params)

T0 = 50e-12
P0 = 1e-3


@pytest.fixture(scope="module")
def pulse_frame(fiber_pulse):
    derived = derive_secondary_params(fiber_pulse)
    return make_frame(fiber_pulse, derived, T0, P0, 100e3, 400e-12)


def test_predict_surface_shape_and_denormalization(pulse_frame):
    model = init_mlp([2, 8, 2], seed=2)
    times = np.linspace(-300e-12, 300e-12, 65)
    distances = [0.0, 25e3, 50e3, 75e3, 100e3]
    surface = predict_surface(model, pulse_frame, distances, times)
    assert surface.fields.shape == (5, 65)
    # denormalization scales network outputs by sqrt(p_ref)
    from fiberpinn import forward
    pts = np.column_stack([np.full(65, 0.25), times / pulse_frame.t_max])
    out = forward(model, pts)
    expected = math.sqrt(P0) * (out[:, 0] + 1j * out[:, 1])
    np.testing.assert_allclose(surface.fields[1], expected, rtol=1e-14)


def test_predict_surface_duplicate_distances(pulse_frame):
    model = init_mlp([2, 8, 2], seed=2)
    times = np.linspace(-1e-10, 1e-10, 33)
    surface = predict_surface(model, pulse_frame, [50e3, 50e3], times)
    np.testing.assert_array_equal(surface.fields[0], surface.fields[1])


def test_predict_surface_rejects_extrapolation(pulse_frame):
    model = init_mlp([2, 8, 2], seed=2)
    times = np.linspace(-1e-10, 1e-10, 17)
    with pytest.raises(ValueError, match="distance"):
        predict_surface(model, pulse_frame, [150e3], times)
    with pytest.raises(ValueError, match="time"):
        predict_surface(model, pulse_frame, [50e3], np.array([5e-10]))


def test_predict_polarized_uses_per_channel_power(pulse_frame):
    model = init_mlp([2, 8, 4], seed=3)
    times = np.linspace(-1e-10, 1e-10, 17)
    sx, sy = predict_surface_polarized(model, pulse_frame, 0.5e-3, 0.125e-3,
                                       [0.0], times)
    from fiberpinn import forward
    pts = np.column_stack([np.zeros(17), times / pulse_frame.t_max])
    out = forward(model, pts)
    np.testing.assert_allclose(sx.fields[0],
                               math.sqrt(0.5e-3) * (out[:, 0] + 1j * out[:, 1]),
                               rtol=1e-14)
    np.testing.assert_allclose(sy.fields[0],
                               math.sqrt(0.125e-3) * (out[:, 2] + 1j * out[:, 3]),
                               rtol=1e-14)


def test_nrmse_identities():
    times = np.linspace(-1e-10, 1e-10, 64)
    rng = np.random.default_rng(0)
    fields = rng.normal(size=(3, 64)) + 1j * rng.normal(size=(3, 64))
    ref = SolutionSurface(distances=np.array([0.0, 1.0, 2.0]), times=times,
                          fields=fields)
    per, agg = nrmse(ref, ref)
    assert np.all(per == 0.0) and agg == 0.0
    doubled = SolutionSurface(distances=ref.distances, times=times,
                              fields=2.0 * fields)
    per, agg = nrmse(doubled, ref)
    np.testing.assert_allclose(per, 1.0, rtol=1e-14)
    # scale awareness: nrmse(a*ref, ref) = |a - 1|
    scaled = SolutionSurface(distances=ref.distances, times=times,
                             fields=1.3 * fields)
    per, _ = nrmse(scaled, ref)
    np.testing.assert_allclose(per, 0.3, rtol=1e-12)


def test_nrmse_constructed_perturbation():
    times = np.linspace(-1e-10, 1e-10, 128)
    rng = np.random.default_rng(1)
    base = rng.normal(size=128) + 1j * rng.normal(size=128)
    noise = rng.normal(size=128) + 1j * rng.normal(size=128)
    noise *= 0.05 * np.linalg.norm(base) / np.linalg.norm(noise)
    ref = SolutionSurface(distances=np.array([0.0]), times=times,
                          fields=base[None, :])
    pred = SolutionSurface(distances=np.array([0.0]), times=times,
                           fields=(base + noise)[None, :])
    per, agg = nrmse(pred, ref)
    assert agg == pytest.approx(0.05, rel=1e-12)


def test_nrmse_zero_reference_rejected():
    times = np.linspace(-1e-10, 1e-10, 64)
    zero = SolutionSurface(distances=np.array([0.0]), times=times,
                           fields=np.zeros((1, 64), complex))
    with pytest.raises(ValueError, match="zero"):
        nrmse(zero, zero)


def test_nrmse_grid_mismatch_rejected():
    times = np.linspace(-1e-10, 1e-10, 64)
    a = SolutionSurface(distances=np.array([0.0]), times=times,
                        fields=np.ones((1, 64), complex))
    b = SolutionSurface(distances=np.array([1.0]), times=times,
                        fields=np.ones((1, 64), complex))
    with pytest.raises(ValueError, match="distances"):
        nrmse(a, b)


def _ideal_nrz_grid(bits, sps=32):
    n = len(bits) * sps
    t_s = 100e-12
    dt = t_s / sps
    times = -n * dt / 2 + dt * np.arange(n)
    values = np.repeat(np.asarray(bits, float), sps).astype(complex)
    return FieldGrid(times=times, values=values), t_s, sps


def test_eye_constant_field():
    grid, t_s, sps = _ideal_nrz_grid([1, 1, 1, 1])
    eye = eye_diagram(grid, t_s, sps)
    assert eye.traces.shape == (3, 2 * sps)
    assert np.all(eye.traces == eye.traces[0])


def test_eye_alternating_pattern_two_shapes():
    grid, t_s, sps = _ideal_nrz_grid([1, 0, 1, 0, 1, 0, 1, 0])
    eye = eye_diagram(grid, t_s, sps)
    unique = {tuple(row) for row in eye.traces}
    assert len(unique) == 2


def test_eye_validation():
    grid, t_s, sps = _ideal_nrz_grid([1, 0], sps=64)  # 2 symbols only
    with pytest.raises(ValueError, match="4 symbols"):
        eye_diagram(grid, t_s, sps)
    grid, t_s, sps = _ideal_nrz_grid([1, 0, 1, 0])
    with pytest.raises(ValueError, match="multiple"):
        eye_diagram(grid, t_s, 48)
    with pytest.raises(ValueError, match="symbol period"):
        eye_diagram(grid, 2 * t_s, sps)


def test_eye_histogram_conserves_counts():
    grid, t_s, sps = _ideal_nrz_grid([1, 0, 0, 1, 1, 0, 1, 0], sps=16)
    eye = eye_diagram(grid, t_s, sps)
    counts, t_edges, p_edges = eye_histogram(eye, power_bins=32)
    assert counts.sum() == eye.traces.size
    assert counts.shape == (2 * sps, 32)


def test_eye_opening_decreases_with_distance(fiber_signal):
    derived = derive_secondary_params(fiber_signal)
    sig = make_ook(10e9, 16, seed=42, p_max=P0)
    n_t = 2048
    grid = sample_profile(sig, sig.span / 2, n_t)
    surface = propagate_gnlse(grid, fiber_signal, derived, 100e3, 256,
                              [0.0, 100e3], enforce_window=False)
    sps = n_t // 16
    eye0 = eye_diagram(surface.snapshot(0), sig.t_s, sps)
    eye1 = eye_diagram(surface.snapshot(1), sig.t_s, sps)
    assert eye_opening(eye1) < eye_opening(eye0)


def test_eye_opening_requires_both_levels():
    grid, t_s, sps = _ideal_nrz_grid([1, 1, 1, 1])
    eye = eye_diagram(grid, t_s, sps)
    with pytest.raises(ValueError, match="levels"):
        eye_opening(eye)


def test_trained_model_answers_unseen_distances(fiber_pulse):
    # queries between training snapshots work without retraining; the j1
    # bound ties the zeta = 0 answer to the launch profile
    cfg = TrainingConfig(task="pulse", fiber=fiber_pulse,
                         launch=make_pulse("gaussian", T0, P0), l_max=100e3,
                         n_ini=64, n_p=600, hidden=(24, 24), seed=11,
                         adam_steps=250, adam_lr=3e-3, lbfgs_max_iter=60)
    result = train(cfg)
    frame = result.frame
    times = np.linspace(-0.9, 0.9, 257) * frame.t_max
    surface = predict_surface(result.model, frame, [0.0, 13.7e3, 61.3e3], times)
    assert np.all(np.isfinite(surface.fields))
    launch = cfg.launch.envelope(times)
    j1 = result.record.rows[-1].j1
    rms = np.sqrt(np.mean(np.abs(surface.fields[0] - launch) ** 2) / P0)
    assert rms < 10.0 * math.sqrt(j1) + 1e-3
