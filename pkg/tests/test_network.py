import numpy as np
import pytest

from fiberpinn import (Jet3, flatten_params, forward, forward_vjp, init_mlp,
                       jet_forward, jet_forward_vjp, with_params)
from fiberpinn.network import (MlpModel, _act_backward_ref, _act_forward_ref,
                               _tanh_jet, _tanh_jet_back)

from oracles import fd_derivative, fd_gradient, mlp_forward_extended, rel_err


def test_init_param_count():
    model = init_mlp([2, 100, 2], seed=0)
    assert model.n_params == 2 * 100 + 100 + 100 * 2 + 2  # 502
    assert flatten_params(model).size == 502


def test_init_deterministic_and_seed_sensitive():
    a = init_mlp([2, 16, 16, 2], seed=5)
    b = init_mlp([2, 16, 16, 2], seed=5)
    c = init_mlp([2, 16, 16, 2], seed=6)
    assert np.array_equal(flatten_params(a), flatten_params(b))
    assert not np.array_equal(flatten_params(a), flatten_params(c))


def test_init_glorot_bounds_and_zero_biases():
    model = init_mlp([2, 16, 2], seed=1)
    for w, fan in zip(model.weights, [(2, 16), (16, 2)]):
        limit = np.sqrt(6.0 / sum(fan))
        assert np.all(np.abs(w) <= limit)
    for b in model.biases:
        assert np.all(b == 0.0)


def test_model_validation():
    with pytest.raises(ValueError):
        init_mlp([3, 16, 2], seed=0)  # in_dim must be 2
    good = init_mlp([2, 4, 2], seed=0)
    with pytest.raises(ValueError):
        MlpModel(widths=good.widths, weights=good.weights[:1], biases=good.biases)
    bad_w = (good.weights[0] * np.nan, good.weights[1])
    with pytest.raises(ValueError):
        MlpModel(widths=good.widths, weights=bad_w, biases=good.biases)


def test_flatten_round_trip():
    model = init_mlp([2, 7, 5, 4], seed=3)
    flat = flatten_params(model)
    again = flatten_params(with_params(model, flat))
    assert np.array_equal(flat, again)
    shifted = with_params(model, flat + 1.0)
    assert np.array_equal(flatten_params(shifted), flat + 1.0)


def test_forward_zero_params():
    model = init_mlp([2, 8, 8, 2], seed=0)
    zeroed = with_params(model, np.zeros(model.n_params))
    pts = np.random.default_rng(0).normal(size=(9, 2))
    assert np.all(forward(zeroed, pts) == 0.0)


def test_forward_single_affine_layer():
    model = init_mlp([2, 2], seed=1)
    pts = np.array([[0.3, -0.7], [1.0, 0.5]])
    np.testing.assert_allclose(forward(model, pts),
                               pts @ model.weights[0] + model.biases[0],
                               rtol=1e-15)


def test_forward_batching_purity():
    # BLAS picks different kernels by row count, so single-row and batched
    # evaluations agree to rounding rather than bit for bit
    model = init_mlp([2, 16, 16, 2], seed=2)
    pts = np.random.default_rng(1).normal(size=(3, 2))
    batched = forward(model, pts)
    singles = np.vstack([forward(model, pts[i:i + 1]) for i in range(3)])
    np.testing.assert_allclose(batched, singles, rtol=1e-13, atol=1e-15)
    # repeated identical calls are bit-identical
    np.testing.assert_array_equal(batched, forward(model, pts))


def test_jet_value_matches_forward_bitwise():
    model = init_mlp([2, 16, 16, 2], seed=2)
    pts = np.random.default_rng(3).uniform(-1, 1, size=(17, 2))
    np.testing.assert_array_equal(jet_forward(model, pts).value,
                                  forward(model, pts))


def test_jet_zero_params():
    model = init_mlp([2, 8, 2], seed=0)
    zeroed = with_params(model, np.zeros(model.n_params))
    jets = jet_forward(zeroed, np.random.default_rng(0).normal(size=(5, 2)))
    for name in ("value", "d_t", "d_tt", "d_ttt", "d_zeta"):
        assert np.all(getattr(jets, name) == 0.0)


def test_jet_single_affine_layer():
    model = init_mlp([2, 2], seed=4)
    pts = np.array([[0.2, 0.4], [-0.1, 0.9]])
    jets = jet_forward(model, pts)
    W = model.weights[0]
    np.testing.assert_allclose(jets.d_t, np.tile(W[1], (2, 1)), rtol=1e-15)
    np.testing.assert_allclose(jets.d_zeta, np.tile(W[0], (2, 1)), rtol=1e-15)
    assert np.all(jets.d_tt == 0.0)
    assert np.all(jets.d_ttt == 0.0)


def test_numba_kernels_match_reference():
    rng = np.random.default_rng(7)
    A = rng.normal(size=(5, 23, 11))
    bar = rng.normal(size=(5, 23, 11))
    Y, S = _tanh_jet(A)
    y = np.tanh(A[0])
    Y_ref = np.empty_like(A)
    S_ref = np.empty((4, 23, 11))
    _act_forward_ref(A, y, Y_ref, S_ref)
    np.testing.assert_allclose(Y, Y_ref, rtol=0, atol=1e-13)
    np.testing.assert_allclose(S, S_ref, rtol=0, atol=1e-13)
    nbar = _tanh_jet_back(bar, A, S)
    nbar_ref = np.empty_like(bar)
    _act_backward_ref(bar, A, S_ref, nbar_ref)
    np.testing.assert_allclose(nbar, nbar_ref, rtol=0, atol=1e-13)


def test_jets_match_finite_differences():
    # the stencils run on an independent extended-precision forward so that
    # third-order differencing is not drowned by float64 roundoff
    rng = np.random.default_rng(11)
    model = init_mlp([2, 16, 16, 2], seed=21)
    pts = rng.uniform(-0.8, 0.8, size=(100, 2))
    jets = jet_forward(model, pts)
    checks = {"d_t": (1, 1, 1e-4), "d_tt": (2, 1, 1e-4),
              "d_ttt": (3, 1, 1e-3), "d_zeta": (1, 0, 1e-4)}
    for name, (order, axis, h) in checks.items():
        got = getattr(jets, name)
        for i in range(0, 100, 7):
            for ch in range(2):
                def f(x, i=i, ch=ch, axis=axis):
                    q = pts[i].astype(np.longdouble)
                    q[axis] = x
                    return mlp_forward_extended(model, q[None, :])[0, ch]
                exact = float(fd_derivative(f, pts[i, axis], order, h))
                assert rel_err(got[i, ch], exact) < 1e-5


def test_four_output_jets_match_finite_differences():
    rng = np.random.default_rng(13)
    model = init_mlp([2, 12, 12, 4], seed=31)
    pts = rng.uniform(-0.8, 0.8, size=(20, 2))
    jets = jet_forward(model, pts)
    for i in (0, 7, 19):
        for ch in range(4):
            def f(x, i=i, ch=ch):
                q = pts[i].astype(np.longdouble)
                q[1] = x
                return mlp_forward_extended(model, q[None, :])[0, ch]
            exact = float(fd_derivative(f, pts[i, 1], 3, 1e-3))
            assert rel_err(jets.d_ttt[i, ch], exact) < 1e-5


def test_forward_vjp_matches_fd():
    model = init_mlp([2, 10, 8, 2], seed=9)
    pts = np.random.default_rng(2).uniform(-1, 1, size=(12, 2))
    cot = np.random.default_rng(3).normal(size=(12, 2))
    outputs, vjp = forward_vjp(model, pts)
    np.testing.assert_array_equal(outputs, forward(model, pts))
    grad = vjp(cot)

    def scalar(params):
        return float(np.sum(cot * forward(with_params(model, params), pts)))

    fd = fd_gradient(scalar, flatten_params(model), h=1e-6)
    assert rel_err(grad, fd, floor=1e-9) < 1e-5


def test_jet_vjp_matches_fd_through_derivatives():
    model = init_mlp([2, 10, 8, 2], seed=12)
    pts = np.random.default_rng(4).uniform(-0.9, 0.9, size=(15, 2))
    rng = np.random.default_rng(5)
    cot = Jet3(value=rng.normal(size=(15, 2)), d_t=rng.normal(size=(15, 2)),
               d_tt=rng.normal(size=(15, 2)), d_ttt=rng.normal(size=(15, 2)),
               d_zeta=rng.normal(size=(15, 2)))
    jets, vjp = jet_forward_vjp(model, pts)
    grad = vjp(cot)

    def scalar(params):
        j = jet_forward(with_params(model, params), pts)
        return float(sum(np.sum(getattr(cot, k) * getattr(j, k))
                         for k in ("value", "d_t", "d_tt", "d_ttt", "d_zeta")))

    fd = fd_gradient(scalar, flatten_params(model), h=1e-6)
    assert rel_err(grad, fd, floor=1e-9) < 1e-5


def test_zero_cotangent_gives_zero_gradient():
    model = init_mlp([2, 6, 2], seed=0)
    pts = np.random.default_rng(1).normal(size=(4, 2))
    jets, vjp = jet_forward_vjp(model, pts)
    assert np.all(vjp(Jet3.zeros(4, 2)) == 0.0)
