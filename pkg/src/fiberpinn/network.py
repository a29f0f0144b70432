"""Fully-connected tanh network with exact derivatives.

The network maps (zeta, t) -> out_dim real outputs.  Besides plain forward
evaluation it produces, at machine precision, the partial derivatives of
every output with respect to t up to third order and with respect to zeta to
first order (a "jet"), plus reverse-mode gradients of any scalar loss built
from those quantities with respect to all weights and biases.

Derivatives in the inputs propagate forward through each layer.  The affine
part is linear, so every derivative channel is mapped by the same weight
matrix; the tanh activation composes through Faa di Bruno's formula.  With
y = tanh(a) and sk the k-th derivative of tanh evaluated via

    s1 = 1 - y^2,  s2 = -2 y s1,  s3 = -2 s1^2 - 2 y s2,  s4 = -6 s1 s2 - 2 y s3

a first/second/third t-derivative a1/a2/a3 of the pre-activation turns into

    y1 = s1 a1
    y2 = s2 a1^2 + s1 a2
    y3 = s3 a1^3 + 3 s2 a1 a2 + s1 a3

and the zeta channel is first-order only: y4 = s1 a4.  The reverse pass
differentiates these recursions exactly, which is what makes parameter
gradients of derivative-bearing losses exact rather than approximate.

Parameter vector layout (used by every flatten/unflatten and checkpoint):
for each layer l in order, W_l raveled row-major with shape (fan_in,
fan_out), followed by b_l.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

try:
    from numba import njit as _njit
except ImportError:  # pragma: no cover - exercised via the fallback kernels
    _njit = None

_CHANNELS = 5  # value, d/dt, d2/dt2, d3/dt3, d/dzeta


@dataclass(frozen=True)
class MlpModel:
    """Immutable MLP: tanh hidden layers, identity output layer."""

    widths: tuple[int, ...]
    weights: tuple[np.ndarray, ...]  # (fan_in, fan_out) each
    biases: tuple[np.ndarray, ...]   # (fan_out,) each

    def __post_init__(self):
        if len(self.widths) < 2:
            raise ValueError("need at least input and output layers")
        if self.widths[0] != 2:
            raise ValueError("input dimension must be 2 (zeta, t)")
        if len(self.weights) != len(self.widths) - 1 or len(self.biases) != len(self.weights):
            raise ValueError("layer count mismatch")
        for l, (w, b) in enumerate(zip(self.weights, self.biases)):
            if w.shape != (self.widths[l], self.widths[l + 1]) or b.shape != (self.widths[l + 1],):
                raise ValueError(f"layer {l} shape mismatch")
            if not (np.all(np.isfinite(w)) and np.all(np.isfinite(b))):
                raise ValueError(f"layer {l} has non-finite parameters")

    @property
    def out_dim(self) -> int:
        return self.widths[-1]

    @property
    def n_params(self) -> int:
        return sum(w.size + b.size for w, b in zip(self.weights, self.biases))


@dataclass(frozen=True)
class Jet3:
    """Per-point derivative bundle; each array has shape (n_points, out_dim).

    Also serves as the cotangent container for jet_forward_vjp.
    """

    value: np.ndarray
    d_t: np.ndarray
    d_tt: np.ndarray
    d_ttt: np.ndarray
    d_zeta: np.ndarray

    def stack(self) -> np.ndarray:
        return np.stack([self.value, self.d_t, self.d_tt, self.d_ttt, self.d_zeta])

    @classmethod
    def zeros(cls, n: int, out_dim: int) -> "Jet3":
        z = lambda: np.zeros((n, out_dim))
        return cls(z(), z(), z(), z(), z())


def init_mlp(widths, seed: int) -> MlpModel:
    """Glorot-uniform weights, zero biases, deterministic per seed."""
    widths = tuple(int(w) for w in widths)
    rng = np.random.default_rng(seed)
    weights, biases = [], []
    for fan_in, fan_out in zip(widths[:-1], widths[1:]):
        limit = np.sqrt(6.0 / (fan_in + fan_out))
        weights.append(rng.uniform(-limit, limit, size=(fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
    return MlpModel(widths=widths, weights=tuple(weights), biases=tuple(biases))


def flatten_params(model: MlpModel) -> np.ndarray:
    parts = []
    for w, b in zip(model.weights, model.biases):
        parts.append(w.ravel())
        parts.append(b)
    return np.concatenate(parts)


def with_params(model: MlpModel, flat: np.ndarray) -> MlpModel:
    """Return a copy of `model` with parameters taken from `flat`."""
    flat = np.asarray(flat, dtype=float)
    if flat.size != model.n_params:
        raise ValueError(f"expected {model.n_params} parameters, got {flat.size}")
    weights, biases, k = [], [], 0
    for w, b in zip(model.weights, model.biases):
        weights.append(flat[k : k + w.size].reshape(w.shape).copy())
        k += w.size
        biases.append(flat[k : k + b.size].copy())
        k += b.size
    return MlpModel(widths=model.widths, weights=tuple(weights), biases=tuple(biases))


def _as_points(points) -> np.ndarray:
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise ValueError("points must have shape (n, 2) with columns (zeta, t)")
    return pts


def forward(model: MlpModel, points) -> np.ndarray:
    """Evaluate the network; returns (n_points, out_dim)."""
    h = _as_points(points)
    last = len(model.weights) - 1
    for l, (w, b) in enumerate(zip(model.weights, model.biases)):
        h = h @ w + b
        if l != last:
            h = np.tanh(h)
    return h


def forward_vjp(model: MlpModel, points):
    """Forward pass plus a pullback for value-only losses.

    Returns (outputs, vjp) where vjp(cot_outputs) gives the flat parameter
    gradient of sum(cot * outputs).
    """
    pts = _as_points(points)
    last = len(model.weights) - 1
    inputs = []   # layer inputs
    acts = []     # tanh outputs per hidden layer
    h = pts
    for l, (w, b) in enumerate(zip(model.weights, model.biases)):
        inputs.append(h)
        h = h @ w + b
        if l != last:
            h = np.tanh(h)
            acts.append(h)
    outputs = h

    def vjp(cot: np.ndarray) -> np.ndarray:
        grads_w = [None] * len(model.weights)
        grads_b = [None] * len(model.biases)
        bar = np.asarray(cot, dtype=float)
        for l in range(last, -1, -1):
            if l != last:
                bar = bar * (1.0 - acts[l] ** 2)
            grads_w[l] = inputs[l].T @ bar
            grads_b[l] = bar.sum(axis=0)
            if l > 0:
                bar = bar @ model.weights[l].T
        parts = []
        for gw, gb in zip(grads_w, grads_b):
            parts.append(gw.ravel())
            parts.append(gb)
        return np.concatenate(parts)

    return outputs, vjp


def _seed_jets(pts: np.ndarray) -> np.ndarray:
    n = pts.shape[0]
    H = np.zeros((_CHANNELS, n, 2))
    H[0] = pts
    H[1, :, 1] = 1.0  # d t / d t
    H[4, :, 0] = 1.0  # d zeta / d zeta
    return H


def _affine_channels(H: np.ndarray, w: np.ndarray, b: np.ndarray) -> np.ndarray:
    # the value channel goes through its own GEMM of the same shape the plain
    # forward pass uses, so jet values match forward() bit for bit; the four
    # tangent channels share one stacked GEMM
    c, n, fin = H.shape
    fout = w.shape[1]
    A = np.empty((c, n, fout))
    np.matmul(H[0], w, out=A[0])
    A[0] += b
    np.matmul(H[1:].reshape((c - 1) * n, fin), w,
              out=A[1:].reshape((c - 1) * n, fout))
    return A


def _act_forward_ref(A: np.ndarray, y_in: np.ndarray, Y: np.ndarray,
                     S: np.ndarray) -> None:
    """Vectorized reference for the tanh jet recursion (fallback path)."""
    y, s1, s2, s3 = S
    y[:] = y_in
    s1[:] = 1.0 - y * y
    s2[:] = -2.0 * y * s1
    s3[:] = -2.0 * s1 * s1 - 2.0 * y * s2
    a1, a2, a3, a4 = A[1], A[2], A[3], A[4]
    Y[0] = y
    Y[1] = s1 * a1
    Y[2] = s2 * a1 * a1 + s1 * a2
    Y[3] = s3 * a1**3 + 3.0 * s2 * a1 * a2 + s1 * a3
    Y[4] = s1 * a4


def _act_backward_ref(bar: np.ndarray, A: np.ndarray, S: np.ndarray,
                      nbar: np.ndarray) -> None:
    """Exact adjoint of _act_forward_ref (fallback path)."""
    y, s1, s2, s3 = S
    s4 = -6.0 * s1 * s2 - 2.0 * y * s3
    a1, a2, a3, a4 = A[1], A[2], A[3], A[4]
    nbar[0] = (bar[0] * s1 + bar[1] * s2 * a1
               + bar[2] * (s3 * a1 * a1 + s2 * a2)
               + bar[3] * (s4 * a1**3 + 3.0 * s3 * a1 * a2 + s2 * a3)
               + bar[4] * s2 * a4)
    nbar[1] = (bar[1] * s1 + 2.0 * bar[2] * s2 * a1
               + 3.0 * bar[3] * (s3 * a1 * a1 + s2 * a2))
    nbar[2] = bar[2] * s1 + 3.0 * bar[3] * s2 * a1
    nbar[3] = bar[3] * s1
    nbar[4] = bar[4] * s1


def _act_forward_loops(A, y_in, Y, S):  # compiled below when numba is present
    n, width = A.shape[1], A.shape[2]
    for i in range(n):
        for j in range(width):
            y = y_in[i, j]
            s1 = 1.0 - y * y
            s2 = -2.0 * y * s1
            s3 = -2.0 * s1 * s1 - 2.0 * y * s2
            a1 = A[1, i, j]
            a2 = A[2, i, j]
            a3 = A[3, i, j]
            a4 = A[4, i, j]
            Y[0, i, j] = y
            Y[1, i, j] = s1 * a1
            Y[2, i, j] = s2 * a1 * a1 + s1 * a2
            Y[3, i, j] = s3 * a1 * a1 * a1 + 3.0 * s2 * a1 * a2 + s1 * a3
            Y[4, i, j] = s1 * a4
            S[0, i, j] = y
            S[1, i, j] = s1
            S[2, i, j] = s2
            S[3, i, j] = s3


def _act_backward_loops(bar, A, S, nbar):
    n, width = A.shape[1], A.shape[2]
    for i in range(n):
        for j in range(width):
            y = S[0, i, j]
            s1 = S[1, i, j]
            s2 = S[2, i, j]
            s3 = S[3, i, j]
            s4 = -6.0 * s1 * s2 - 2.0 * y * s3
            a1 = A[1, i, j]
            a2 = A[2, i, j]
            a3 = A[3, i, j]
            a4 = A[4, i, j]
            b0 = bar[0, i, j]
            b1 = bar[1, i, j]
            b2 = bar[2, i, j]
            b3 = bar[3, i, j]
            b4 = bar[4, i, j]
            nbar[0, i, j] = (b0 * s1 + b1 * s2 * a1
                             + b2 * (s3 * a1 * a1 + s2 * a2)
                             + b3 * (s4 * a1 * a1 * a1 + 3.0 * s3 * a1 * a2
                                     + s2 * a3)
                             + b4 * s2 * a4)
            nbar[1, i, j] = (b1 * s1 + 2.0 * b2 * s2 * a1
                             + 3.0 * b3 * (s3 * a1 * a1 + s2 * a2))
            nbar[2, i, j] = b2 * s1 + 3.0 * b3 * s2 * a1
            nbar[3, i, j] = b3 * s1
            nbar[4, i, j] = b4 * s1


if _njit is not None:
    # fastmath stays off: bitwise agreement with the reference kernels keeps
    # gradients identical whichever path runs
    _act_forward_kernel = _njit(cache=True, fastmath=False)(_act_forward_loops)
    _act_backward_kernel = _njit(cache=True, fastmath=False)(_act_backward_loops)
else:
    _act_forward_kernel = _act_forward_ref
    _act_backward_kernel = _act_backward_ref


def _tanh_jet(A: np.ndarray):
    """Jet of tanh applied to the pre-activation jet A.

    The activation value itself comes from np.tanh so it agrees bitwise with
    the plain forward pass.  Returns (Y, S) where S stacks (tanh, and its
    first three derivatives), which the backward pass reuses.
    """
    y = np.tanh(A[0])
    Y = np.empty_like(A)
    S = np.empty((4,) + A.shape[1:])
    _act_forward_kernel(A, y, Y, S)
    return Y, S


def _tanh_jet_back(bar: np.ndarray, A: np.ndarray, S: np.ndarray) -> np.ndarray:
    nbar = np.empty_like(bar)
    _act_backward_kernel(bar, A, S, nbar)
    return nbar


def jet_forward(model: MlpModel, points) -> Jet3:
    """Network outputs together with exact t- and zeta-derivatives."""
    H = _seed_jets(_as_points(points))
    last = len(model.weights) - 1
    for l, (w, b) in enumerate(zip(model.weights, model.biases)):
        A = _affine_channels(H, w, b)
        H = A if l == last else _tanh_jet(A)[0]
    return Jet3(value=H[0], d_t=H[1], d_tt=H[2], d_ttt=H[3], d_zeta=H[4])


def jet_forward_vjp(model: MlpModel, points):
    """Jet evaluation plus a pullback onto the parameters.

    Returns (jets, vjp).  vjp(cot) takes a Jet3 of cotangents (one array per
    jet entry, shaped like the jet itself) and returns the flat parameter
    gradient of sum over entries of cot * entry.
    """
    H = _seed_jets(_as_points(points))
    n = H.shape[1]
    last = len(model.weights) - 1
    layer_in = []   # jet input of each layer
    pre = []        # pre-activation jets of hidden layers
    caches = []     # (tanh, derivatives) stacks per hidden layer
    for l, (w, b) in enumerate(zip(model.weights, model.biases)):
        layer_in.append(H)
        A = _affine_channels(H, w, b)
        if l == last:
            H = A
        else:
            H, cache = _tanh_jet(A)
            pre.append(A)
            caches.append(cache)
    jets = Jet3(value=H[0], d_t=H[1], d_tt=H[2], d_ttt=H[3], d_zeta=H[4])

    def vjp(cot: Jet3) -> np.ndarray:
        grads_w = [None] * len(model.weights)
        grads_b = [None] * len(model.biases)
        bar = cot.stack()
        for l in range(last, -1, -1):
            if l != last:
                bar = _tanh_jet_back(bar, pre[l], caches[l])
            Hin = layer_in[l]
            c, _, fin = Hin.shape
            fout = bar.shape[2]
            grads_w[l] = Hin.reshape(c * n, fin).T @ bar.reshape(c * n, fout)
            grads_b[l] = bar[0].sum(axis=0)
            if l > 0:
                prev = np.empty((c, n, fin))
                np.matmul(bar.reshape(c * n, fout), model.weights[l].T,
                          out=prev.reshape(c * n, fin))
                bar = prev
        parts = []
        for gw, gb in zip(grads_w, grads_b):
            parts.append(gw.ravel())
            parts.append(gb)
        return np.concatenate(parts)

    return jets, vjp
