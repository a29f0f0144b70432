"""Composite training loss: initial-condition mismatch plus PDE residual.

All losses live on the normalized domain zeta in [0,1], t in [-1,1].  The
network's real output channels are paired into complex fields (channel 0 +
i*channel 1, and for birefringent tasks channel 2 + i*channel 3), and the
residuals are polynomial in the jet entries, so their derivatives with
respect to every jet entry are written in closed form (Wirtinger calculus)
and pushed through the network's jet pullback.  That keeps parameter
gradients exact without differentiating through a composed |U|^2 network.

Scalar residual (shared by pulse and signal frames):

    R = i e U_z + i c2 U + c3 U_tt + i c4 U_ttt + c5 |U|^2 U
        + i c6 (|U|^2 U)_t + c7 U (|U|^2)_t

with e = evolution, c2 = k1*attenuation, c3 = k1*gvd/k2^2, c4 = k1*tod/k2^3,
c5 = k1*kerr, c6 = k1*steepening/k2, c7 = k1*raman/k2.

Birefringent residual pair (signs consistent with the split-step engine's
field convention, so that the residual of a converged reference solution
vanishes):

    Rx = e Ux_z + c2 Ux + c3 Ux_t - i c4g Ux_tt
         - i c5k (p0x |Ux|^2 + (2/3) p0y |Uy|^2) Ux
    Ry = same with -c3 Uy_t and the powers swapped

with c3 = k1*walkoff/k2, c4g = k1*gvd/k2^2, c5k = k1*kerr.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .network import Jet3, MlpModel, forward, forward_vjp, jet_forward, jet_forward_vjp
from .params import ManakovCoeffs, NlseCoeffs, NormalizationFrame


class DivergenceError(RuntimeError):
    """Loss or gradient evaluation produced non-finite values."""


@dataclass(frozen=True)
class CollocationSet:
    """Sampled training points on the normalized domain.

    initial_t        (n_ini,) t-coordinates of the zeta = 0 line
    initial_targets  complex targets there: (n_ini,) for scalar tasks,
                     (n_ini, 2) with columns (x, y) for birefringent tasks
    residual_points  (n_p, 2) columns (zeta, t) inside [0,1] x [-1,1]
    """

    initial_t: np.ndarray
    initial_targets: np.ndarray
    residual_points: np.ndarray

    def __post_init__(self):
        if self.initial_t.size == 0:
            raise ValueError("initial point set must not be empty")
        if self.residual_points.ndim != 2 or self.residual_points.shape[1] != 2:
            raise ValueError("residual_points must have shape (n_p, 2)")
        z, t = self.residual_points[:, 0], self.residual_points[:, 1]
        if np.any(z < 0) or np.any(z > 1) or np.any(np.abs(t) > 1):
            raise ValueError("residual points must lie in [0,1] x [-1,1]")
        if self.initial_targets.shape[0] != self.initial_t.shape[0]:
            raise ValueError("one target per initial point required")

    @property
    def initial_points(self) -> np.ndarray:
        pts = np.zeros((self.initial_t.size, 2))
        pts[:, 1] = self.initial_t
        return pts


@dataclass(frozen=True)
class LossBreakdown:
    j1: float
    j2: float
    j_total: float
    parts: dict = field(default_factory=dict)


@dataclass(frozen=True)
class LossSetup:
    """Everything the loss needs besides the model and the points."""

    kind: str  # "scalar" | "manakov"
    coeffs: object
    frame: NormalizationFrame
    p0x: float | None = None
    p0y: float | None = None
    initial_weight: float = 1.0

    def __post_init__(self):
        if self.kind == "scalar" and not isinstance(self.coeffs, NlseCoeffs):
            raise ValueError("scalar losses need NlseCoeffs")
        if self.kind == "manakov":
            if not isinstance(self.coeffs, ManakovCoeffs):
                raise ValueError("birefringent losses need ManakovCoeffs")
            if self.p0x is None or self.p0y is None:
                raise ValueError("birefringent losses need p0x and p0y")


def _complex(values: np.ndarray, first: int) -> np.ndarray:
    return values[:, first] + 1j * values[:, first + 1]


def scalar_residual_fields(U, Ut, Utt, Uttt, Uz, coeffs: NlseCoeffs,
                           frame: NormalizationFrame) -> np.ndarray:
    """Complex residual of the normalized scalar equation, elementwise.

    Accepts any broadcastable complex arrays, so it serves both network jets
    and reference solutions differentiated on a grid.
    """
    k1, k2 = frame.k1, frame.k2
    c2 = k1 * coeffs.attenuation
    c3 = k1 * coeffs.gvd / k2**2
    c4 = k1 * coeffs.tod / k2**3
    c5 = k1 * coeffs.kerr
    c6 = k1 * coeffs.steepening / k2
    c7 = k1 * coeffs.raman / k2
    p = U.real**2 + U.imag**2
    p_t = 2.0 * (U.real * Ut.real + U.imag * Ut.imag)
    return (
        1j * coeffs.evolution * Uz
        + 1j * c2 * U
        + c3 * Utt
        + 1j * c4 * Uttt
        + c5 * p * U
        + 1j * c6 * (p * Ut + U * p_t)
        + c7 * U * p_t
    )


def manakov_residual_fields(Ux, Uxt, Uxtt, Uxz, Uy, Uyt, Uytt, Uyz,
                            coeffs: ManakovCoeffs, frame: NormalizationFrame,
                            p0x: float, p0y: float):
    """Complex residual pair (Rx, Ry) of the normalized birefringent system."""
    k1, k2 = frame.k1, frame.k2
    c2 = k1 * coeffs.attenuation
    c3 = k1 * coeffs.walkoff / k2
    c4g = k1 * coeffs.gvd / k2**2
    c5k = k1 * coeffs.kerr
    px = Ux.real**2 + Ux.imag**2
    py = Uy.real**2 + Uy.imag**2
    fx = p0x * px + (2.0 / 3.0) * p0y * py
    fy = p0y * py + (2.0 / 3.0) * p0x * px
    e = coeffs.evolution
    rx = e * Uxz + c2 * Ux + c3 * Uxt - 1j * c4g * Uxtt - 1j * c5k * fx * Ux
    ry = e * Uyz + c2 * Uy - c3 * Uyt - 1j * c4g * Uytt - 1j * c5k * fy * Uy
    return rx, ry


def _split_wirtinger(cot_re, cot_im, g_w, g_wbar=None):
    """Accumulate real-component cotangents from Wirtinger products."""
    cot_re += g_w.real
    cot_im -= g_w.imag
    if g_wbar is not None:
        cot_re += g_wbar.real
        cot_im += g_wbar.imag


def _scalar_residual_terms(jets: Jet3, coeffs: NlseCoeffs,
                           frame: NormalizationFrame, want_cot: bool,
                           norm_n: int | None = None):
    """Residual contribution of one point batch.

    norm_n is the divisor of the mean (defaults to the batch size); passing
    the full collocation count lets chunked evaluation accumulate exactly.
    """
    U = _complex(jets.value, 0)
    Ut = _complex(jets.d_t, 0)
    Utt = _complex(jets.d_tt, 0)
    Uttt = _complex(jets.d_ttt, 0)
    Uz = _complex(jets.d_zeta, 0)
    R = scalar_residual_fields(U, Ut, Utt, Uttt, Uz, coeffs, frame)
    n = R.size if norm_n is None else int(norm_n)
    j2 = float(np.sum(np.abs(R) ** 2)) / n
    if not want_cot:
        return j2, None

    k1, k2 = frame.k1, frame.k2
    c2 = k1 * coeffs.attenuation
    c3 = k1 * coeffs.gvd / k2**2
    c4 = k1 * coeffs.tod / k2**3
    c5 = k1 * coeffs.kerr
    c6 = k1 * coeffs.steepening / k2
    c7 = k1 * coeffs.raman / k2
    q = (2.0 / n) * np.conj(R)
    p = U.real**2 + U.imag**2

    cot = Jet3.zeros(R.size, 2)
    g_u = q * (1j * c2 + 2.0 * c5 * p + (2j * c6 + c7) * np.conj(U) * Ut
               + 2.0 * (1j * c6 + c7) * U * np.conj(Ut))
    g_ub = q * (c5 * U**2 + (2j * c6 + c7) * U * Ut)
    _split_wirtinger(cot.value[:, 0], cot.value[:, 1], g_u, g_ub)
    g_ut = q * ((2j * c6 + c7) * p)
    g_utb = q * ((1j * c6 + c7) * U**2)
    _split_wirtinger(cot.d_t[:, 0], cot.d_t[:, 1], g_ut, g_utb)
    _split_wirtinger(cot.d_tt[:, 0], cot.d_tt[:, 1], q * c3)
    _split_wirtinger(cot.d_ttt[:, 0], cot.d_ttt[:, 1], q * (1j * c4))
    _split_wirtinger(cot.d_zeta[:, 0], cot.d_zeta[:, 1], q * (1j * coeffs.evolution))
    return j2, cot


def _manakov_residual_terms(jets: Jet3, coeffs: ManakovCoeffs,
                            frame: NormalizationFrame, p0x: float, p0y: float,
                            want_cot: bool, norm_n: int | None = None):
    Ux, Uy = _complex(jets.value, 0), _complex(jets.value, 2)
    Uxt, Uyt = _complex(jets.d_t, 0), _complex(jets.d_t, 2)
    Uxtt, Uytt = _complex(jets.d_tt, 0), _complex(jets.d_tt, 2)
    Uxz, Uyz = _complex(jets.d_zeta, 0), _complex(jets.d_zeta, 2)
    Rx, Ry = manakov_residual_fields(Ux, Uxt, Uxtt, Uxz, Uy, Uyt, Uytt, Uyz,
                                     coeffs, frame, p0x, p0y)
    n = Rx.size if norm_n is None else int(norm_n)
    j2x = float(np.sum(np.abs(Rx) ** 2)) / n
    j2y = float(np.sum(np.abs(Ry) ** 2)) / n
    if not want_cot:
        return j2x, j2y, None

    k1, k2 = frame.k1, frame.k2
    c2 = k1 * coeffs.attenuation
    c3 = k1 * coeffs.walkoff / k2
    c4g = k1 * coeffs.gvd / k2**2
    c5k = k1 * coeffs.kerr
    px = Ux.real**2 + Ux.imag**2
    py = Uy.real**2 + Uy.imag**2
    fx = p0x * px + (2.0 / 3.0) * p0y * py
    fy = p0y * py + (2.0 / 3.0) * p0x * px
    qx = (2.0 / n) * np.conj(Rx)
    qy = (2.0 / n) * np.conj(Ry)
    e = coeffs.evolution

    cot = Jet3.zeros(Rx.size, 4)
    # x-residual onto x-channel, plus y-residual's cross term onto x-channel
    g = qx * (c2 - 1j * c5k * (fx + p0x * px))
    gb = qx * (-1j * c5k * p0x * Ux**2)
    g += qy * (-1j * c5k * (2.0 / 3.0) * p0x * np.conj(Ux) * Uy)
    gb += qy * (-1j * c5k * (2.0 / 3.0) * p0x * Ux * Uy)
    _split_wirtinger(cot.value[:, 0], cot.value[:, 1], g, gb)
    _split_wirtinger(cot.d_t[:, 0], cot.d_t[:, 1], qx * c3)
    _split_wirtinger(cot.d_tt[:, 0], cot.d_tt[:, 1], qx * (-1j * c4g))
    _split_wirtinger(cot.d_zeta[:, 0], cot.d_zeta[:, 1], qx * e)
    # y-residual onto y-channel, plus x-residual's cross term onto y-channel
    g = qy * (c2 - 1j * c5k * (fy + p0y * py))
    gb = qy * (-1j * c5k * p0y * Uy**2)
    g += qx * (-1j * c5k * (2.0 / 3.0) * p0y * np.conj(Uy) * Ux)
    gb += qx * (-1j * c5k * (2.0 / 3.0) * p0y * Uy * Ux)
    _split_wirtinger(cot.value[:, 2], cot.value[:, 3], g, gb)
    _split_wirtinger(cot.d_t[:, 2], cot.d_t[:, 3], qy * (-c3))
    _split_wirtinger(cot.d_tt[:, 2], cot.d_tt[:, 3], qy * (-1j * c4g))
    _split_wirtinger(cot.d_zeta[:, 2], cot.d_zeta[:, 3], qy * e)
    return j2x, j2y, cot


def _initial_terms(outputs: np.ndarray, targets: np.ndarray, want_cot: bool):
    """Mean squared complex mismatch on the zeta = 0 line, per field."""
    n = outputs.shape[0]
    if targets.ndim == 1:
        pairs = [(0, targets)]
    else:
        pairs = [(2 * k, targets[:, k]) for k in range(targets.shape[1])]
    js, cot = [], (np.zeros_like(outputs) if want_cot else None)
    for first, tgt in pairs:
        diff = _complex(outputs, first) - tgt
        js.append(float(np.mean(np.abs(diff) ** 2)))
        if want_cot:
            cot[:, first] = (2.0 / n) * diff.real
            cot[:, first + 1] = (2.0 / n) * diff.imag
    return js, cot


def initial_loss(model: MlpModel, colloc: CollocationSet) -> float:
    """Initial-condition MSE (summed over polarizations when present)."""
    js, _ = _initial_terms(forward(model, colloc.initial_points),
                           colloc.initial_targets, want_cot=False)
    return float(sum(js))


def residual_scalar(model: MlpModel, residual_points: np.ndarray,
                    coeffs: NlseCoeffs, frame: NormalizationFrame) -> float:
    jets = jet_forward(model, residual_points)
    j2, _ = _scalar_residual_terms(jets, coeffs, frame, want_cot=False)
    if not np.isfinite(j2):
        raise DivergenceError("non-finite residual loss")
    return j2


def residual_manakov(model: MlpModel, residual_points: np.ndarray,
                     coeffs: ManakovCoeffs, frame: NormalizationFrame,
                     p0x: float, p0y: float) -> tuple[float, float]:
    if model.out_dim != 4:
        raise ValueError("birefringent residual needs a 4-output model")
    jets = jet_forward(model, residual_points)
    j2x, j2y, _ = _manakov_residual_terms(jets, coeffs, frame, p0x, p0y,
                                          want_cot=False)
    if not (np.isfinite(j2x) and np.isfinite(j2y)):
        raise DivergenceError("non-finite residual loss")
    return j2x, j2y


# Residual batches are evaluated in chunks: the per-point losses decouple,
# so per-chunk pullbacks accumulate exactly while the layer intermediates
# stay cache-resident instead of streaming hundreds of MB per evaluation.
RESIDUAL_CHUNK = 2048


def _residual_pass(model, points, setup, want_grad):
    """Chunked residual loss (and gradient accumulation when requested)."""
    total = points.shape[0]
    grad = None
    if setup.kind == "scalar":
        sums = np.zeros(1)
    else:
        sums = np.zeros(2)
    for k in range(0, total, RESIDUAL_CHUNK):
        sub = points[k:k + RESIDUAL_CHUNK]
        if want_grad:
            jets, vjp = jet_forward_vjp(model, sub)
        else:
            jets = jet_forward(model, sub)
        if setup.kind == "scalar":
            j2, cot = _scalar_residual_terms(jets, setup.coeffs, setup.frame,
                                             want_grad, norm_n=total)
            sums[0] += j2
        else:
            j2x, j2y, cot = _manakov_residual_terms(
                jets, setup.coeffs, setup.frame, setup.p0x, setup.p0y,
                want_grad, norm_n=total)
            sums[0] += j2x
            sums[1] += j2y
        if want_grad:
            g = vjp(cot)
            grad = g if grad is None else grad + g
    return sums, grad


def _assemble(model, colloc, setup, want_grad):
    w = setup.initial_weight
    if setup.kind == "scalar":
        expected_out = 2
    elif setup.kind == "manakov":
        expected_out = 4
    else:
        raise ValueError(f"unknown loss kind {setup.kind!r}")
    if model.out_dim != expected_out:
        raise ValueError(f"{setup.kind} task needs {expected_out} outputs, "
                         f"model has {model.out_dim}")

    if want_grad:
        out_ini, vjp_ini = forward_vjp(model, colloc.initial_points)
    else:
        out_ini = forward(model, colloc.initial_points)
    js, cot_ini = _initial_terms(out_ini, colloc.initial_targets, want_grad)
    sums, grad_res = _residual_pass(model, colloc.residual_points, setup,
                                    want_grad)

    if setup.kind == "scalar":
        j1, j2 = js[0], float(sums[0])
        parts = {}
    else:
        j1 = js[0] + js[1]
        j2 = float(sums[0] + sums[1])
        parts = {"j1_x": js[0], "j1_y": js[1],
                 "j2_x": float(sums[0]), "j2_y": float(sums[1])}
    j_total = w * j1 + j2

    if not np.isfinite(j_total):
        raise DivergenceError(f"non-finite loss: j1={j1}, j2={j2}")
    breakdown = LossBreakdown(j1=j1, j2=j2, j_total=j_total, parts=parts)
    if not want_grad:
        return breakdown, None
    grad = vjp_ini(w * cot_ini) + grad_res
    if not np.all(np.isfinite(grad)):
        raise DivergenceError("non-finite gradient")
    return breakdown, grad


def total_loss(model: MlpModel, colloc: CollocationSet,
               setup: LossSetup) -> LossBreakdown:
    # overflow is handled explicitly (DivergenceError), not via warnings
    with np.errstate(over="ignore", invalid="ignore"):
        breakdown, _ = _assemble(model, colloc, setup, want_grad=False)
    return breakdown


def total_loss_and_grad(model: MlpModel, colloc: CollocationSet,
                        setup: LossSetup):
    """Loss breakdown plus its exact flat parameter gradient."""
    with np.errstate(over="ignore", invalid="ignore"):
        return _assemble(model, colloc, setup, want_grad=True)
