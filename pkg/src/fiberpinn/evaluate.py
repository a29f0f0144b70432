"""Prediction surfaces, comparison metrics and eye-diagram extraction."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .network import MlpModel, forward
from .params import NormalizationFrame
from .ssfm import FieldGrid, SolutionSurface

_DOMAIN_SLACK = 1e-9


def _query_points(frame: NormalizationFrame, distances, times):
    z = np.asarray(distances, dtype=float)
    T = np.asarray(times, dtype=float)
    zeta = z / frame.l_max
    t = T / frame.t_max
    if np.any(zeta < -_DOMAIN_SLACK) or np.any(zeta > 1.0 + _DOMAIN_SLACK):
        raise ValueError("query distance outside the trained span [0, l_max]")
    if np.any(np.abs(t) > 1.0 + _DOMAIN_SLACK):
        raise ValueError("query time outside the trained window [-t_max, t_max]")
    zz, tt = np.meshgrid(np.clip(zeta, 0.0, 1.0), np.clip(t, -1.0, 1.0),
                         indexing="ij")
    return z, T, np.column_stack([zz.ravel(), tt.ravel()])


def predict_surface(model: MlpModel, frame: NormalizationFrame,
                    distances, times) -> SolutionSurface:
    """Evaluate a trained 2-output model on a physical (z, T) grid.

    Queries outside the trained domain raise; the model never extrapolates.
    """
    if model.out_dim != 2:
        raise ValueError("predict_surface needs a 2-output model")
    z, T, pts = _query_points(frame, distances, times)
    out = forward(model, pts)
    psi = math.sqrt(frame.p_ref) * (out[:, 0] + 1j * out[:, 1])
    return SolutionSurface(distances=z, times=T,
                           fields=psi.reshape(z.size, T.size))


def predict_surface_polarized(model: MlpModel, frame: NormalizationFrame,
                              p0x: float, p0y: float, distances, times):
    """Evaluate a trained 4-output model; returns (x surface, y surface)."""
    if model.out_dim != 4:
        raise ValueError("polarized prediction needs a 4-output model")
    z, T, pts = _query_points(frame, distances, times)
    out = forward(model, pts)
    psi_x = math.sqrt(p0x) * (out[:, 0] + 1j * out[:, 1])
    psi_y = math.sqrt(p0y) * (out[:, 2] + 1j * out[:, 3])
    shape = (z.size, T.size)
    return (
        SolutionSurface(distances=z, times=T, fields=psi_x.reshape(shape)),
        SolutionSurface(distances=z, times=T, fields=psi_y.reshape(shape)),
    )


def nrmse(pred: SolutionSurface, ref: SolutionSurface):
    """Per-snapshot and mean relative L2 error between complex surfaces.

    nrmse_i = ||pred_i - ref_i||_2 / ||ref_i||_2 over the complex samples.
    """
    if pred.fields.shape != ref.fields.shape:
        raise ValueError("surfaces must share one grid shape")
    if not np.allclose(pred.distances, ref.distances, rtol=1e-9, atol=0.0):
        raise ValueError("surfaces must share the snapshot distances")
    if not np.allclose(pred.times, ref.times, rtol=1e-9, atol=1e-30):
        raise ValueError("surfaces must share the time grid")
    ref_norm = np.linalg.norm(ref.fields, axis=1)
    if np.any(ref_norm == 0.0):
        raise ValueError("reference snapshot with zero norm")
    per = np.linalg.norm(pred.fields - ref.fields, axis=1) / ref_norm
    return per, float(np.mean(per))


@dataclass(frozen=True)
class EyeDiagram:
    """Power traces folded modulo two symbol periods (1-symbol stride)."""

    traces: np.ndarray        # (n_traces, 2 * samples_per_symbol) power, W
    t_s: float                # symbol period, s
    samples_per_symbol: int

    @property
    def trace_times(self) -> np.ndarray:
        dt = self.t_s / self.samples_per_symbol
        return dt * np.arange(self.traces.shape[1])


def eye_diagram(field: FieldGrid, t_s: float, samples_per_symbol: int) -> EyeDiagram:
    """Fold |psi|^2 into overlapping two-symbol traces.

    The grid must hold an integer number (>= 4) of symbols at exactly
    samples_per_symbol points each.
    """
    n = field.times.size
    sps = int(samples_per_symbol)
    if sps < 2 or n % sps != 0:
        raise ValueError("grid length must be a multiple of samples_per_symbol")
    if not math.isclose(sps * field.dt, t_s, rel_tol=1e-6):
        raise ValueError("samples_per_symbol * dt must equal the symbol period")
    n_sym = n // sps
    if n_sym < 4:
        raise ValueError("need at least 4 symbols for an eye diagram")
    power = np.abs(field.values) ** 2
    traces = np.stack([power[i * sps:(i + 2) * sps] for i in range(n_sym - 1)])
    return EyeDiagram(traces=traces, t_s=t_s, samples_per_symbol=sps)


def eye_histogram(eye: EyeDiagram, power_bins: int = 64):
    """2-D histogram (time bin x power bin) of all trace samples.

    One time bin per trace column, so the counts sum to the number of folded
    samples.  Returns (counts, time_edges, power_edges).
    """
    n_traces, width = eye.traces.shape
    cols = np.tile(np.arange(width), n_traces)
    vals = eye.traces.ravel()
    dt = eye.t_s / eye.samples_per_symbol
    time_edges = dt * np.arange(width + 1)
    lo, hi = float(vals.min()), float(vals.max())
    if hi == lo:
        hi = lo + max(abs(lo), 1.0) * 1e-12
    power_edges = np.linspace(lo, hi, power_bins + 1)
    counts, _, _ = np.histogram2d(cols * dt + dt / 2, vals,
                                  bins=[time_edges, power_edges])
    return counts.astype(np.int64), time_edges, power_edges


def eye_opening(eye: EyeDiagram) -> float:
    """Mid-symbol eye opening: min high-level minus max low-level power.

    Samples at the center column of the first symbol are split at the
    midpoint between the extreme levels; both level groups must be present.
    """
    col = eye.samples_per_symbol // 2
    v = eye.traces[:, col]
    threshold = 0.5 * (float(v.max()) + float(v.min()))
    high = v[v >= threshold]
    low = v[v < threshold]
    if high.size == 0 or low.size == 0:
        raise ValueError("eye opening needs both mark and space levels present")
    return float(high.min() - low.max())
