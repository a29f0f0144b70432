"""Split-step Fourier reference solver (scalar generalized equation and
constant-birefringence coupled pair).

Sign convention, fixed once for every engine and loss in this package: the
field evolves as

    psi_z = -(alpha/2) psi - i (beta2/2) psi_TT + (beta3/6) psi_TTT
            + i gamma |psi|^2 psi - (gamma/omega0) (|psi|^2 psi)_T
            - i gamma tau  psi (|psi|^2)_T

and for the birefringent pair (group-delay split +-delta_beta1/2, no
higher-order dispersion or Raman terms)

    psix_z = -(alpha/2) psix - (delta_beta1/2) psix_T - i (beta2/2) psix_TT
             + i gamma (|psix|^2 + (2/3)|psiy|^2) psix
    psiy_z = same with +(delta_beta1/2) psiy_T and x/y swapped.

The linear sub-step is exact in the spectral domain; the Kerr sub-step is an
exact phase rotation; self-steepening and Raman enter through one explicit
midpoint correction per step (they are perturbatively small at the parameter
scales this package targets).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy.fft import fft, ifft, fftfreq


class WindowError(RuntimeError):
    """Field magnitude at the window edge is no longer negligible."""


@dataclass(frozen=True)
class FieldGrid:
    """Complex envelope sampled on a uniform time grid."""

    times: np.ndarray   # (n_t,) seconds
    values: np.ndarray  # (n_t,) complex sqrt(W)

    def __post_init__(self):
        n = self.times.size
        if n < 64 or (n & (n - 1)) != 0:
            raise ValueError(f"n_t must be a power of two >= 64, got {n}")
        dt = np.diff(self.times)
        if not np.allclose(dt, dt[0], rtol=1e-9, atol=0.0):
            raise ValueError("time grid must be uniform")
        if self.values.shape != self.times.shape:
            raise ValueError("times and values must have matching shapes")

    @property
    def dt(self) -> float:
        return float(self.times[1] - self.times[0])

    def energy(self) -> float:
        """integral of |psi|^2 dT"""
        return float(np.sum(np.abs(self.values) ** 2) * self.dt)

    def boundary_ratio(self) -> float:
        """max edge magnitude over max magnitude (window adequacy measure)."""
        peak = float(np.max(np.abs(self.values)))
        if peak == 0.0:
            return 0.0
        edge = max(abs(self.values[0]), abs(self.values[-1]))
        return float(edge) / peak


def sample_profile(profile, t_max: float, n_t: int) -> FieldGrid:
    """Sample a launch profile on the standard FFT grid [-t_max, t_max)."""
    dt = 2.0 * t_max / n_t
    times = -t_max + dt * np.arange(n_t)
    return FieldGrid(times=times, values=profile.envelope(times))


@dataclass(frozen=True)
class SolutionSurface:
    """Field snapshots along the fiber: fields[i] is the grid at distances[i]."""

    distances: np.ndarray  # (n_z,) meters, strictly increasing from 0
    times: np.ndarray      # (n_t,) seconds
    fields: np.ndarray     # (n_z, n_t) complex

    def snapshot(self, i: int) -> FieldGrid:
        return FieldGrid(times=self.times, values=self.fields[i])

    @property
    def n_z(self) -> int:
        return int(self.distances.size)


def _snapshot_plan(l_max: float, snapshots: Sequence[float]) -> np.ndarray:
    z = np.unique(np.asarray(snapshots, dtype=float))
    if z.size and (z[0] < 0.0 or z[-1] > l_max * (1 + 1e-12)):
        raise ValueError("snapshot distances must lie within [0, l_max]")
    if z.size == 0 or z[0] > 0.0:
        z = np.concatenate(([0.0], z))
    return z


def _check_window(values: np.ndarray, z: float, tag: str = "") -> None:
    peak = float(np.max(np.abs(values)))
    if peak == 0.0:
        return
    edge = max(abs(values[0]), abs(values[-1]))
    if edge >= 1e-6 * peak:
        raise WindowError(
            f"window adequacy violated at z = {z:g} m{tag}: boundary magnitude "
            f"{edge:.3e} vs peak {peak:.3e}; widen t_max or check for wrap-around"
        )


def _spectral_ddt(spectrum_mul: np.ndarray, values: np.ndarray) -> np.ndarray:
    return ifft(spectrum_mul * fft(values))


def propagate_gnlse(
    launch: FieldGrid,
    fiber,
    derived,
    l_max: float,
    n_steps: int,
    snapshots: Sequence[float],
    self_steepening: bool = True,
    enforce_window: bool = True,
) -> SolutionSurface:
    """Propagate a scalar field over [0, l_max] with a symmetrized split step.

    `n_steps` sets the nominal step count over the full span; each inter-
    snapshot segment is subdivided so that steps land exactly on every
    requested snapshot.  Snapshot 0 km is always included.
    """
    if n_steps < 1:
        raise ValueError("n_steps must be >= 1")
    z_marks = _snapshot_plan(l_max, snapshots)
    n_t = launch.times.size
    dt = launch.dt
    omega = 2.0 * math.pi * fftfreq(n_t, dt)

    alpha, gamma, tau = fiber.alpha, fiber.gamma, fiber.tau
    beta2, beta3, omega0 = derived.beta2, derived.beta3, derived.omega0
    lin_rate = -alpha / 2.0 + 0.5j * beta2 * omega**2 - (1j / 6.0) * beta3 * omega**3
    i_omega = 1j * omega

    use_correction = gamma != 0.0 and (self_steepening or tau != 0.0)

    def nonlinear_step(psi: np.ndarray, h: float) -> np.ndarray:
        if gamma == 0.0:
            return psi
        psi = psi * np.exp(0.5j * gamma * h * np.abs(psi) ** 2)
        if use_correction:
            p = np.abs(psi) ** 2
            corr = np.zeros_like(psi)
            if self_steepening:
                corr -= (gamma / omega0) * _spectral_ddt(i_omega, p * psi)
            if tau != 0.0:
                corr -= 1j * gamma * tau * psi * _spectral_ddt(i_omega, p).real
            psi = psi + h * corr
        return psi * np.exp(0.5j * gamma * h * np.abs(psi) ** 2)

    dz_nom = l_max / n_steps
    psi = launch.values.astype(complex)
    if enforce_window:
        _check_window(psi, 0.0)
    out = [psi.copy()]
    for z_a, z_b in zip(z_marks[:-1], z_marks[1:]):
        seg = z_b - z_a
        m = max(1, math.ceil(seg / dz_nom - 1e-12))
        h = seg / m
        half_lin = np.exp(lin_rate * h / 2.0)
        for _ in range(m):
            psi = ifft(half_lin * fft(psi))
            psi = nonlinear_step(psi, h)
            psi = ifft(half_lin * fft(psi))
        if enforce_window:
            _check_window(psi, z_b)
        out.append(psi.copy())
    return SolutionSurface(
        distances=z_marks, times=launch.times.copy(), fields=np.array(out)
    )


def propagate_manakov(
    launch_x: FieldGrid,
    launch_y: FieldGrid,
    fiber,
    derived,
    l_max: float,
    n_steps: int,
    snapshots: Sequence[float],
    enforce_window: bool = True,
) -> tuple[SolutionSurface, SolutionSurface]:
    """Propagate the coupled x/y envelopes with the birefringent pair."""
    if n_steps < 1:
        raise ValueError("n_steps must be >= 1")
    if fiber.delta_beta1 is None:
        raise ValueError("delta_beta1 is unset; birefringent propagation undefined")
    if launch_x.times.shape != launch_y.times.shape or not np.allclose(
        launch_x.times, launch_y.times
    ):
        raise ValueError("x and y launches must share one time grid")
    z_marks = _snapshot_plan(l_max, snapshots)
    n_t = launch_x.times.size
    omega = 2.0 * math.pi * fftfreq(n_t, launch_x.dt)

    alpha, gamma, db1 = fiber.alpha, fiber.gamma, fiber.delta_beta1
    beta2 = derived.beta2
    base = -alpha / 2.0 + 0.5j * beta2 * omega**2
    rate_x = base - 0.5j * db1 * omega
    rate_y = base + 0.5j * db1 * omega

    px = launch_x.values.astype(complex)
    py = launch_y.values.astype(complex)
    if enforce_window:
        _check_window(px, 0.0, " (x)")
        _check_window(py, 0.0, " (y)")
    out_x, out_y = [px.copy()], [py.copy()]
    dz_nom = l_max / n_steps
    for z_a, z_b in zip(z_marks[:-1], z_marks[1:]):
        seg = z_b - z_a
        m = max(1, math.ceil(seg / dz_nom - 1e-12))
        h = seg / m
        half_x = np.exp(rate_x * h / 2.0)
        half_y = np.exp(rate_y * h / 2.0)
        for _ in range(m):
            px = ifft(half_x * fft(px))
            py = ifft(half_y * fft(py))
            if gamma != 0.0:
                ix = np.abs(px) ** 2
                iy = np.abs(py) ** 2
                px = px * np.exp(1j * gamma * h * (ix + (2.0 / 3.0) * iy))
                py = py * np.exp(1j * gamma * h * (iy + (2.0 / 3.0) * ix))
            px = ifft(half_x * fft(px))
            py = ifft(half_y * fft(py))
        if enforce_window:
            _check_window(px, z_b, " (x)")
            _check_window(py, z_b, " (y)")
        out_x.append(px.copy())
        out_y.append(py.copy())
    times = launch_x.times.copy()
    return (
        SolutionSurface(distances=z_marks, times=times, fields=np.array(out_x)),
        SolutionSurface(distances=z_marks, times=times, fields=np.array(out_y)),
    )


MAX_AUTO_STEPS = 2**20


def auto_step(
    run: Callable[[int], SolutionSurface],
    rel_tol: float,
    start_steps: int = 64,
) -> tuple[SolutionSurface, int]:
    """Double the step count until the final snapshot stops changing.

    `run(n_steps)` must return a SolutionSurface.  Refinement stops when the
    max-magnitude relative change of the final snapshot between successive
    doublings drops below rel_tol; the finer result and its step count are
    returned.  Raises RuntimeError past 2**20 steps.
    """
    if rel_tol <= 0:
        raise ValueError("rel_tol must be positive")
    n = max(1, start_steps)
    coarse = run(n)
    while True:
        if 2 * n > MAX_AUTO_STEPS:
            raise RuntimeError(
                f"auto_step exceeded {MAX_AUTO_STEPS} steps without converging"
            )
        n *= 2
        fine = run(n)
        scale = float(np.max(np.abs(fine.fields[-1])))
        diff = float(np.max(np.abs(fine.fields[-1] - coarse.fields[-1])))
        if scale == 0.0 or diff / scale < rel_tol:
            return fine, n
        coarse = fine
