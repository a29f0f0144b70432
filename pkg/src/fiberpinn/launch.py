"""Initial complex envelopes: analytic pulses, pulse trains, OOK signals.

Every profile is evaluable at arbitrary retarded times through
``profile.envelope(times)`` and returns the complex field in sqrt(W).  The
width parameter t0 is the half-width at which a Gaussian amplitude has
fallen to exp(-1/2) of its peak (equivalently where the power is 1/e of
peak), matching the closed forms below.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

_MASK64 = 0xFFFFFFFFFFFFFFFF

PULSE_KINDS = ("gaussian", "sech", "supergaussian")


def _shape(kind: str, x: np.ndarray, order: int) -> np.ndarray:
    """Unit-peak pulse shape on the scaled coordinate x = (T - center)/t0."""
    if kind == "gaussian":
        return np.exp(-0.5 * x**2)
    if kind == "sech":
        return 1.0 / np.cosh(x)
    if kind == "supergaussian":
        return np.exp(-0.5 * x ** (2 * order))
    raise ValueError(f"unknown pulse kind {kind!r}")


@dataclass(frozen=True)
class Pulse:
    """Single analytic pulse of peak power p_peak centered at `center`."""

    kind: str
    t0: float
    p_peak: float
    center: float = 0.0
    order: int = 2  # supergaussian only

    def envelope(self, times) -> np.ndarray:
        x = (np.asarray(times, dtype=float) - self.center) / self.t0
        return math.sqrt(self.p_peak) * _shape(self.kind, x, self.order).astype(complex)


@dataclass(frozen=True)
class PulseTrain:
    """`count` identical pulses centered symmetrically about T = 0."""

    kind: str
    t0: float
    p_peak: float
    count: int
    spacing: float
    order: int = 2

    @property
    def centers(self) -> np.ndarray:
        return (np.arange(self.count) - (self.count - 1) / 2.0) * self.spacing

    def envelope(self, times) -> np.ndarray:
        x = np.asarray(times, dtype=float)
        amp = math.sqrt(self.p_peak)
        total = np.zeros(x.shape, dtype=complex)
        for c in self.centers:
            total += amp * _shape(self.kind, (x - c) / self.t0, self.order)
        return total


def _splitmix64_bits(seed: int, n: int) -> np.ndarray:
    """n i.i.d. uniform bits from the splitmix64 stream of `seed`.

    Bit k is 1 when the k-th 64-bit output is at or above the midpoint of
    the u64 range (i.e. its top bit), which keeps golden bit vectors
    portable across platforms.
    """
    state = seed & _MASK64
    bits = np.empty(n, dtype=np.uint8)
    for k in range(n):
        state = (state + 0x9E3779B97F4A7C15) & _MASK64
        z = state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
        z ^= z >> 31
        bits[k] = z >> 63
    return bits


@dataclass(frozen=True)
class OokSignal:
    """NRZ on-off-keyed waveform with raised-cosine symbol transitions.

    The pattern spans n_symbols * t_s centered on T = 0 and repeats
    periodically outside that span, so the waveform is smooth across the
    window boundary of a matching FFT grid.  Transitions are centered on
    symbol boundaries and last rise_fraction * t_s; the amplitude ramps
    between levels with a raised cosine, so "1" plateaus sit exactly at
    sqrt(p_max).
    """

    baud: float
    n_symbols: int
    seed: int
    p_max: float
    rise_fraction: float = 0.25
    bits: np.ndarray = field(default=None, repr=False)  # override pattern

    def __post_init__(self):
        if self.baud <= 0:
            raise ValueError("baud must be positive")
        if not 0.0 < self.rise_fraction <= 0.5:
            raise ValueError("rise_fraction must lie in (0, 0.5]")
        bits = self.bits
        if bits is None:
            bits = _splitmix64_bits(self.seed, self.n_symbols)
        else:
            bits = np.asarray(bits, dtype=np.uint8)
            if bits.shape != (self.n_symbols,):
                raise ValueError("pattern override must have n_symbols bits")
        object.__setattr__(self, "bits", bits)

    @property
    def t_s(self) -> float:
        return 1.0 / self.baud

    @property
    def span(self) -> float:
        return self.n_symbols * self.t_s

    def envelope(self, times) -> np.ndarray:
        T = np.asarray(times, dtype=float)
        # position inside the periodic pattern, in symbols from its start
        u = (T + self.span / 2.0) / self.t_s % self.n_symbols
        k = np.floor(u).astype(int) % self.n_symbols
        frac = u - np.floor(u)
        lev = self.bits.astype(float)
        here = lev[k]
        prev = lev[(k - 1) % self.n_symbols]
        nxt = lev[(k + 1) % self.n_symbols]
        half = self.rise_fraction / 2.0
        amp = here.copy()
        # rising/falling edge around the leading boundary of symbol k
        lead = frac < half
        xi = 0.5 * (1.0 + np.sin(math.pi * frac[lead] / self.rise_fraction))
        amp[lead] = prev[lead] + (here[lead] - prev[lead]) * xi
        # and around the trailing boundary
        trail = frac > 1.0 - half
        xi = 0.5 * (1.0 + np.sin(math.pi * (frac[trail] - 1.0) / self.rise_fraction))
        amp[trail] = here[trail] + (nxt[trail] - here[trail]) * xi
        return math.sqrt(self.p_max) * amp.astype(complex)


@dataclass(frozen=True)
class PolarizedLaunch:
    """Linear-polarized launch of `profile` at angle theta to the x axis."""

    profile: object
    theta: float

    @property
    def p0x(self) -> float:
        return math.cos(self.theta) ** 2 * self.profile.p_peak

    @property
    def p0y(self) -> float:
        return math.sin(self.theta) ** 2 * self.profile.p_peak

    def envelope_x(self, times) -> np.ndarray:
        return math.cos(self.theta) * self.profile.envelope(times)

    def envelope_y(self, times) -> np.ndarray:
        return math.sin(self.theta) * self.profile.envelope(times)


def make_pulse(kind: str, t0: float, p_peak: float, center: float = 0.0,
               order: int = 2) -> Pulse:
    if kind not in PULSE_KINDS:
        raise ValueError(f"unknown pulse kind {kind!r}")
    if t0 <= 0 or p_peak <= 0:
        raise ValueError("t0 and p_peak must be positive")
    if kind == "supergaussian" and (order < 1 or order != int(order)):
        raise ValueError("supergaussian order must be an integer >= 1")
    return Pulse(kind=kind, t0=t0, p_peak=p_peak, center=center, order=int(order))


def make_pulse_train(kind: str, t0: float, p_peak: float, count: int,
                     spacing: float, order: int = 2) -> PulseTrain:
    if count < 1:
        raise ValueError("count must be >= 1")
    if spacing <= 0:
        raise ValueError("spacing must be positive")
    if t0 <= 0 or p_peak <= 0:
        raise ValueError("t0 and p_peak must be positive")
    return PulseTrain(kind=kind, t0=t0, p_peak=p_peak, count=int(count),
                      spacing=spacing, order=int(order))


def make_ook(baud: float, n_symbols: int, seed: int, p_max: float,
             rise_fraction: float = 0.25, pattern=None) -> OokSignal:
    return OokSignal(baud=baud, n_symbols=int(n_symbols), seed=int(seed),
                     p_max=p_max, rise_fraction=rise_fraction, bits=pattern)


def polarize(profile, theta: float) -> PolarizedLaunch:
    """Split a scalar profile onto the x/y axes at launch angle theta."""
    return PolarizedLaunch(profile=profile, theta=theta)
