"""Fiber constants, unit conversions, normalization frames and PDE coefficients.

Everything internal is SI (seconds, meters, watts, radians).  Conventional
fiber-engineering units (ps/nm/km and friends) are accepted only through the
``FiberParams.from_conventional`` boundary and converted once.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

C_LIGHT = 2.99792458e8  # vacuum speed of light, m/s

# conversion factors into SI
_D_SI = 1e-6      # ps/(nm km)  -> s/m^2
_S_SI = 1e3       # ps/(nm^2 km) -> s/m^3
_TAU_SI = 1e-15   # fs -> s
_AEFF_SI = 1e-12  # um^2 -> m^2
_DB1_SI = 1e-15   # ps/km -> s/m


@dataclass(frozen=True)
class FiberParams:
    """Physical fiber constants, all SI.

    alpha        power attenuation, 1/m
    lambda0      center wavelength, m
    d            dispersion parameter, s/m^2
    s            dispersion slope, s/m^3
    gamma        nonlinear coefficient, 1/(W m)
    tau          delayed Raman response time, s
    a_eff        effective core area, m^2 (stored for config fidelity, unused)
    delta_beta1  birefringent group-delay difference, s/m; None means the
                 fiber model has no birefringence axis defined
    """

    alpha: float
    lambda0: float
    d: float
    s: float
    gamma: float
    tau: float
    a_eff: float
    delta_beta1: float | None = None

    def __post_init__(self):
        if self.alpha < 0:
            raise ValueError(f"alpha must be >= 0, got {self.alpha}")
        if self.lambda0 <= 0:
            raise ValueError(f"lambda0 must be > 0, got {self.lambda0}")
        if self.gamma < 0:
            raise ValueError(f"gamma must be >= 0, got {self.gamma}")
        if self.a_eff <= 0:
            raise ValueError(f"a_eff must be > 0, got {self.a_eff}")
        if self.tau < 0:
            raise ValueError(f"tau must be >= 0, got {self.tau}")

    @classmethod
    def from_conventional(
        cls,
        alpha_per_m: float,
        lambda0_nm: float,
        d_ps_nm_km: float,
        s_ps_nm2_km: float,
        gamma_per_w_m: float,
        tau_fs: float,
        a_eff_um2: float,
        delta_beta1_ps_km: float | None = None,
    ) -> "FiberParams":
        """Build from the conventional units used on fiber data sheets."""
        db1 = None if delta_beta1_ps_km is None else delta_beta1_ps_km * _DB1_SI
        return cls(
            alpha=alpha_per_m,
            lambda0=lambda0_nm * 1e-9,
            d=d_ps_nm_km * _D_SI,
            s=s_ps_nm2_km * _S_SI,
            gamma=gamma_per_w_m,
            tau=tau_fs * _TAU_SI,
            a_eff=a_eff_um2 * _AEFF_SI,
            delta_beta1=db1,
        )

    def to_conventional(self) -> dict:
        """Inverse of ``from_conventional`` (used for round-trip checks)."""
        out = {
            "alpha_per_m": self.alpha,
            "lambda0_nm": self.lambda0 / 1e-9,
            "d_ps_nm_km": self.d / _D_SI,
            "s_ps_nm2_km": self.s / _S_SI,
            "gamma_per_w_m": self.gamma,
            "tau_fs": self.tau / _TAU_SI,
            "a_eff_um2": self.a_eff / _AEFF_SI,
        }
        if self.delta_beta1 is not None:
            out["delta_beta1_ps_km"] = self.delta_beta1 / _DB1_SI
        return out


@dataclass(frozen=True)
class DerivedParams:
    """Secondary constants derived from FiberParams.

    beta2   group-velocity dispersion, s^2/m
    beta3   third-order dispersion, s^3/m
    omega0  angular carrier frequency, rad/s
    """

    beta2: float
    beta3: float
    omega0: float


def derive_secondary_params(fiber: FiberParams) -> DerivedParams:
    """Convert (D, S, lambda0) into (beta2, beta3, omega0).

    beta2 = -D lambda^2 / (2 pi c)
    beta3 = (S + 2 D / lambda) lambda^4 / (2 pi c)^2
    """
    lam = fiber.lambda0
    beta2 = -fiber.d * lam**2 / (2.0 * math.pi * C_LIGHT)
    beta3 = (fiber.s + 2.0 * fiber.d / lam) * lam**4 / (2.0 * math.pi * C_LIGHT) ** 2
    omega0 = 2.0 * math.pi * C_LIGHT / lam
    return DerivedParams(beta2=beta2, beta3=beta3, omega0=omega0)


@dataclass(frozen=True)
class NormalizationFrame:
    """Maps physical (T, z, psi) onto the solver's unit box (t, zeta, U).

    t = T / t_max with t in [-1, 1], zeta = z / l_max with zeta in [0, 1],
    U = psi / sqrt(p_ref).  k1 = l_max / l_d and k2 = t_max / t_ref are the
    dimensionless stretch factors that appear in the normalized equations.
    """

    t_ref: float   # reference time (pulse width or symbol period), s
    p_ref: float   # reference power, W
    l_d: float     # dispersion length t_ref^2/|beta2|, m
    l_nl: float    # nonlinear length 1/(gamma p_ref), m (inf when gamma*p_ref = 0)
    l_max: float   # physical propagation span, m
    t_max: float   # half-width of the physical time window, s
    k1: float      # l_max / l_d
    k2: float      # t_max / t_ref

    def normalize(self, T, z, psi):
        """(T, z, psi) -> (t, zeta, U)."""
        scale = math.sqrt(self.p_ref)
        return (
            np.asarray(T) / self.t_max,
            np.asarray(z) / self.l_max,
            np.asarray(psi) / scale,
        )

    def denormalize(self, t, zeta, U):
        """(t, zeta, U) -> (T, z, psi)."""
        scale = math.sqrt(self.p_ref)
        return (
            np.asarray(t) * self.t_max,
            np.asarray(zeta) * self.l_max,
            np.asarray(U) * scale,
        )


def make_frame(
    fiber: FiberParams,
    derived: DerivedParams,
    t_ref: float,
    p_ref: float,
    l_max: float,
    t_max: float,
) -> NormalizationFrame:
    """Build the normalization frame shared by pulse and signal tasks.

    Raises ValueError when beta2 = 0: the dispersion length (and with it the
    whole normalization) is undefined, and dispersionless propagation is not
    modeled here.
    """
    if t_ref <= 0 or p_ref <= 0 or l_max <= 0 or t_max <= 0:
        raise ValueError("t_ref, p_ref, l_max, t_max must all be positive")
    if derived.beta2 == 0.0:
        raise ValueError("beta2 = 0: normalization frame undefined")
    l_d = t_ref**2 / abs(derived.beta2)
    gp = fiber.gamma * p_ref
    l_nl = math.inf if gp == 0.0 else 1.0 / gp
    return NormalizationFrame(
        t_ref=t_ref,
        p_ref=p_ref,
        l_d=l_d,
        l_nl=l_nl,
        l_max=l_max,
        t_max=t_max,
        k1=l_max / l_d,
        k2=t_max / t_ref,
    )


@dataclass(frozen=True)
class NlseCoeffs:
    """Dimensionless coefficients of the normalized scalar equation.

    The normalized field U(t, zeta) satisfies

        i*evolution*U_zeta + i*k1*attenuation*U + k1*gvd*U_tt/k2^2
        + i*k1*tod*U_ttt/k2^3 + k1*kerr*|U|^2 U
        + i*k1*steepening*(|U|^2 U)_t/k2 + k1*raman*U*(|U|^2)_t/k2 = 0

    The same formulas serve the pulse frame (t_ref = pulse width, p_ref =
    peak power) and the signal frame (t_ref = symbol period, p_ref = maximum
    signal power); only the frame scales differ.
    """

    evolution: float    # 1
    attenuation: float  # alpha l_d / 2
    gvd: float          # -sign(beta2) / 2
    tod: float          # -beta3 l_d / (6 t_ref^3)
    kerr: float         # l_d / l_nl = gamma p_ref l_d
    steepening: float   # gamma p_ref l_d / (omega0 t_ref)
    raman: float        # -gamma p_ref l_d tau / t_ref


@dataclass(frozen=True)
class ManakovCoeffs:
    """Dimensionless coefficients of the normalized birefringent pair.

    evolution=1, attenuation = alpha l_d / 2, walkoff = delta_beta1 l_d /
    (2 t_ref), gvd = -sign(beta2)/2, kerr = gamma l_d.  The x-channel gets
    +walkoff, the y-channel -walkoff; the Kerr term weights the self and
    cross intensities with the per-polarization launch powers and the 2/3
    cross factor.
    """

    evolution: float
    attenuation: float
    walkoff: float
    gvd: float
    kerr: float


def nlse_coeffs(
    fiber: FiberParams, derived: DerivedParams, frame: NormalizationFrame
) -> NlseCoeffs:
    """Coefficient set of the normalized scalar equation for this frame."""
    gp = fiber.gamma * frame.p_ref
    return NlseCoeffs(
        evolution=1.0,
        attenuation=fiber.alpha * frame.l_d / 2.0,
        gvd=-math.copysign(0.5, derived.beta2) if derived.beta2 != 0.0 else 0.0,
        tod=-derived.beta3 * frame.l_d / (6.0 * frame.t_ref**3),
        kerr=gp * frame.l_d,
        steepening=gp * frame.l_d / (derived.omega0 * frame.t_ref),
        raman=-gp * frame.l_d * fiber.tau / frame.t_ref,
    )


def manakov_coeffs(
    fiber: FiberParams, derived: DerivedParams, frame: NormalizationFrame
) -> ManakovCoeffs:
    """Coefficient set of the normalized birefringent pair for this frame.

    Requires fiber.delta_beta1 to be set (0.0 is a valid, walk-off-free
    value; None means the fiber was configured without a birefringence axis).
    """
    if fiber.delta_beta1 is None:
        raise ValueError("delta_beta1 is unset; birefringent coefficients undefined")
    return ManakovCoeffs(
        evolution=1.0,
        attenuation=fiber.alpha * frame.l_d / 2.0,
        walkoff=fiber.delta_beta1 * frame.l_d / (2.0 * frame.t_ref),
        gvd=-math.copysign(0.5, derived.beta2) if derived.beta2 != 0.0 else 0.0,
        kerr=fiber.gamma * frame.l_d,
    )
