"""Shared fixtures: fiber parameter sets for the three task families.

BLAS pools are capped to one thread: the chunked full-batch training loop
runs on small matrices where threading overhead dominates, and the timing
gates in the acceptance suite assume the single-threaded rates.  The env
vars alone are not enough because pytest plugins may import numpy before
this file runs, so threadpoolctl clamps any already-initialized pools too.
"""

import os

for _var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
    os.environ.setdefault(_var, "1")

try:
    import threadpoolctl

    _limiter = threadpoolctl.threadpool_limits(limits=1)
except ImportError:  # env vars above still cover the common case
    pass

import pytest

from fiberpinn import FiberParams


@pytest.fixture(scope="session")
def fiber_pulse() -> FiberParams:
    """Pulse-evolution column: strong negative slope, Raman time set."""
    return FiberParams.from_conventional(
        alpha_per_m=4.605e-5, lambda0_nm=1550.0, d_ps_nm_km=15.6916,
        s_ps_nm2_km=-0.12332, gamma_per_w_m=0.0013, tau_fs=2.6,
        a_eff_um2=80.0)


@pytest.fixture(scope="session")
def fiber_signal() -> FiberParams:
    """Signal-transmission column."""
    return FiberParams.from_conventional(
        alpha_per_m=4.605e-5, lambda0_nm=1550.0, d_ps_nm_km=17.0,
        s_ps_nm2_km=0.056, gamma_per_w_m=0.0013, tau_fs=2.6,
        a_eff_um2=80.0)


@pytest.fixture(scope="session")
def fiber_birefringent() -> FiberParams:
    """Birefringence column: no slope or Raman, group-delay split set."""
    return FiberParams.from_conventional(
        alpha_per_m=4.605e-5, lambda0_nm=1550.0, d_ps_nm_km=17.0,
        s_ps_nm2_km=0.0, gamma_per_w_m=0.0013, tau_fs=0.0,
        a_eff_um2=80.0, delta_beta1_ps_km=20.0)
