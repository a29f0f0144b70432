"""Independent numerical oracles used across the test suite.

Richardson-extrapolated central differences; these never call the package's
derivative machinery, so they stay independent of the code paths they check.
"""

import numpy as np


def richardson(d, h):
    """Two-level Richardson extrapolation of an O(h^2) stencil d(h)."""
    r1 = lambda s: (4.0 * d(s / 2.0) - d(s)) / 3.0
    return (16.0 * r1(h / 2.0) - r1(h)) / 15.0


def fd_derivative(f, x, order: int, h: float):
    """Central-difference derivative of callable f at scalar x.

    Coordinates are carried in longdouble: third-order stencils divide by
    h^3, so even coordinate quantization at float64 eps would dominate the
    comparison otherwise.
    """
    x = np.longdouble(x)
    h = np.longdouble(h)
    if order == 1:
        d = lambda s: (f(x + s) - f(x - s)) / (2.0 * s)
    elif order == 2:
        d = lambda s: (f(x + s) - 2.0 * f(x) + f(x - s)) / s**2
    elif order == 3:
        d = lambda s: (f(x + 2 * s) - 2.0 * f(x + s)
                       + 2.0 * f(x - s) - f(x - 2 * s)) / (2.0 * s**3)
    else:
        raise ValueError(order)
    return richardson(d, h)


def fd_gradient(f, x0: np.ndarray, h: float = 1e-6) -> np.ndarray:
    """Central-difference gradient of a scalar function of a vector."""
    g = np.zeros_like(x0)
    for i in range(x0.size):
        xp, xm = x0.copy(), x0.copy()
        xp[i] += h
        xm[i] -= h
        g[i] = (f(xp) - f(xm)) / (2.0 * h)
    return g


def rel_err(approx, exact, floor: float = 1e-10) -> float:
    approx = np.asarray(approx, dtype=float)
    exact = np.asarray(exact, dtype=float)
    return float(np.max(np.abs(approx - exact) /
                        np.maximum(np.abs(exact), floor)))


def mlp_forward_extended(model, pts):
    """Independent tanh-MLP forward in extended precision.

    Reimplements the network from its weight list (no package code paths)
    in longdouble, so finite-difference stencils built on it are not limited
    by float64 roundoff even for third derivatives.
    """
    h = np.asarray(pts, dtype=np.longdouble)
    n_layers = len(model.weights)
    for l in range(n_layers):
        w = model.weights[l].astype(np.longdouble)
        b = model.biases[l].astype(np.longdouble)
        h = h @ w + b
        if l != n_layers - 1:
            h = np.tanh(h)
    return h


def make_mp_forward(model, dps: int = 40):
    """Arbitrary-precision scalar forward f(zeta, t, channel).

    Third-derivative stencils divide by h^3; at 40 decimal digits the
    difference roundoff sits far below every tolerance in play, leaving only
    the (Richardson-eliminated) truncation terms.
    """
    import mpmath as mp

    weights = [[[mp.mpf(float(x)) for x in row] for row in w]
               for w in model.weights]
    biases = [[mp.mpf(float(x)) for x in b] for b in model.biases]
    n_layers = len(weights)

    def f(zeta, t, channel):
        with mp.workdps(dps):
            h = [mp.mpf(zeta) if isinstance(zeta, float) else zeta,
                 mp.mpf(t) if isinstance(t, float) else t]
            for l in range(n_layers):
                w, b = weights[l], biases[l]
                out = [sum(h[i] * w[i][j] for i in range(len(h))) + b[j]
                       for j in range(len(b))]
                h = [mp.tanh(x) for x in out] if l != n_layers - 1 else out
            return h[channel]

    return f


def fd_derivative_mp(f, x, order: int, h: float, dps: int = 40):
    """fd_derivative with mpmath arithmetic for the stencil combination."""
    import mpmath as mp

    with mp.workdps(dps):
        x = mp.mpf(float(x))
        h = mp.mpf(float(h))
        if order == 3:
            d = lambda s: (f(x + 2 * s) - 2 * f(x + s)
                           + 2 * f(x - s) - f(x - 2 * s)) / (2 * s**3)
        elif order == 2:
            d = lambda s: (f(x + s) - 2 * f(x) + f(x - s)) / s**2
        else:
            d = lambda s: (f(x + s) - f(x - s)) / (2 * s)
        r1 = lambda s: (4 * d(s / 2) - d(s)) / 3
        return float((16 * r1(h / 2) - r1(h)) / 15)
