"""From-scratch full-batch optimizers on flat parameter vectors.

`value_grad_fn(params) -> (loss, grad)` is the only interface either
optimizer needs.  Both are deterministic given the function, the start
point and the configuration.  A DivergenceError raised by the function (or
a non-finite loss/gradient) aborts the run, returning the last good iterate
and the trace collected so far.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .losses import DivergenceError


@dataclass(frozen=True)
class AdamConfig:
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8


@dataclass(frozen=True)
class LbfgsConfig:
    memory: int = 20
    grad_tol: float = 1e-9     # stop when ||grad||_2 falls below
    loss_tol: float = 0.0      # relative loss-change stop; 0 disables
    c1: float = 1e-4           # sufficient-decrease constant
    c2: float = 0.9            # curvature constant
    max_ls: int = 40           # max line-search evaluations per iteration


@dataclass
class OptimizeResult:
    params: np.ndarray
    losses: np.ndarray         # loss at each evaluated iterate, in order
    status: str                # completed | converged_grad | converged_loss |
                               # diverged | line_search_failed
    n_iter: int
    aux: dict = field(default_factory=dict)


def adam_run(value_grad_fn, params0, steps: int,
             config: AdamConfig = AdamConfig(), callback=None) -> OptimizeResult:
    """Bias-corrected first-order moments; loss traced every iteration.

    callback(iteration, params_after_update, loss_before_update) runs after
    each accepted step.
    """
    p = np.array(params0, dtype=float)
    m = np.zeros_like(p)
    v = np.zeros_like(p)
    losses = []
    status = "completed"
    for k in range(1, steps + 1):
        try:
            f, g = value_grad_fn(p)
        except DivergenceError:
            status = "diverged"
            break
        if not (np.isfinite(f) and np.all(np.isfinite(g))):
            status = "diverged"
            break
        losses.append(f)
        m = config.beta1 * m + (1.0 - config.beta1) * g
        v = config.beta2 * v + (1.0 - config.beta2) * g * g
        m_hat = m / (1.0 - config.beta1**k)
        v_hat = v / (1.0 - config.beta2**k)
        p = p - config.lr * m_hat / (np.sqrt(v_hat) + config.eps)
        if callback is not None:
            callback(k, p, f)
    return OptimizeResult(params=p, losses=np.array(losses), status=status,
                          n_iter=len(losses))


def _cubic_min(a_lo, f_lo, g_lo, a_hi, f_hi, g_hi):
    """Minimizer of the cubic through two (value, slope) samples, or None."""
    d1 = g_lo + g_hi - 3.0 * (f_lo - f_hi) / (a_lo - a_hi)
    disc = d1 * d1 - g_lo * g_hi
    if disc < 0.0:
        return None
    d2 = math.copysign(math.sqrt(disc), a_hi - a_lo)
    denom = g_hi - g_lo + 2.0 * d2
    if denom == 0.0:
        return None
    return a_hi - (a_hi - a_lo) * (g_hi + d2 - d1) / denom


class _LineSearchFn:
    """phi(a) = f(x + a d) with evaluation counting and best-point memory."""

    def __init__(self, fn, x, d):
        self.fn, self.x, self.d = fn, x, d
        self.evals = 0
        self.best = None  # (a, f, g_vec)

    def __call__(self, a):
        f, g = self.fn(self.x + a * self.d)
        self.evals += 1
        if not (np.isfinite(f) and np.all(np.isfinite(g))):
            raise DivergenceError("non-finite value in line search")
        if self.best is None or f < self.best[1]:
            self.best = (a, f, g)
        return f, g, float(g @ self.d)


def _wolfe_search(phi, f0, dphi0, a_init, c1, c2, max_ls):
    """Strong-Wolfe line search (bracket then zoom, cubic interpolation).

    Sufficient-decrease comparisons carry a floating-point noise allowance:
    near convergence the predicted decrease c1*a*dphi0 falls below the
    resolution of f, and without the allowance the zoom hunts sub-ulp
    differences while slopes (which stay accurate) already identify an
    acceptable step.

    Returns (a, f, g) satisfying the conditions, or the best decreasing
    point found when the budget runs out, or None when no decrease was
    found at all.  The returned point is always the most recent evaluation
    of `phi`.
    """
    noise = 16.0 * np.finfo(float).eps * (1.0 + abs(f0))

    def zoom(a_lo, f_lo, g_lo, a_hi, f_hi, g_hi):
        while phi.evals < max_ls:
            a = _cubic_min(a_lo, f_lo, g_lo, a_hi, f_hi, g_hi)
            lo, hi = min(a_lo, a_hi), max(a_lo, a_hi)
            margin = 0.1 * (hi - lo)
            if a is None or not (lo + margin <= a <= hi - margin):
                a = 0.5 * (lo + hi)
            f, g, dphi = phi(a)
            if f > f0 + c1 * a * dphi0 + noise or f >= f_lo + noise:
                a_hi, f_hi, g_hi = a, f, dphi
            else:
                if abs(dphi) <= -c2 * dphi0:
                    return a, f, g
                if dphi * (a_hi - a_lo) >= 0.0:
                    a_hi, f_hi, g_hi = a_lo, f_lo, g_lo
                a_lo, f_lo, g_lo = a, f, dphi
            if hi - lo < 1e-16 * max(1.0, abs(hi)):
                break
        return None

    a_prev, f_prev, g_prev = 0.0, f0, dphi0
    a = a_init
    first = True
    while phi.evals < max_ls:
        f, g, dphi = phi(a)
        if f > f0 + c1 * a * dphi0 + noise or (not first and f >= f_prev + noise):
            result = zoom(a_prev, f_prev, g_prev, a, f, dphi)
            break
        if abs(dphi) <= -c2 * dphi0:
            return a, f, g
        if dphi >= 0.0:
            result = zoom(a, f, dphi, a_prev, f_prev, g_prev)
            break
        a_prev, f_prev, g_prev = a, f, dphi
        a = 2.0 * a
        first = False
    else:
        result = None

    if result is not None:
        return result
    # Wolfe point not found inside the budget: fall back to the best
    # decreasing point seen, re-evaluated so the caller's last-evaluation
    # bookkeeping stays consistent.
    if phi.best is not None and phi.best[1] < f0 - noise:
        a_best = phi.best[0]
        f, g, _ = phi(a_best)
        return a_best, f, g
    return None


def _two_loop(g, pairs):
    q = g.copy()
    alphas = []
    for s, y, rho in reversed(pairs):
        a = rho * (s @ q)
        alphas.append(a)
        q -= a * y
    if pairs:
        s, y, _ = pairs[-1]
        q *= (s @ y) / (y @ y)
    for (s, y, rho), a in zip(pairs, reversed(alphas)):
        b = rho * (y @ q)
        q += (a - b) * s
    return q


def lbfgs_run(value_grad_fn, params0, max_iter: int,
              config: LbfgsConfig = LbfgsConfig(), callback=None) -> OptimizeResult:
    """Limited-memory quasi-Newton with two-loop recursion.

    Curvature pairs violating s.y > 0 are skipped; non-increasing loss over
    accepted iterates is guaranteed by the sufficient-decrease condition.
    callback(iteration, params, loss) runs after each accepted iterate.
    """
    x = np.array(params0, dtype=float)
    try:
        f, g = value_grad_fn(x)
    except DivergenceError:
        return OptimizeResult(params=x, losses=np.array([]), status="diverged",
                              n_iter=0)
    losses = [f]
    status = "completed"
    pairs: list[tuple] = []
    if np.linalg.norm(g) < config.grad_tol:
        return OptimizeResult(params=x, losses=np.array(losses),
                              status="converged_grad", n_iter=0)
    n_done = 0
    for k in range(max_iter):
        d = -_two_loop(g, pairs)
        dg = float(d @ g)
        if dg >= 0.0:  # stale curvature produced an ascent direction
            d = -g
            dg = float(d @ g)
            if dg == 0.0:
                status = "converged_grad"
                break
        a_init = min(1.0, 1.0 / np.sum(np.abs(g))) if k == 0 else 1.0
        phi = _LineSearchFn(value_grad_fn, x, d)
        try:
            hit = _wolfe_search(phi, f, dg, a_init, config.c1, config.c2,
                                config.max_ls)
        except DivergenceError:
            status = "diverged"
            break
        if hit is None:
            status = "line_search_failed"
            break
        a, f_new, g_new = hit
        s = a * d
        y = g_new - g
        sy = float(s @ y)
        if sy > 1e-10 * np.linalg.norm(s) * np.linalg.norm(y):
            pairs.append((s, y, 1.0 / sy))
            if len(pairs) > config.memory:
                pairs.pop(0)
        x = x + s
        f_prev, f, g = f, f_new, g_new
        losses.append(f)
        n_done = k + 1
        if callback is not None:
            callback(n_done, x, f)
        if np.linalg.norm(g) < config.grad_tol:
            status = "converged_grad"
            break
        if config.loss_tol > 0.0 and abs(f_prev - f) <= config.loss_tol * max(1.0, abs(f_prev)):
            status = "converged_loss"
            break
    return OptimizeResult(params=x, losses=np.array(losses), status=status,
                          n_iter=n_done)
