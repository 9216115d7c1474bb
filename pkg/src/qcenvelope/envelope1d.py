"""One-dimensional quasiconvex envelopes and the closed-form penalised solution.

On an interval ``[0, L]`` with ``u(0) = 0``, ``u(L) = H`` the equation

    eps * u'' + |u'| = eps**2

has an explicit solution.  With ``S = H / (eps**2 L)`` it is linear when
``S = +-1``, a monotone exponential profile when the boundary rise is large,
and a symmetric valley

    u = eps**2 |x - x*| + eps**3 (exp(-|x - x*| / eps) - 1) + u0

when it is small.  The valley exists only while ``|H| < phi(L)`` with
``phi(s) = eps**2 s + eps**3 (exp(-s/eps) - 1)``; just below ``|S| = 1`` the
monotone branch takes over with a negative amplitude.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
from scipy.optimize import brentq

from .grid import ParameterError

LINEAR_PLUS = "linear_plus"
LINEAR_MINUS = "linear_minus"
INCREASING = "increasing"
DECREASING = "decreasing"
INTERIOR_MIN = "interior_min"


def qce_line(a) -> np.ndarray:
    """Largest quasiconvex (down-then-up) sequence below ``a``.

    Works along the last axis, so a stack of lines is handled at once.
    Trailing ``+inf`` padding does not disturb the finite entries.
    """
    a = np.asarray(a, dtype=float)
    down = np.minimum.accumulate(a, axis=-1)
    up = np.flip(np.minimum.accumulate(np.flip(a, axis=-1), axis=-1), axis=-1)
    return np.maximum(down, up)


def _phi(s, eps):
    return eps**2 * s + eps**3 * np.expm1(-s / eps)


@dataclass(frozen=True)
class Analytic1DCase:
    length: float
    rise: float
    epsilon: float
    case: str
    C_plus: float | None = None
    C_minus: float | None = None
    x_star: float | None = None
    u0: float | None = None

    @property
    def S(self) -> float:
        return self.rise / (self.epsilon**2 * self.length)

    @property
    def fitted(self) -> bool:
        if self.case == INCREASING:
            return self.C_plus is not None
        if self.case == DECREASING:
            return self.C_minus is not None
        if self.case == INTERIOR_MIN:
            return self.x_star is not None and self.u0 is not None
        return True


def classify_case(length: float, rise: float, epsilon: float) -> Analytic1DCase:
    """Tag the boundary-value problem and fit its constants."""
    if not length > 0 or not epsilon > 0:
        raise ParameterError("interval length and epsilon must be positive")
    S = rise / (epsilon**2 * length)
    if np.isclose(S, 1.0, rtol=0, atol=1e-14):
        case = LINEAR_PLUS
    elif np.isclose(S, -1.0, rtol=0, atol=1e-14):
        case = LINEAR_MINUS
    elif abs(rise) < _phi(length, epsilon):
        case = INTERIOR_MIN
    elif rise > 0:
        case = INCREASING
    else:
        case = DECREASING
    return fit_constants(Analytic1DCase(length, rise, epsilon, case))


def fit_constants(c: Analytic1DCase) -> Analytic1DCase:
    L, H, eps = c.length, c.rise, c.epsilon
    if c.case == INCREASING:
        # u = eps^2 x + C (1 - exp(-x/eps)) with u(L) = H
        return replace(c, C_plus=(H - eps**2 * L) / -np.expm1(-L / eps))
    if c.case == DECREASING:
        # u = -eps^2 x + C (1 - exp(x/eps)) with u(L) = H
        return replace(c, C_minus=(H + eps**2 * L) / -np.expm1(L / eps))
    if c.case == INTERIOR_MIN:
        gap = lambda xs: _phi(L - xs, eps) - _phi(xs, eps) - H  # noqa: E731
        lo, hi = 0.0, L
        assert gap(lo) > 0 > gap(hi), "valley case without a bracketing minimiser"
        xs = brentq(gap, lo, hi, xtol=1e-12, rtol=4 * np.finfo(float).eps)
        return replace(c, x_star=xs, u0=-float(_phi(xs, eps)))
    return c


def eval_analytic(c: Analytic1DCase, x) -> np.ndarray:
    if not c.fitted:
        raise ParameterError("constants have not been fitted")
    x = np.asarray(x, dtype=float)
    if np.any(x < -1e-12) or np.any(x > c.length + 1e-12):
        raise ParameterError("x must lie in [0, length]")
    eps, L = c.epsilon, c.length
    if c.case == LINEAR_PLUS:
        return eps**2 * x
    if c.case == LINEAR_MINUS:
        return -(eps**2) * x
    if c.case == INCREASING:
        return eps**2 * x - c.C_plus * np.expm1(-x / eps)
    if c.case == DECREASING:
        # C (1 - e^{x/eps}) rewritten to avoid overflow for small eps
        scale = (c.rise + eps**2 * L) * np.exp((x - L) / eps) * np.expm1(-x / eps) / np.expm1(-L / eps)
        return -(eps**2) * x + scale
    return _phi(np.abs(x - c.x_star), eps) + c.u0


def derivatives(c: Analytic1DCase, x):
    """``(u', u'')`` of the analytic solution, for residual checks."""
    x = np.asarray(x, dtype=float)
    eps, L = c.epsilon, c.length
    if c.case in (LINEAR_PLUS, LINEAR_MINUS):
        slope = eps**2 if c.case == LINEAR_PLUS else -(eps**2)
        return np.full_like(x, slope), np.zeros_like(x)
    if c.case == INCREASING:
        e = np.exp(-x / eps)
        return eps**2 + c.C_plus / eps * e, -c.C_plus / eps**2 * e
    if c.case == DECREASING:
        amp = (c.rise + eps**2 * L) / np.expm1(-L / eps)
        e = np.exp((x - L) / eps)
        return -(eps**2) - amp / eps * e, -amp / eps**2 * e
    s = x - c.x_star
    e = np.exp(-np.abs(s) / eps)
    return np.sign(s) * eps**2 * (1 - e), eps * e
