"""Directional finite differences, the penalised scheme and its continuous oracles.

Differences are normalised by the Euclidean arm length, so for a grid vector
``v`` they approximate derivatives along the unit direction ``v/|v|``:

    first  ~ |grad u . v_hat|            (upwind max of the two one-sided slopes)
    second ~ v_hat^T D^2u v_hat          (three-point, non-uniform near the boundary)

Arms that would leave the cube are cut at the boundary and read the obstacle
there.  Every coefficient keeps its sign, so the schemes stay monotone.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize_scalar

from .grid import Grid, GridFunction, ParameterError, exit_times
from .obstacle import Obstacle
from .stencil import Stencil

NORMALIZATION = "arm-length"


@dataclass(frozen=True)
class SchemeParams:
    epsilon: float
    stencil: Stencil
    obstacle: Obstacle

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ParameterError(f"epsilon must be positive, got {self.epsilon!r}")
        if self.stencil.dtheta > np.pi / 4 + 1e-12:
            raise ParameterError("stencil directional resolution exceeds pi/4")
        if self.stencil.dim != self.obstacle.dim:
            raise ParameterError("stencil and obstacle dimensions differ")


class SchemeOperator:
    """Whole-grid evaluation of the directional differences and the schemes.

    Neighbour tables are built once per (grid, stencil, obstacle).  Arrays
    passed in may carry leading batch axes: ``u`` has shape
    ``(..., *grid.shape)``.  Per-direction results have shape
    ``(..., n_dirs, n_interior)`` with directions taken from ``stencil.half``.
    """

    def __init__(self, grid: Grid, stencil: Stencil, obstacle: Obstacle):
        if not grid.dim == stencil.dim == obstacle.dim:
            raise ParameterError("grid, stencil and obstacle dimensions differ")
        self.grid = grid
        self.stencil = stencil
        self.obstacle = obstacle
        self.g = obstacle(grid.points)

        h, n = grid.h, grid.n
        flat = np.arange(grid.size).reshape(grid.shape)
        self.interior = np.flatnonzero(grid.interior_mask.reshape(-1))
        idx = np.stack(np.unravel_index(self.interior, grid.shape), axis=-1)
        x = grid.points.reshape(-1, grid.dim)[self.interior]

        dirs = stencil.half
        nbr = np.empty((2, len(dirs), len(self.interior)), dtype=np.intp)
        arm = np.empty((2, len(dirs), len(self.interior)))
        ghost_points = []
        n_ghost = 0
        for d, v in enumerate(dirs):
            length = np.linalg.norm(v)
            vhat = v / length
            for s, sign in enumerate((1, -1)):
                k = idx + sign * v
                fits = np.all((k >= 0) & (k <= n - 1), axis=1)
                nbr[s, d, fits] = flat[tuple(k[fits].T)]
                arm[s, d, fits] = h * length
                clipped = np.flatnonzero(~fits)
                if clipped.size:
                    t = exit_times(x[clipped], sign * vhat, grid.lower, grid.upper)
                    ghost_points.append(x[clipped] + (sign * t)[:, None] * vhat)
                    nbr[s, d, clipped] = grid.size + n_ghost + np.arange(clipped.size)
                    arm[s, d, clipped] = t
                    n_ghost += clipped.size
        if ghost_points:
            pts = np.clip(np.concatenate(ghost_points), grid.lower, grid.upper)
            self.ghost = np.asarray(obstacle(pts), dtype=float)
        else:
            self.ghost = np.empty(0)
        self.nbr_plus, self.nbr_minus = nbr
        self.arm_plus, self.arm_minus = arm
        self.inv_plus = 1.0 / arm[0]
        self.inv_minus = 1.0 / arm[1]
        self.curv = 2.0 / (arm[0] + arm[1])
        self.min_arm = float(arm.min()) if arm.size else h

    @property
    def n_dirs(self) -> int:
        return self.nbr_plus.shape[0]

    def _flat(self, u):
        u = np.asarray(u, dtype=float)
        if u.shape[u.ndim - self.grid.dim :] != self.grid.shape:
            raise ParameterError(f"expected trailing shape {self.grid.shape}, got {u.shape}")
        return u.reshape(u.shape[: u.ndim - self.grid.dim] + (self.grid.size,))

    def _extend(self, u):
        flat = self._flat(u)
        ghost = np.broadcast_to(self.ghost, flat.shape[:-1] + self.ghost.shape)
        return np.concatenate([flat, ghost], axis=-1)

    def slopes(self, u):
        """One-sided slopes ``(plus, minus)`` along every stencil direction."""
        ue = self._extend(u)
        centre = ue[..., None, self.interior]
        plus = (ue[..., self.nbr_plus] - centre) * self.inv_plus
        minus = (ue[..., self.nbr_minus] - centre) * self.inv_minus
        return plus, minus

    def first_diff(self, u):
        plus, minus = self.slopes(u)
        return np.maximum(plus, minus)

    def second_diff(self, u):
        plus, minus = self.slopes(u)
        return (plus + minus) * self.curv

    def f_eps(self, u, epsilon):
        """Minimum over directions of ``first/epsilon + second`` at interior nodes."""
        plus, minus = self.slopes(u)
        terms = np.maximum(plus, minus) / epsilon + (plus + minus) * self.curv
        return terms.min(axis=-2)

    def robust(self, u, eps_r):
        """Minimum of ``second`` over directions with ``first <= eps_r``; ``+inf`` if none."""
        plus, minus = self.slopes(u)
        first = np.maximum(plus, minus)
        second = (plus + minus) * self.curv
        return np.where(first <= eps_r, second, np.inf).min(axis=-2)

    def first_order(self, u, epsilon):
        """``-min_v first/epsilon``; the ``epsilon = h/2`` stand-in for ``-F``."""
        return -self.first_diff(u).min(axis=-2) / epsilon

    def interior_term(self, u, scheme, epsilon=None, eps_r=None):
        """The non-obstacle branch of the residual at interior nodes.

        ``epsilon - F`` for ``"full"``, ``epsilon - min first/epsilon`` for
        ``"first_order"`` and ``-lambda`` for ``"robust"``.
        """
        if scheme == "full":
            return epsilon - self.f_eps(u, epsilon)
        if scheme == "first_order":
            return epsilon + self.first_order(u, epsilon)
        if scheme == "robust":
            return -self.robust(u, eps_r)
        raise ParameterError(f"unknown scheme {scheme!r}")

    def _obstacle_form(self, u, interior_term):
        flat = self._flat(u)
        out = flat - self.g.reshape(-1)
        out[..., self.interior] = np.maximum(out[..., self.interior], interior_term)
        return out.reshape(np.shape(u))

    def g_eps(self, u, epsilon):
        """``max(u - g, epsilon - F)`` inside, ``u - g`` on the boundary."""
        return self._obstacle_form(u, self.interior_term(u, "full", epsilon))

    def g_first_order(self, u, epsilon):
        return self._obstacle_form(u, self.interior_term(u, "first_order", epsilon))

    def g_robust(self, u, eps_r):
        """``max(u - g, -lambda)`` with the constrained curvature ``lambda``."""
        return self._obstacle_form(u, self.interior_term(u, "robust", eps_r=eps_r))

    def interior_values(self, u):
        return self._flat(u)[..., self.interior]


# -- pointwise operators --------------------------------------------------


def _arms(u: GridFunction, node, v, g: Obstacle):
    grid = u.grid
    k = np.atleast_1d(np.asarray(node))
    if not np.issubdtype(k.dtype, np.integer):
        k = np.asarray(grid.index(k))
    if grid.classify(k) != "interior":
        raise ParameterError("directional differences are only defined at interior nodes")
    v = np.atleast_1d(np.asarray(v, dtype=int))
    x = grid.coordinate(k)
    length = float(np.linalg.norm(v))
    vhat = v / length
    reach = grid.ray_clip(x, vhat)
    arms = []
    for sign, t in zip((1, -1), reach):
        kk = k + sign * v
        if np.all((kk >= 0) & (kk <= grid.n - 1)):
            arms.append((u.values[tuple(kk)], grid.h * length))
        else:
            arms.append((float(g(x + sign * t * vhat)), t))
    return u.values[tuple(k)], arms


def first_diff(u: GridFunction, x, v, g: Obstacle) -> float:
    """Upwind slope along ``v/|v|`` at an interior node."""
    centre, arms = _arms(u, x, v, g)
    return max((val - centre) / a for val, a in arms)


def second_diff(u: GridFunction, x, v, g: Obstacle) -> float:
    """Three-point second difference along ``v/|v|``, non-uniform when an arm is cut."""
    centre, ((up, tp), (um, tm)) = _arms(u, x, v, g)
    return 2.0 * (tm * up + tp * um - (tp + tm) * centre) / (tp * tm * (tp + tm))


def f_eps_scheme(u: GridFunction, x, params: SchemeParams) -> float:
    eps, g = params.epsilon, params.obstacle
    return min(
        first_diff(u, x, v, g) / eps + second_diff(u, x, v, g) for v in params.stencil.vectors
    )


def g_eps_scheme(u: GridFunction, x, params: SchemeParams) -> float:
    k = np.atleast_1d(np.asarray(x))
    if not np.issubdtype(k.dtype, np.integer):
        k = np.asarray(u.grid.index(k))
    gap = u.values[tuple(k)] - float(params.obstacle(u.grid.coordinate(k)))
    if u.grid.classify(k) == "boundary":
        return gap
    return max(gap, params.epsilon - f_eps_scheme(u, k, params))


def robust_scheme(u: GridFunction, x, eps_r: float, stencil: Stencil, g: Obstacle) -> float:
    vals = [second_diff(u, x, v, g) for v in stencil.vectors if first_diff(u, x, v, g) <= eps_r]
    return min(vals, default=np.inf)


def first_order_scheme(u: GridFunction, x, params: SchemeParams) -> float:
    eps, g = params.epsilon, params.obstacle
    return -min(first_diff(u, x, v, g) for v in params.stencil.vectors) / eps


# -- continuous operators on quadratics -------------------------------------


@dataclass(frozen=True)
class QuadraticTestFunction:
    """``q(x) = x^T A x + b^T x + c``."""

    A: np.ndarray
    b: np.ndarray
    c: float = 0.0

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.A, dtype=float))
        if not np.allclose(A, A.T):
            raise ParameterError("A must be symmetric")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "b", np.atleast_1d(np.asarray(self.b, dtype=float)))

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        if len(self.b) == 1 and (x.ndim == 0 or x.shape[-1] != 1):
            x = x[..., None]
        return np.einsum("...i,ij,...j->...", x, self.A, x) + x @ self.b + self.c

    def gradient(self, x):
        return 2.0 * self.A @ np.atleast_1d(x) + self.b

    @property
    def hessian(self) -> np.ndarray:
        return 2.0 * self.A

    @classmethod
    def random(cls, rng, dim: int = 2, scale: float = 1.0) -> "QuadraticTestFunction":
        A = rng.uniform(-scale, scale, (dim, dim))
        return cls((A + A.T) / 2, rng.uniform(-scale, scale, dim), float(rng.uniform(-1, 1)))


def _phi(theta, p, M, eps):
    c, s = np.cos(theta), np.sin(theta)
    return np.abs(c * p[0] + s * p[1]) / eps + c * c * M[0, 0] + 2 * c * s * M[0, 1] + s * s * M[1, 1]


def f_eps_exact(p, M, epsilon: float, samples: int = 2**16) -> float:
    """``min over unit v of |v.p|/epsilon + v^T M v`` by angular sweep plus polishing."""
    p = np.atleast_1d(np.asarray(p, dtype=float))
    M = np.atleast_2d(np.asarray(M, dtype=float))
    if len(p) == 1:
        return float(abs(p[0]) / epsilon + M[0, 0])
    if samples < 10_000:
        raise ParameterError("use at least 10^4 angular samples")
    theta = np.linspace(0.0, np.pi, samples, endpoint=False)
    vals = _phi(theta, p, M, epsilon)
    i = int(vals.argmin())
    step = np.pi / samples
    res = minimize_scalar(
        _phi,
        bounds=(theta[i] - step, theta[i] + step),
        args=(p, M, epsilon),
        method="bounded",
        options={"xatol": 1e-13},
    )
    return float(min(vals[i], res.fun))


def lambda_exact(p, M, constraint="equality") -> float:
    """Least ``v^T M v`` over unit ``v`` with ``v.p = 0`` or ``|v.p| <= constraint``.

    In 2D the minimiser is an eigenvector of ``M`` if feasible, otherwise an
    end point of the feasible arcs, so the candidates are enumerated exactly.
    Returns ``inf`` when no direction is feasible.
    """
    p = np.atleast_1d(np.asarray(p, dtype=float))
    M = np.atleast_2d(np.asarray(M, dtype=float))
    r = 0.0 if constraint == "equality" else float(constraint)
    if r < 0:
        raise ParameterError("constraint radius must be nonnegative")
    norm = float(np.linalg.norm(p))
    if norm <= r or norm == 0.0:
        return float(np.linalg.eigvalsh(M)[0])
    if len(p) == 1:
        return np.inf
    base = np.arctan2(p[1], p[0])
    gap = np.arccos(r / norm)
    cands = [base + gap, base - gap, base + np.pi - gap, base - np.pi + gap]
    _, vecs = np.linalg.eigh(M)
    for vec in vecs.T:
        if abs(vec @ p) <= r:
            cands.append(np.arctan2(vec[1], vec[0]))
    v = np.stack([np.cos(cands), np.sin(cands)], axis=-1)
    return float(np.einsum("ki,ij,kj->k", v, M, v).min())


def lambda_sampled(p, M, eps_r: float, samples: int = 2**16) -> float:
    """Dense angular sampling of the constrained curvature; cross-check for :func:`lambda_exact`."""
    p = np.asarray(p, dtype=float)
    M = np.asarray(M, dtype=float)
    theta = np.linspace(0.0, np.pi, samples, endpoint=False)
    v = np.stack([np.cos(theta), np.sin(theta)], axis=-1)
    ok = np.abs(v @ p) <= eps_r
    if not ok.any():
        return np.inf
    return float(np.einsum("ki,ij,kj->k", v[ok], M, v[ok]).min())
