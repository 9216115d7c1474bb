"""Explicit Euler fixed-point iteration for the penalised obstacle scheme."""

from __future__ import annotations

import json
import logging
import time
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from . import _kernels
from .envelope1d import qce_line
from .grid import Grid, GridFunction, ParameterError
from .obstacle import Obstacle
from .operators import SchemeOperator, SchemeParams
from .stencil import Stencil

logger = logging.getLogger(__name__)

CONSTANT_MIN = "constant_min"
OBSTACLE = "obstacle"
SCHEMES = ("full", "first_order", "robust")


@dataclass
class SolverConfig:
    tol: float = 1e-6
    max_iter: int | None = None
    init: str = CONSTANT_MIN
    accel: str = "none"
    step_override: float | None = None
    record_every: int | None = None
    update: str = "euler"

    def __post_init__(self):
        if not self.tol > 0:
            raise ParameterError("tol must be positive")
        if self.max_iter is not None and self.max_iter < 1:
            raise ParameterError("max_iter must be at least 1")
        if self.init not in (CONSTANT_MIN, OBSTACLE):
            raise ParameterError(f"unknown init policy {self.init!r}")
        if self.accel not in ("none", "line_sweep"):
            raise ParameterError(f"unknown acceleration {self.accel!r}")
        if self.step_override is not None and not self.step_override > 0:
            raise ParameterError("step must be positive")
        if self.update not in ("euler", "projected"):
            raise ParameterError(f"unknown update rule {self.update!r}")


@dataclass
class SolveReport:
    iterations: int
    delta: float
    lipschitz_K: float
    converged: bool
    residual_final: float
    residual_history: list = field(default_factory=list)
    wall_time: float = 0.0
    accel_rounds: int = 0

    def to_dict(self) -> dict:
        return {
            "iterations": self.iterations,
            "delta": self.delta,
            "lipschitz_K": self.lipschitz_K,
            "converged": self.converged,
            "residual_final": self.residual_final,
            "wall_time_s": self.wall_time,
            "accel_rounds": self.accel_rounds,
        }

    def to_json(self, **extra) -> str:
        return json.dumps({**self.to_dict(), **extra}, indent=2, sort_keys=True)


def lipschitz_constant(epsilon: float, h: float, scheme: str = "full") -> float:
    """Bound on the derivative of the scheme in ``u(x)``.

    ``1/(eps h)`` from the upwind slope and ``2/h**2`` from the normalised
    second difference; cut arms are never shorter than ``h``.
    """
    if scheme == "full":
        return 1.0 / (epsilon * h) + 2.0 / h**2
    if scheme == "first_order":
        return max(1.0 / (epsilon * h), 1.0)
    if scheme == "robust":
        return 2.0 / h**2
    raise ParameterError(f"unknown scheme {scheme!r}")


def cfl_step(params: SchemeParams, grid: Grid, scheme: str = "full") -> tuple[float, float]:
    """Largest stable step ``delta = 1/K`` and the constant ``K``."""
    K = lipschitz_constant(params.epsilon, grid.h, scheme)
    return 1.0 / K, K


def initialize(g: Obstacle, grid: Grid, policy: str = CONSTANT_MIN) -> GridFunction:
    values = g.sample(grid).values
    if policy == CONSTANT_MIN:
        return GridFunction(grid, np.full(grid.shape, values.min()))
    if policy == OBSTACLE:
        return GridFunction(grid, values)
    raise ParameterError(f"unknown init policy {policy!r}")


@lru_cache(maxsize=32)
def _operator(grid: Grid, stencil: Stencil, obstacle: Obstacle) -> SchemeOperator:
    return SchemeOperator(grid, stencil, obstacle)


def scheme_operator(params: SchemeParams, grid: Grid) -> SchemeOperator:
    """Cached :class:`SchemeOperator` for the grid and the parameters' stencil and obstacle."""
    return _operator(grid, params.stencil, params.obstacle)


def _residual(op: SchemeOperator, u, epsilon, scheme, eps_r):
    if scheme == "full":
        return op.g_eps(u, epsilon)
    if scheme == "first_order":
        return op.g_first_order(u, epsilon)
    return op.g_robust(u, eps_r)


def euler_step(
    u: GridFunction,
    params: SchemeParams,
    delta: float,
    scheme: str = "full",
    eps_r=None,
    update: str = "euler",
):
    """One Jacobi step ``u - delta * G[u]`` with the boundary reset to ``g``.

    ``update="projected"`` uses ``min(g, u - delta * (eps - F))`` instead:
    the obstacle branch is scaled by ``1/delta``, which leaves the fixed
    points and the monotonicity unchanged but lets ``u`` rise at the speed
    of the scheme rather than at rate ``g - u``.

    Returns the new grid function and the sup-norm of the update.
    """
    op = scheme_operator(params, u.grid)
    new = _step(op, u.values, params.epsilon, delta, scheme, eps_r, update == "projected")
    return GridFunction(u.grid, new), float(np.abs(new - u.values).max())


def _step(op, u, epsilon, delta, scheme="full", eps_r=None, projected=False):
    """Vectorised step; ``u`` may carry leading batch axes."""
    if projected:
        flat = op._flat(u)
        new = flat.copy()
        inner = flat[..., op.interior]
        term = op.interior_term(u, scheme, epsilon, eps_r)
        new[..., op.interior] = np.minimum(op.g.reshape(-1)[op.interior], inner - delta * term)
        new = new.reshape(np.shape(u))
    else:
        new = u - delta * _residual(op, u, epsilon, scheme, eps_r)
    bmask = op.grid.boundary_mask
    new[..., bmask] = op.g.reshape(op.grid.shape)[bmask]
    return new


def _table(a, dtype):
    return np.ascontiguousarray(a.T, dtype=dtype)


class _FastStepper:
    """Compiled single-grid step writing into a preallocated buffer."""

    def __init__(self, op, epsilon, delta, scheme, eps_r, projected):
        self.op = op
        self.args = (
            op.ghost,
            op.interior.astype(np.int64),
            _table(op.nbr_plus, np.int64),
            _table(op.nbr_minus, np.int64),
            _table(op.inv_plus, float),
            _table(op.inv_minus, float),
            _table(op.curv, float),
            op.g.reshape(-1).astype(float),
            np.flatnonzero(op.grid.boundary_mask.reshape(-1)).astype(np.int64),
            float(epsilon if epsilon is not None else 1.0),
            float(eps_r if eps_r is not None else np.inf),
            float(delta),
            _kernels.SCHEME_CODES[scheme],
            bool(projected),
        )

    def __call__(self, u_flat, out_flat) -> float:
        return _kernels.fused_step(u_flat, *self.args, out_flat)


# -- line sweeps -----------------------------------------------------------


class LineSet:
    """Lattice lines of a grid along each stencil direction, as padded index tables.

    Padding entries point one past the last node, where the sweep stores
    ``+inf``.
    """

    def __init__(self, grid: Grid, directions):
        self.grid = grid
        self.tables = []
        n = grid.n
        idx = np.indices(grid.shape).reshape(grid.dim, -1).T
        flat = np.arange(grid.size)
        for v in np.atleast_2d(directions):
            prev = idx - v
            starts = np.flatnonzero(~np.all((prev >= 0) & (prev <= n - 1), axis=1))
            k0 = idx[starts]
            steps = np.full(len(starts), np.iinfo(np.int64).max)
            for i, vi in enumerate(v):
                if vi > 0:
                    steps = np.minimum(steps, (n - 1 - k0[:, i]) // vi + 1)
                elif vi < 0:
                    steps = np.minimum(steps, k0[:, i] // (-vi) + 1)
            longest = int(steps.max())
            j = np.arange(longest)
            pts = k0[:, None, :] + j[None, :, None] * v
            valid = j[None, :] < steps[:, None]
            pts = np.where(valid[..., None], pts, 0)
            table = np.where(valid, flat.reshape(grid.shape)[tuple(np.moveaxis(pts, -1, 0))], grid.size)
            self.tables.append(table)

    def gather(self, u_flat, table):
        ext = np.append(u_flat, np.inf)
        return ext[table]

    def defect(self, u) -> float:
        """Largest gap between ``u`` and its envelope along any line."""
        flat = np.asarray(u, dtype=float).reshape(-1)
        worst = 0.0
        for table in self.tables:
            lines = self.gather(flat, table)
            valid = table < self.grid.size
            gap = lines[valid] - qce_line(lines)[valid]
            worst = max(worst, float(np.max(gap, initial=0.0)))
        return worst

    def sweep(self, u) -> np.ndarray:
        flat = np.array(u, dtype=float).reshape(-1)
        for table in self.tables:
            env = qce_line(self.gather(flat, table))
            valid = table < self.grid.size
            flat[table[valid]] = env[valid]
        return flat.reshape(self.grid.shape)


@lru_cache(maxsize=32)
def line_set(grid: Grid, stencil: Stencil) -> LineSet:
    return LineSet(grid, stencil.half)


def line_sweep_round(u: GridFunction, stencil: Stencil, grid: Grid | None = None) -> GridFunction:
    """Replace ``u`` on every lattice line by its 1D quasiconvex envelope, one direction at a time."""
    grid = grid or u.grid
    return GridFunction(grid, line_set(grid, stencil).sweep(u.values))


# -- driver ----------------------------------------------------------------


def solve(
    g: Obstacle,
    grid: Grid,
    params: SchemeParams,
    config: SolverConfig | None = None,
    scheme: str = "full",
    eps_r: float | None = None,
    u0: GridFunction | None = None,
    callback=None,
) -> tuple[GridFunction, SolveReport]:
    """Iterate Euler steps until ``sup|u_{n+1} - u_n| <= tol * delta``.

    ``scheme`` selects the full penalised scheme, its first-order variant or
    the constrained (robust) curvature scheme with radius ``eps_r``.  With
    ``accel="line_sweep"`` a round of line sweeps follows every ``2n``
    steps until the update falls below ``100 * tol * delta``.
    Non-convergence is reported, not raised.  ``callback(it, u)`` is
    called after every step with the iterate as a node array; it must not
    keep a reference to ``u``, whose buffer is reused.
    """
    config = config or SolverConfig()
    if scheme not in SCHEMES:
        raise ParameterError(f"unknown scheme {scheme!r}")
    if scheme == "robust" and eps_r is None:
        raise ParameterError("the robust scheme needs eps_r")
    if g is not params.obstacle:
        params = SchemeParams(params.epsilon, params.stencil, g)
    delta, K = cfl_step(params, grid, scheme)
    if config.step_override is not None:
        if config.step_override > delta * (1 + 1e-12):
            raise ParameterError(f"step {config.step_override} exceeds the CFL bound {delta}")
        delta = config.step_override
    max_iter = config.max_iter or (1_000_000 if grid.dim == 1 else 200_000)
    block = 2 * grid.n
    record = config.record_every or block

    op = scheme_operator(params, grid)
    lines = line_set(grid, params.stencil) if config.accel == "line_sweep" else None
    u = (u0 if u0 is not None else initialize(g, grid, config.init)).values.copy()
    eps = params.epsilon

    projected = config.update == "projected"
    fast = _FastStepper(op, eps, delta, scheme, eps_r, projected) if _kernels.fused_step else None
    u = np.ascontiguousarray(u, dtype=float)
    buf = np.empty_like(u)

    start = time.perf_counter()
    history = []
    sweeping = lines is not None
    rounds = 0
    converged = False
    it = 0
    sup = np.inf
    while it < max_iter:
        if fast is not None:
            sup = fast(u.reshape(-1), buf.reshape(-1))
            u, buf = buf, u
        else:
            new = _step(op, u, eps, delta, scheme, eps_r, projected)
            sup = float(np.abs(new - u).max())
            u = new
        it += 1
        if callback is not None:
            callback(it, u)
        if it % record == 0:
            history.append((it, sup))
        if sup <= config.tol * delta:
            converged = True
            break
        if sweeping and it % block == 0:
            if sup < 100 * config.tol * delta:
                sweeping = False
            else:
                u = np.ascontiguousarray(lines.sweep(u))
                rounds += 1
    if not history or history[-1][0] != it:
        history.append((it, sup))
    wall = time.perf_counter() - start
    residual = float(np.abs(_residual(op, u, eps, scheme, eps_r)).max())
    if not converged:
        logger.warning("no convergence after %d iterations (update %.3g)", it, sup)
    report = SolveReport(it, delta, K, converged, residual, history, wall, rounds)
    return GridFunction(grid, u), report
