"""Executable checks of the structural properties of the schemes and their solutions.

Every check returns a :class:`CheckReport`; randomised checks take a seed
and are reproducible.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import RegularGridInterpolator

from .envelope1d import qce_line
from .grid import Grid, GridFunction, ParameterError, make_grid
from .obstacle import Obstacle
from .operators import (
    QuadraticTestFunction,
    SchemeOperator,
    SchemeParams,
    f_eps_exact,
    f_eps_scheme,
    lambda_exact,
)
from .solver import _step, cfl_step, line_set
from .stencil import Stencil, make_stencil


@dataclass
class CheckReport:
    name: str
    passed: bool
    worst_violation: float
    location: str | None = None
    samples: int = 0
    tolerance: float = 0.0
    details: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "passed": bool(self.passed),
            "worst_violation": float(self.worst_violation),
            "location": self.location,
            "samples": int(self.samples),
            "tolerance": float(self.tolerance),
            "details": self.details,
        }


def reports_to_json(reports) -> str:
    return json.dumps([r.to_dict() for r in reports], indent=2, sort_keys=True)


def _report(name, worst, tol, location=None, samples=0, **details) -> CheckReport:
    worst = float(worst)
    return CheckReport(name, worst <= tol, worst, location, samples, tol, details)


# -- quasiconvexity --------------------------------------------------------


def qc_along_stencil(u: GridFunction, stencil: Stencil, tol: float = 1e-3) -> CheckReport:
    """Largest gap between ``u`` and its 1D envelope over all lattice lines of the stencil."""
    lines = line_set(u.grid, stencil)
    flat = u.values.reshape(-1)
    worst, where = 0.0, None
    for v, table in zip(stencil.half, lines.tables):
        vals = lines.gather(flat, table)
        valid = table < u.grid.size
        gap = np.zeros(vals.shape)
        gap[valid] = vals[valid] - qce_line(vals)[valid]
        k = np.unravel_index(int(gap.argmax()), gap.shape)
        if gap[k] > worst:
            worst = float(gap[k])
            node = np.unravel_index(int(table[k]), u.grid.shape)
            where = f"direction {tuple(int(c) for c in v)} at node {tuple(int(c) for c in node)}"
    return _report("qc_along_stencil", worst, tol, where, len(lines.tables))


def approx_qc_offgrid(
    u: GridFunction,
    sample_dirs: int = 64,
    seed: int = 0,
    constant: float | None = None,
    dtheta: float | None = None,
) -> CheckReport:
    """Quasiconvexity defect of ``u`` along lines in random directions.

    Lines are spaced ``h`` apart, sampled every ``h`` and read through
    piecewise-linear interpolation.  The interpolant's own error is
    estimated from the largest nodal second difference (``h**2 |u''| / 8``)
    and reported next to the defect.  When ``dtheta`` is given the ratio
    ``defect / dtheta`` is reported as well, and the check passes when
    ``defect <= constant * dtheta``; without a constant it only reports.
    """
    grid = u.grid
    if grid.dim != 2:
        raise ParameterError("off-grid quasiconvexity is a 2D check")
    rng = np.random.default_rng(seed)
    interp = RegularGridInterpolator((grid.axis, grid.axis), u.values, method="linear")
    centre = 0.5 * (grid.lower + grid.upper)
    half = 0.5 * (grid.upper - grid.lower) * np.sqrt(2.0)
    s = np.arange(-half, half + grid.h, grid.h)
    worst, where = 0.0, None
    for theta in rng.uniform(0.0, np.pi, sample_dirs):
        w = np.array([np.cos(theta), np.sin(theta)])
        perp = np.array([-w[1], w[0]])
        pts = centre + s[:, None, None] * perp + s[None, :, None] * w
        inside = np.all((pts >= grid.lower) & (pts <= grid.upper), axis=-1)
        vals = np.full(inside.shape, np.inf)
        vals[inside] = interp(pts[inside])
        gap = np.zeros(vals.shape)
        gap[inside] = vals[inside] - qce_line(vals)[inside]
        k = np.unravel_index(int(gap.argmax()), gap.shape)
        if gap[k] > worst:
            worst = float(gap[k])
            where = f"theta={theta:.6f} at x=({pts[k][0]:.4f}, {pts[k][1]:.4f})"
    second = max(np.abs(np.diff(u.values, 2, axis=a)).max() for a in range(2))
    details = {"interpolation_error": float(second) / 8}
    tol = np.inf
    if dtheta is not None and dtheta > 0:
        details["ratio_to_dtheta"] = worst / dtheta
        if constant is not None:
            tol = constant * dtheta
    return _report("approx_qc_offgrid", worst, tol, where, sample_dirs, **details)


def qce_hull_oracle(a) -> np.ndarray:
    """Envelope through sublevel sets: the value at ``i`` is the least ``t``
    for which ``i`` lies between two entries ``<= t``.  Works along the last axis."""
    a = np.asarray(a, dtype=float)
    n = a.shape[-1]
    idx = np.arange(n)
    out = np.full(a.shape, np.inf)
    for t in np.unique(a):
        below = a <= t
        any_below = below.any(axis=-1, keepdims=True)
        first = np.argmax(below, axis=-1)[..., None]
        last = n - 1 - np.argmax(below[..., ::-1], axis=-1)[..., None]
        covered = any_below & (idx >= first) & (idx <= last)
        out = np.where(covered, np.minimum(out, t), out)
    return out


def _is_quasiconvex(q) -> np.ndarray:
    """True where no entry is strictly above an earlier and a later entry (brute force)."""
    q = np.asarray(q)
    n = q.shape[-1]
    ok = np.ones(q.shape[:-1], dtype=bool)
    for j, i, k in itertools.combinations(range(n), 3):
        ok &= q[..., i] <= np.maximum(q[..., j], q[..., k])
    return ok


def qce_brute_force(a, values) -> np.ndarray:
    """Pointwise maximum of every quasiconvex sequence over ``values`` lying below ``a``."""
    a = np.asarray(a, dtype=float)
    cands = np.array(list(itertools.product(values, repeat=a.shape[-1])), dtype=float)
    cands = cands[_is_quasiconvex(cands)]
    below = np.all(cands[None, :, :] <= a.reshape(-1, 1, a.shape[-1]), axis=-1)
    out = np.where(below[..., None], cands[None], -np.inf).max(axis=1)
    return out.reshape(a.shape)


def qce_oracle_check(max_length: int = 8, n_values: int = 5, brute_length: int = 5) -> CheckReport:
    """Compare :func:`qce_line` with the sublevel-set oracle on every sequence.

    Sequences of length up to ``brute_length`` are also checked against
    :func:`qce_brute_force`, which validates the oracle itself.
    """
    values = np.arange(n_values, dtype=float)
    worst, where, samples = 0.0, None, 0
    for length in range(1, max_length + 1):
        seqs = np.array(list(itertools.product(values, repeat=length)), dtype=float)
        got = qce_line(seqs)
        ref = qce_hull_oracle(seqs)
        err = np.abs(got - ref).max(axis=-1)
        if length <= brute_length:
            err = np.maximum(err, np.abs(ref - qce_brute_force(seqs, values)).max(axis=-1))
        samples += len(seqs)
        k = int(err.argmax())
        if err[k] > worst:
            worst, where = float(err[k]), f"sequence {seqs[k].tolist()}"
    return _report("qce_line_oracle", worst, 0.0, where, samples)


# -- consistency -----------------------------------------------------------


def quadratic_obstacle(q: QuadraticTestFunction, lower: float = -1.0, upper: float = 1.0) -> Obstacle:
    return Obstacle("quadratic", len(q.b), q, lower, upper)


def direction_restricted(p, M, epsilon, unit_dirs) -> float:
    """``min over the given unit directions of |v.p|/eps + v^T M v``."""
    v = np.asarray(unit_dirs, dtype=float)
    return float((np.abs(v @ p) / epsilon + np.einsum("ki,ij,kj->k", v, M, v)).min())


@dataclass
class ConsistencyTable:
    rows: list
    slopes: dict

    def to_csv(self) -> str:
        head = "W,N,h,dtheta,error,h_error,dtheta_floor"
        lines = [head] + [
            f"{r['W']},{r['N']},{r['h']!r},{r['dtheta']!r},{r['error']!r},{r['h_error']!r},{r['dtheta_floor']!r}"
            for r in self.rows
        ]
        return "\n".join(lines) + "\n"

    def errors(self, W) -> list:
        return [r["error"] for r in self.rows if r["W"] == W]


def consistency_sweep(quadratics, epsilon, W_list, N_list, points=None) -> ConsistencyTable:
    """Scheme error on quadratics for each stencil width and grid size.

    ``error`` is the largest ``|f_eps_scheme - f_eps_exact|`` over the
    quadratics and the evaluation points.  It splits into ``h_error``, the
    distance to the minimum over the stencil's own directions, and
    ``dtheta_floor``, the distance from that minimum to the exact one, which
    does not depend on ``h``.  Slopes are fitted to ``log h_error`` against
    ``log h`` for every width.
    """
    quadratics = list(quadratics)
    dim = len(quadratics[0].b)
    if points is None:
        ax = (-0.5, 0.0, 0.5)
        points = np.array(list(itertools.product(ax, repeat=dim)))
    points = np.asarray(points, dtype=float).reshape(-1, dim)
    rows = []
    for W in W_list:
        st = make_stencil(dim, W)
        units = st.unit_half
        for N in N_list:
            grid = make_grid(dim, N)
            nodes = [grid.index(x) for x in points]
            if any(not np.allclose(grid.coordinate(k), x) for k, x in zip(nodes, points)):
                raise ParameterError(f"evaluation points are not nodes of the N={N} grid")
            err = h_err = floor = 0.0
            for q in quadratics:
                ob = quadratic_obstacle(q)
                u = ob.sample(grid)
                params = SchemeParams(epsilon, st, ob)
                M = q.hessian
                for k, x in zip(nodes, points):
                    p = q.gradient(x)
                    scheme = f_eps_scheme(u, k, params)
                    exact = f_eps_exact(p, M, epsilon)
                    restricted = direction_restricted(p, M, epsilon, units)
                    err = max(err, abs(scheme - exact))
                    h_err = max(h_err, abs(scheme - restricted))
                    floor = max(floor, abs(restricted - exact))
            rows.append(
                {"W": W, "N": N, "h": grid.h, "dtheta": st.dtheta, "error": float(err), "h_error": float(h_err), "dtheta_floor": float(floor)}
            )
    slopes = {}
    for W in W_list:
        sel = [r for r in rows if r["W"] == W and r["h_error"] > 0]
        if len(sel) >= 2:
            slope, _ = np.polyfit(np.log([r["h"] for r in sel]), np.log([r["h_error"] for r in sel]), 1)
            slopes[W] = float(slope)
    return ConsistencyTable(rows, slopes)


# -- fuzzing -----------------------------------------------------------------


def _fuzz_grid(params: SchemeParams, n: int | None) -> Grid:
    ob = params.obstacle
    if n is None:
        n = 17 if ob.dim == 1 else 9
    return Grid(ob.dim, n, ob.lower, ob.upper)


def ellipticity_fuzz(params: SchemeParams, trials: int = 10_000, seed: int = 0, n: int | None = None) -> CheckReport:
    """Raise one value of a random grid function and watch ``G`` at one node.

    Raising the node itself must not lower ``G`` there; raising any other
    node must not raise it.  Half the trials perturb the centre, half a
    stencil neighbour.
    """
    if trials < 1:
        raise ParameterError("trials must be at least 1")
    rng = np.random.default_rng(seed)
    grid = _fuzz_grid(params, n)
    op = SchemeOperator(grid, params.stencil, params.obstacle)
    eps = params.epsilon
    u = rng.uniform(-1.0, 1.0, (trials,) + grid.shape)
    node = rng.choice(op.interior, trials)
    centre = rng.random(trials) < 0.5
    # neighbour of the chosen node along a random stencil direction, or a random node if it is cut
    d = rng.integers(op.n_dirs, size=trials)
    pos = np.searchsorted(op.interior, node)
    side = rng.random(trials) < 0.5
    nbr = np.where(side, op.nbr_plus[d, pos], op.nbr_minus[d, pos])
    nbr = np.where(nbr < grid.size, nbr, rng.integers(grid.size, size=trials))
    nbr = np.where(nbr == node, (node + 1) % grid.size, nbr)
    target = np.where(centre, node, nbr)
    bump = rng.exponential(1.0, trials)

    rows = np.arange(trials)
    before = op.g_eps(u, eps).reshape(trials, -1)[rows, node]
    flat = u.reshape(trials, -1).copy()
    flat[rows, target] += bump
    after = op.g_eps(flat.reshape(u.shape), eps).reshape(trials, -1)[rows, node]
    scale = 1e-12 * (1 + np.abs(before))
    viol = np.where(centre, before - after, after - before) - scale
    k = int(viol.argmax())
    worst = max(float(viol[k]), 0.0)
    where = f"trial {k} ({'centre' if centre[k] else 'neighbour'} raise)" if worst > 0 else None
    return _report("ellipticity_fuzz", worst, 0.0, where, trials)


def _solve_forced(op, f, eps, delta, u, iters):
    """Iterate ``u <- u - delta (G[u] - f)``; returns ``u`` and the last update size."""
    upd = np.inf
    for _ in range(iters):
        new = u - delta * (op.g_eps(u, eps) - f)
        upd = float(np.abs(new - u).max())
        u = new
        if upd < 1e-14:
            break
    return u, upd


def comparison_fuzz(
    params: SchemeParams,
    trials: int = 1000,
    seed: int = 0,
    n: int | None = None,
    max_iter: int = 200_000,
) -> CheckReport:
    """Solve ``G[u] = f1`` and ``G[v] = f2`` with ``f1 < f2`` everywhere and check ``u <= v``.

    The boundary rows of ``G`` are ``u - g``, so ``f1 < f2`` also orders
    the boundary data.  Both problems are relaxed together as one batch.
    """
    if trials < 1:
        raise ParameterError("trials must be at least 1")
    rng = np.random.default_rng(seed)
    grid = _fuzz_grid(params, n)
    op = SchemeOperator(grid, params.stencil, params.obstacle)
    eps = params.epsilon
    delta = 1.0 / (1.0 / (eps * op.min_arm) + 2.0 / op.min_arm**2 + 1.0)
    f1 = rng.uniform(-0.5, 0.5, (trials,) + grid.shape)
    f2 = f1 + rng.uniform(0.01, 0.5, f1.shape)
    f = np.concatenate([f1, f2])
    start = rng.uniform(-1.0, 1.0, f.shape)
    w, upd = _solve_forced(op, f, eps, delta, start, max_iter)
    resid = float(np.abs(op.g_eps(w, eps) - f).max())
    u, v = w[:trials], w[trials:]
    gap = (u - v).reshape(trials, -1).max(axis=1)
    k = int(gap.argmax())
    worst = max(float(gap[k]), 0.0)
    where = f"pair {k}" if worst > 0 else None
    return _report("comparison_fuzz", worst, 1e-9, where, trials, fixed_point_residual=resid, last_update=upd)


def euler_monotonicity_fuzz(
    params: SchemeParams,
    trials: int = 1000,
    seed: int = 0,
    n: int | None = None,
    scheme: str = "full",
    eps_r: float | None = None,
    delta: float | None = None,
) -> CheckReport:
    """For ``u <= v`` the step keeps ``S(u) <= S(v)`` and ``|S(u) - S(v)| <= |u - v|``.

    ``delta`` defaults to the CFL step; larger steps should fail.
    """
    if trials < 1:
        raise ParameterError("trials must be at least 1")
    rng = np.random.default_rng(seed)
    grid = _fuzz_grid(params, n)
    op = SchemeOperator(grid, params.stencil, params.obstacle)
    if delta is None:
        delta, _ = cfl_step(params, grid, scheme)
    u = rng.uniform(-1.0, 1.0, (trials,) + grid.shape)
    # sparse and dense gaps both matter: sparse ones isolate single coefficients
    gap = rng.exponential(0.5, u.shape) * (rng.random(u.shape) < rng.random((trials,) + (1,) * grid.dim))
    v = u + gap
    worst, where = 0.0, None
    for projected in (False, True):
        su = _step(op, u, params.epsilon, delta, scheme, eps_r, projected)
        sv = _step(op, v, params.epsilon, delta, scheme, eps_r, projected)
        order = (su - sv).reshape(trials, -1).max(axis=1)
        expand = np.abs(su - sv).reshape(trials, -1).max(axis=1) - np.abs(gap).reshape(trials, -1).max(axis=1)
        viol = np.maximum(order, expand) - 1e-12
        k = int(viol.argmax())
        if viol[k] > worst:
            worst = float(viol[k])
            where = f"pair {k} ({'projected' if projected else 'euler'} update)"
    return _report("euler_monotonicity_fuzz", worst, 0.0, where, trials)


# -- operator ordering -------------------------------------------------------


def ordering_audit(quadratics, eps_list, tol: float = 1e-5, seed: int = 0) -> CheckReport:
    """Check ``-lambda_QC <= -lambda^{eps^2} <= eps - F^eps`` at a random point of each quadratic.

    The left inequality holds because the constraint set grows with the
    radius; the right one because every direction with ``|v.p| <= eps**2``
    gives ``F^eps <= eps + v^T M v``.
    """
    rng = np.random.default_rng(seed)
    worst, where, samples = 0.0, None, 0
    for i, q in enumerate(quadratics):
        x = rng.uniform(-1.0, 1.0, len(q.b))
        p, M = q.gradient(x), q.hessian
        lam_qc = lambda_exact(p, M)
        for eps in eps_list:
            lam_r = lambda_exact(p, M, eps**2)
            rhs = eps - f_eps_exact(p, M, eps)
            v1 = -lam_qc - (-lam_r)
            v2 = -lam_r - rhs
            v = max(v1, v2)
            samples += 1
            if v > worst:
                worst, where = v, f"quadratic {i}, eps={eps}"
    return _report("ordering_audit", worst, tol, where, samples)


# -- solution audits ---------------------------------------------------------


def solution_audit(u: GridFunction, params: SchemeParams, tol: float, delta: float, qc_tol: float = 1e-3) -> list:
    """Obstacle, stability, non-contact curvature and stencil-quasiconvexity checks of a solve."""
    grid = u.grid
    g = params.obstacle.sample(grid).values
    eps = params.epsilon
    out = [_report("obstacle_bound", max((u.values - g).max(), 0.0), tol)]
    floor = g.min() - 4 * eps**2 * grid.dim
    out.append(_report("stability_lower_bound", max((floor - u.values).max(), 0.0), tol))
    op = SchemeOperator(grid, params.stencil, params.obstacle)
    F = op.f_eps(u.values, eps)
    inner = op.interior_values(u.values)
    free = inner < op.g.reshape(-1)[op.interior] - tol
    need = eps - 10 * tol / delta
    short = float((need - F[free]).max()) if free.any() else 0.0
    out.append(_report("non_contact_curvature", max(short, 0.0), 0.0, samples=int(free.sum())))
    resid = float(np.abs(op.g_eps(u.values, eps)).max())
    out.append(_report("residual", resid, tol / delta))
    out.append(qc_along_stencil(u, params.stencil, qc_tol))
    return out
