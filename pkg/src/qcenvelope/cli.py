"""Command-line experiment runner.

Every subcommand writes its artifacts into ``--out`` (created if needed).
CSV files carry the full configuration as ``# key=value`` comment lines and
JSON files under a ``config`` key.  Exit status: 0 on success, 2 on a usage
error, 3 when some solve did not converge (artifacts are still written).
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import verify
from .envelope1d import qce_line
from .grid import GridFunction, ParameterError, make_grid
from .obstacle import CORPUS, get
from .operators import NORMALIZATION, QuadraticTestFunction, SchemeParams
from .solver import SolverConfig, line_sweep_round, solve
from .stencil import make_stencil

EXIT_OK, EXIT_USAGE, EXIT_NONCONVERGED = 0, 2, 3

logger = logging.getLogger("qcenvelope")

INIT_FLAGS = {"min": "constant_min", "obstacle": "obstacle"}
ACCEL_FLAGS = {"none": "none", "line": "line_sweep"}


def _floats(text):
    return [float(t) for t in text.split(",") if t]


def _ints(text):
    return [int(t) for t in text.split(",") if t]


def _add_solver_flags(p, example="square", accel=True):
    p.add_argument("--example", default=example, help=f"one of {', '.join(sorted(CORPUS))}")
    p.add_argument("--n", type=int, default=None, help="points per axis (default 201 in 1D, 64 in 2D)")
    p.add_argument("--width", type=int, default=None, help="stencil width W (default 2 in 2D)")
    p.add_argument("--eps", type=float, default=None, help="epsilon (default h/2)")
    p.add_argument("--tol", type=float, default=1e-6)
    p.add_argument("--max-iter", type=int, default=None)
    p.add_argument("--init", choices=sorted(INIT_FLAGS), default="min")
    if accel:
        p.add_argument("--accel", choices=sorted(ACCEL_FLAGS), default="none")
    p.add_argument("--update", choices=("euler", "projected"), default="euler")
    p.add_argument("--step", type=float, default=None, help="Euler step, at most the CFL bound")
    p.add_argument("--out", default="out")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qcenvelope", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="solve one obstacle problem")
    _add_solver_flags(p)

    p = sub.add_parser("eps-sweep", help="solve for several epsilons and compare with the line-sweep envelope")
    _add_solver_flags(p, example="double-well")
    p.set_defaults(update="projected")
    p.add_argument("--eps-list", type=_floats, default=[0.2, 0.1, 0.05, 1e-3, 1e-4], dest="eps_list")

    p = sub.add_parser("accel-table", help="iterations with and without line-sweep acceleration")
    _add_solver_flags(p, example="circles", accel=False)
    p.add_argument("--n-list", type=_ints, default=[32, 64, 128], dest="n_list")

    p = sub.add_parser("consistency-report", help="scheme error on random quadratics")
    p.add_argument("--eps", type=float, default=0.5)
    p.add_argument("--width-list", type=_ints, default=[1, 2, 3, 5], dest="width_list")
    p.add_argument("--n-list", type=_ints, default=[33, 65, 129, 257], dest="n_list")
    p.add_argument("--quadratics", type=int, default=20)
    p.add_argument("--dim", type=int, default=2, choices=(1, 2))
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="out")

    p = sub.add_parser("verify", help="run the structural checks and emit a JSON array of reports")
    _add_solver_flags(p)
    p.add_argument("--trials", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--no-solve", action="store_true", help="skip the solution audit")

    p = sub.add_parser("compare-robust", help="full scheme against the constrained-curvature scheme")
    _add_solver_flags(p, example="circles")
    p.add_argument("--eps-r", type=float, default=None, help="constraint radius (default: epsilon)")

    p = sub.add_parser("compare-first-order", help="full scheme against its first-order variant")
    _add_solver_flags(p)
    return parser


# -- shared plumbing ---------------------------------------------------------


def _setup(args, n=None):
    ob = get(args.example)
    n = n or args.n or (201 if ob.dim == 1 else 64)
    if n < 3:
        raise ParameterError("--n must be at least 3")
    width = args.width or (1 if ob.dim == 1 else 2)
    grid = make_grid(ob.dim, n, ob.lower, ob.upper)
    stencil = make_stencil(ob.dim, width)
    eps = args.eps if args.eps is not None else grid.h / 2
    return ob, grid, SchemeParams(eps, stencil, ob)


def _config(args, **over) -> SolverConfig:
    fields = dict(
        tol=args.tol,
        max_iter=args.max_iter,
        init=INIT_FLAGS[args.init],
        accel=ACCEL_FLAGS[getattr(args, "accel", "none")],
        step_override=args.step,
        update=args.update,
    )
    fields.update(over)
    return SolverConfig(**fields)


def _meta(args, params=None, grid=None, config=None, **extra) -> dict:
    meta = {"command": args.command, "normalization": NORMALIZATION}
    for key in ("example", "seed"):
        if hasattr(args, key):
            meta[key] = getattr(args, key)
    if grid is not None:
        meta.update(dim=grid.dim, N=grid.n)
    if params is not None:
        meta.update(width=params.stencil.width, epsilon=repr(float(params.epsilon)), dtheta=repr(params.stencil.dtheta))
    if config is not None:
        meta.update(
            tol=repr(config.tol),
            max_iter=config.max_iter,
            init=config.init,
            accel=config.accel,
            update=config.update,
            step=config.step_override,
        )
    meta.update(extra)
    return meta


def _write_json(path: Path, data):
    path.write_text(json.dumps(data, indent=2, sort_keys=True, default=_jsonable) + "\n")


def _jsonable(obj):
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def _solve_and_write(args, out, stem, ob, grid, params, config, scheme="full", eps_r=None, **extra):
    u, report = solve(ob, grid, params, config, scheme=scheme, eps_r=eps_r)
    meta = _meta(args, params, grid, config, scheme=scheme, **extra)
    if eps_r is not None:
        meta["eps_r"] = repr(float(eps_r))
    u.to_csv(out / f"{stem}.csv", meta)
    _write_json(out / f"{stem}_report.json", {**report.to_dict(), "config": meta})
    return u, report


def envelope_by_sweeps(g: GridFunction, stencil, max_rounds: int = 10_000) -> GridFunction:
    """Line sweeps of ``g`` repeated until nothing changes: the stencil-line envelope."""
    if g.grid.dim == 1:
        return GridFunction(g.grid, qce_line(g.values))
    u = g
    for _ in range(max_rounds):
        new = line_sweep_round(u, stencil)
        if np.array_equal(new.values, u.values):
            break
        u = new
    return u


# -- subcommands ---------------------------------------------------------------


def cmd_solve(args, out) -> int:
    ob, grid, params = _setup(args)
    config = _config(args)
    u, report = _solve_and_write(args, out, "solution", ob, grid, params, config)
    print(report.to_json())
    return EXIT_OK if report.converged else EXIT_NONCONVERGED


def cmd_eps_sweep(args, out) -> int:
    ob, grid, params0 = _setup(args)
    config = _config(args)
    target = envelope_by_sweeps(ob.sample(grid), params0.stencil)
    target.to_csv(out / "line_sweep_envelope.csv", _meta(args, params0, grid))
    rows = ["epsilon,iterations,converged,sup_distance,max_above"]
    ok = True
    for eps in args.eps_list:
        params = SchemeParams(eps, params0.stencil, ob)
        u, report = _solve_and_write(args, out, f"solution_eps_{eps!r}", ob, grid, params, config)
        dist = float(np.abs(u.values - target.values).max())
        above = float((u.values - target.values).max())
        rows.append(f"{eps!r},{report.iterations},{report.converged},{dist!r},{above!r}")
        ok &= report.converged
    (out / "summary.csv").write_text("\n".join(rows) + "\n")
    print("\n".join(rows))
    return EXIT_OK if ok else EXIT_NONCONVERGED


def accel_table(example="circles", n_list=(32, 64, 128), width=1, tol=1e-6, max_iter=1_000_000, update="euler"):
    """Rows ``(n, iterations_plain, iterations_accelerated, converged)``.

    The plain run starts from the constant ``min g``; the accelerated run
    starts from the obstacle, the only start from which the lowering line
    sweeps can help.  Both use epsilon = h/2.
    """
    ob = get(example)
    rows = []
    for n in n_list:
        grid = make_grid(ob.dim, n, ob.lower, ob.upper)
        params = SchemeParams(grid.h / 2, make_stencil(ob.dim, width), ob)
        plain = SolverConfig(tol=tol, max_iter=max_iter, update=update)
        fast = SolverConfig(tol=tol, max_iter=max_iter, init="obstacle", accel="line_sweep", update=update)
        _, rp = solve(ob, grid, params, plain)
        _, ra = solve(ob, grid, params, fast)
        rows.append((n, rp.iterations, ra.iterations, rp.converged and ra.converged))
    return rows


def cmd_accel_table(args, out) -> int:
    width = args.width or 1
    max_iter = args.max_iter or 1_000_000
    rows = accel_table(args.example, args.n_list, width, args.tol, max_iter, args.update)
    lines = ["n,iterations_plain,iterations_accelerated,ratio,converged"]
    lines += [f"{n},{p},{a},{p / a!r},{c}" for n, p, a, c in rows]
    meta = _meta(args, width=width, tol=repr(args.tol), max_iter=max_iter, update=args.update)
    header = "".join(f"# {k}={v}\n" for k, v in meta.items())
    (out / "accel_table.csv").write_text(header + "\n".join(lines) + "\n")
    print("\n".join(lines))
    return EXIT_OK if all(r[3] for r in rows) else EXIT_NONCONVERGED


def cmd_consistency(args, out) -> int:
    rng = np.random.default_rng(args.seed)
    quads = [QuadraticTestFunction.random(rng, args.dim) for _ in range(args.quadratics)]
    table = verify.consistency_sweep(quads, args.eps, args.width_list, args.n_list)
    meta = _meta(args, epsilon=repr(args.eps), quadratics=args.quadratics)
    header = "".join(f"# {k}={v}\n" for k, v in meta.items())
    (out / "consistency.csv").write_text(header + table.to_csv())
    _write_json(out / "consistency_slopes.json", {"slopes": {str(k): v for k, v in table.slopes.items()}, "config": meta})
    print(table.to_csv(), end="")
    print(json.dumps({str(k): v for k, v in table.slopes.items()}))
    return EXIT_OK


def cmd_verify(args, out) -> int:
    ob, grid, params = _setup(args)
    reports = [
        verify.ellipticity_fuzz(params, 10 * args.trials, args.seed),
        verify.comparison_fuzz(params, args.trials, args.seed),
        verify.euler_monotonicity_fuzz(params, args.trials, args.seed),
        verify.qce_oracle_check(),
    ]
    rng = np.random.default_rng(args.seed)
    quads = [QuadraticTestFunction.random(rng, 2) for _ in range(100)]
    reports.append(verify.ordering_audit(quads, [0.05, 0.1, 0.5], seed=args.seed))
    converged = True
    if not args.no_solve:
        config = _config(args)
        u, report = _solve_and_write(args, out, "solution", ob, grid, params, config)
        converged = report.converged
        reports += verify.solution_audit(u, params, config.tol, report.delta)
    text = verify.reports_to_json(reports)
    (out / "verify.json").write_text(text + "\n")
    print(text)
    if not converged:
        return EXIT_NONCONVERGED
    return EXIT_OK if all(r.passed for r in reports) else 1


def cmd_compare_robust(args, out) -> int:
    ob, grid, params = _setup(args)
    eps_r = args.eps_r if args.eps_r is not None else params.epsilon
    config = _config(args)
    note = "robust scheme in the Euler obstacle loop; expect poor accuracy on wide stencils"
    extra = {}
    if args.example == "circles":
        extra["obstacle_note"] = "cone_with_circles stands in for the unspecified robust-comparison obstacle"
    u, ru = _solve_and_write(args, out, "full", ob, grid, params, config, label="full penalised scheme", **extra)
    v, rv = _solve_and_write(args, out, "robust", ob, grid, params, config, "robust", eps_r, label=note, **extra)
    diff = GridFunction(grid, u.values - v.values)
    diff.to_csv(out / "difference.csv", _meta(args, params, grid, config, label="full minus robust"))
    summary = {
        "sup_difference": float(np.abs(diff.values).max()),
        "eps_r": eps_r,
        "config": _meta(args, params, grid, config, **extra),
    }
    _write_json(out / "summary.json", summary)
    print(json.dumps(summary, indent=2, sort_keys=True))
    return EXIT_OK if ru.converged and rv.converged else EXIT_NONCONVERGED


def cmd_compare_first_order(args, out) -> int:
    ob, grid, params = _setup(args)
    config = _config(args)
    u, ru = _solve_and_write(args, out, "full", ob, grid, params, config)
    v, rv = _solve_and_write(args, out, "first_order", ob, grid, params, config, "first_order")
    summary = {
        "sup_distance": float(np.abs(u.values - v.values).max()),
        "h": grid.h,
        "config": _meta(args, params, grid, config),
    }
    _write_json(out / "summary.json", summary)
    print(json.dumps(summary, indent=2, sort_keys=True))
    return EXIT_OK if ru.converged and rv.converged else EXIT_NONCONVERGED


COMMANDS = {
    "solve": cmd_solve,
    "eps-sweep": cmd_eps_sweep,
    "accel-table": cmd_accel_table,
    "consistency-report": cmd_consistency,
    "verify": cmd_verify,
    "compare-robust": cmd_compare_robust,
    "compare-first-order": cmd_compare_first_order,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    out = Path(args.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
        return COMMANDS[args.command](args, out)
    except ParameterError as exc:
        print(f"qcenvelope: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
