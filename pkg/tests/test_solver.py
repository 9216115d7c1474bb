import json

import numpy as np
import pytest

from qcenvelope import obstacle
from qcenvelope.envelope1d import qce_line
from qcenvelope.grid import GridFunction, ParameterError, make_grid
from qcenvelope.operators import SchemeParams
from qcenvelope.solver import (
    SolverConfig,
    cfl_step,
    euler_step,
    initialize,
    line_set,
    line_sweep_round,
    lipschitz_constant,
    solve,
)
from qcenvelope.stencil import make_stencil


def test_cfl_examples():
    assert lipschitz_constant(0.05, 0.1) == pytest.approx(400.0)
    assert lipschitz_constant(1.0, 1.0) == 3.0
    assert lipschitz_constant(1e12, 0.1) == pytest.approx(200.0)
    params = SchemeParams(0.05, make_stencil(1, 1), obstacle.double_well_1d())
    delta, K = cfl_step(params, make_grid(1, 21))
    assert K == pytest.approx(400.0) and delta == pytest.approx(1 / 400)
    assert lipschitz_constant(0.05, 0.1, "first_order") == pytest.approx(200.0)
    assert lipschitz_constant(0.05, 0.1, "robust") == pytest.approx(200.0)
    with pytest.raises(ParameterError):
        lipschitz_constant(0.1, 0.1, "implicit")


def test_initialize():
    g = obstacle.double_well_1d()
    grid = make_grid(1, 201)
    u = initialize(g, grid)
    assert np.all(u.values == pytest.approx(-0.3))
    p = obstacle.inverted_parabola_1d()
    assert initialize(p, grid, "obstacle").at([0.0]) == 1.0
    with pytest.raises(ParameterError):
        initialize(g, grid, "zero")


def test_euler_step_examples():
    g = obstacle.inverted_parabola_1d()
    grid = make_grid(1, 101)
    eps = grid.h / 2
    params = SchemeParams(eps, make_stencil(1, 1), g)
    delta, _ = cfl_step(params, grid)
    u = initialize(g, grid)
    new, sup = euler_step(u, params, delta)
    gv = g.sample(grid).values
    inner = grid.interior_mask & (u.values - gv < eps)
    assert np.allclose(new.values[inner], u.values[inner] - delta * eps)
    assert np.array_equal(new.values[grid.boundary_mask], gv[grid.boundary_mask])
    assert sup == pytest.approx(delta * eps)


def test_fixed_point_is_stationary():
    g = obstacle.double_well_1d()
    grid = make_grid(1, 33)
    params = SchemeParams(0.1, make_stencil(1, 1), g)
    u, rep = solve(g, grid, params, SolverConfig(tol=1e-13))
    assert rep.converged
    _, sup = euler_step(u, params, rep.delta)
    assert sup <= 1e-13 * rep.delta


@pytest.mark.parametrize("update", ["euler", "projected"])
def test_numba_and_numpy_steps_agree(update, monkeypatch):
    from qcenvelope import _kernels

    if _kernels.fused_step is None:
        pytest.skip("compiled kernel unavailable")
    g = obstacle.square_sdf()
    grid = make_grid(2, 21)
    params = SchemeParams(0.1, make_stencil(2, 2), g)
    config = SolverConfig(max_iter=300, update=update)
    fast, _ = solve(g, grid, params, config)
    monkeypatch.setattr(_kernels, "fused_step", None)
    slow, _ = solve(g, grid, params, config)
    assert np.abs(fast.values - slow.values).max() < 1e-12


@pytest.mark.parametrize("scheme,eps_r", [("first_order", None), ("robust", 0.3)])
def test_kernel_schemes_agree(scheme, eps_r, monkeypatch):
    from qcenvelope import _kernels

    if _kernels.fused_step is None:
        pytest.skip("compiled kernel unavailable")
    g = obstacle.pacman_sdf()
    grid = make_grid(2, 17)
    params = SchemeParams(grid.h / 2, make_stencil(2, 2), g)
    config = SolverConfig(max_iter=200)
    fast, _ = solve(g, grid, params, config, scheme=scheme, eps_r=eps_r)
    monkeypatch.setattr(_kernels, "fused_step", None)
    slow, _ = solve(g, grid, params, config, scheme=scheme, eps_r=eps_r)
    assert np.abs(fast.values - slow.values).max() < 1e-12


def test_step_override_above_cfl_rejected():
    g = obstacle.double_well_1d()
    grid = make_grid(1, 33)
    params = SchemeParams(0.1, make_stencil(1, 1), g)
    delta, _ = cfl_step(params, grid)
    with pytest.raises(ParameterError):
        solve(g, grid, params, SolverConfig(step_override=2 * delta))
    _, rep = solve(g, grid, params, SolverConfig(step_override=delta / 2, max_iter=10))
    assert rep.delta == delta / 2


def test_config_validation():
    for bad in [dict(tol=0), dict(max_iter=0), dict(init="x"), dict(accel="x"), dict(step_override=-1), dict(update="x")]:
        with pytest.raises(ParameterError):
            SolverConfig(**bad)
    g = obstacle.double_well_1d()
    params = SchemeParams(0.1, make_stencil(1, 1), g)
    with pytest.raises(ParameterError):
        solve(g, make_grid(1, 9), params, scheme="robust")
    with pytest.raises(ParameterError):
        solve(g, make_grid(1, 9), params, scheme="other")


def test_parabola_solves_to_zero():
    g = obstacle.inverted_parabola_1d()
    grid = make_grid(1, 201)
    params = SchemeParams(grid.h / 2, make_stencil(1, 1), g)
    u, rep = solve(g, grid, params, SolverConfig())
    assert rep.converged
    assert np.abs(u.values).max() <= 0.05
    assert rep.residual_history[-1][1] <= 1e-6 * rep.delta


def test_non_convergence_is_reported():
    g = obstacle.double_well_1d()
    grid = make_grid(1, 65)
    params = SchemeParams(grid.h / 2, make_stencil(1, 1), g)
    u, rep = solve(g, grid, params, SolverConfig(max_iter=5))
    assert not rep.converged and rep.iterations == 5


def test_report_json():
    g = obstacle.double_well_1d()
    grid = make_grid(1, 17)
    params = SchemeParams(0.2, make_stencil(1, 1), g)
    _, rep = solve(g, grid, params)
    data = json.loads(rep.to_json(example="double-well"))
    assert set(data) == {
        "iterations", "delta", "lipschitz_K", "converged", "residual_final", "wall_time_s", "accel_rounds", "example",
    }


def test_callback_sees_every_step():
    g = obstacle.double_well_1d()
    grid = make_grid(1, 17)
    params = SchemeParams(0.2, make_stencil(1, 1), g)
    seen = []
    _, rep = solve(g, grid, params, SolverConfig(max_iter=20), callback=lambda it, u: seen.append((it, u.max())))
    assert [s[0] for s in seen] == list(range(1, rep.iterations + 1))


def test_projected_update_has_same_fixed_point():
    g = obstacle.double_well_1d()
    grid = make_grid(1, 65)
    params = SchemeParams(0.05, make_stencil(1, 1), g)
    a, ra = solve(g, grid, params, SolverConfig(tol=1e-10))
    b, rb = solve(g, grid, params, SolverConfig(tol=1e-10, update="projected"))
    assert ra.converged and rb.converged
    assert np.abs(a.values - b.values).max() < 1e-6


def test_line_sweep_round():
    grid = make_grid(2, 9)
    st = make_stencil(2, 2)
    quasi = GridFunction(grid, (grid.points**2).sum(-1))
    assert np.array_equal(line_sweep_round(quasi, st).values, quasi.values)
    rng = np.random.default_rng(0)
    u = GridFunction(grid, rng.normal(size=grid.shape))
    swept = line_sweep_round(u, st)
    assert np.all(swept.values <= u.values)
    lines = line_set(grid, st)
    assert lines.defect(u.values) > 0
    # every node lies on exactly one line per direction
    for table in lines.tables:
        nodes = table[table < grid.size]
        assert np.array_equal(np.sort(nodes), np.arange(grid.size))


def test_line_sweep_1d_is_the_envelope():
    g = obstacle.double_well_1d()
    grid = make_grid(1, 101)
    u = g.sample(grid)
    assert np.array_equal(line_sweep_round(u, make_stencil(1, 1)).values, qce_line(u.values))


def test_acceleration_reaches_same_solution():
    g = obstacle.cone_with_circles()
    grid = make_grid(2, 24)
    params = SchemeParams(grid.h / 2, make_stencil(2, 1), g)
    a, ra = solve(g, grid, params, SolverConfig(tol=1e-8))
    b, rb = solve(g, grid, params, SolverConfig(tol=1e-8, init="obstacle", accel="line_sweep"))
    assert ra.converged and rb.converged
    assert rb.iterations < ra.iterations and rb.accel_rounds > 0
    assert np.abs(a.values - b.values).max() < 1e-4
