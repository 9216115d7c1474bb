import numpy as np
import pytest

from qcenvelope import obstacle
from qcenvelope.grid import GridFunction, ParameterError, make_grid
from qcenvelope.obstacle import Obstacle
from qcenvelope.operators import (
    QuadraticTestFunction,
    SchemeOperator,
    SchemeParams,
    f_eps_exact,
    f_eps_scheme,
    first_diff,
    first_order_scheme,
    g_eps_scheme,
    lambda_exact,
    lambda_sampled,
    robust_scheme,
    second_diff,
)
from qcenvelope.stencil import make_stencil


def sampled(func, dim, n):
    grid = make_grid(dim, n)
    ob = Obstacle("f", dim, func)
    return ob.sample(grid), ob


def test_first_diff_examples():
    u, g = sampled(lambda x: np.ones(x.shape[:-1]), 2, 9)
    for v in make_stencil(2, 2).vectors:
        assert first_diff(u, (4, 4), v, g) == 0.0
    u, g = sampled(lambda x: x[..., 0], 1, 5)
    assert first_diff(u, (2,), [1], g) == 1.0
    u, g = sampled(lambda x: x[..., 0] ** 2, 2, 21)
    assert first_diff(u, (10, 10), (1, 0), g) == pytest.approx(0.1, abs=1e-15)


def test_second_diff_examples():
    u, g = sampled(lambda x: 3 * x[..., 0] - 2 * x[..., 1] + 1, 2, 9)
    for v in make_stencil(2, 2).vectors:
        assert second_diff(u, (4, 3), v, g) == pytest.approx(0.0, abs=1e-12)
    for n in (5, 9, 33):
        u, g = sampled(lambda x: x[..., 0] ** 2, 1, n)
        for k in range(1, n - 1):
            assert second_diff(u, (k,), [1], g) == pytest.approx(2.0, abs=1e-10)
    u, g = sampled(lambda x: x[..., 0] * x[..., 1], 2, 17)
    assert second_diff(u, (8, 8), (1, 1), g) == pytest.approx(1.0, abs=1e-12)


def test_clipped_arms_stay_exact_on_quadratics():
    q = QuadraticTestFunction(np.array([[1.0, 0.3], [0.3, -0.5]]), np.array([0.2, -1.0]))
    grid = make_grid(2, 9)
    g = Obstacle("q", 2, q)
    u = g.sample(grid)
    for v in [(2, 1), (1, -2), (1, 1)]:
        vhat = np.array(v) / np.linalg.norm(v)
        # node one step from the face: the length-2 arm is cut at the boundary
        val = second_diff(u, (7, 4), v, g)
        assert val == pytest.approx(vhat @ q.hessian @ vhat, abs=1e-10)


def test_f_eps_scheme_examples():
    st = make_stencil(2, 1)
    u, g = sampled(lambda x: x[..., 0] + x[..., 1], 2, 9)
    assert f_eps_scheme(u, (4, 4), SchemeParams(0.1, st, g)) == pytest.approx(0.0, abs=1e-12)
    u, g = sampled(lambda x: 0.5 * (x**2).sum(-1), 2, 9)
    # the arms see |x|^2/2, so the upwind slope adds h|v|/2 / eps along each direction
    h = u.grid.h
    assert f_eps_scheme(u, (4, 4), SchemeParams(1e6, st, g)) == pytest.approx(1.0, abs=1e-5)
    assert f_eps_scheme(u, (4, 4), SchemeParams(0.5, st, g)) == pytest.approx(1.0 + h / 2 / 0.5)


def test_f_eps_scheme_approaches_oracle():
    q = QuadraticTestFunction(np.diag([-0.5, 1.0]), np.array([1.0, 0.0]))
    g = Obstacle("q", 2, q)
    grid = make_grid(2, 257)
    u = g.sample(grid)
    k = grid.index([0.0, 0.0])
    val = f_eps_scheme(u, k, SchemeParams(0.1, make_stencil(2, 5), g))
    assert abs(val - 2.0) < 0.1
    assert f_eps_exact([1.0, 0.0], np.diag([-1.0, 2.0]), 0.1) == pytest.approx(2.0, abs=1e-9)


def test_g_eps_scheme_examples():
    g = obstacle.double_well_1d()
    grid = make_grid(1, 201)
    u = GridFunction(grid, np.full(grid.shape, -0.3))
    for eps in (0.01, 0.2, 0.45):
        params = SchemeParams(eps, make_stencil(1, 1), g)
        assert g_eps_scheme(u, grid.index([0.0]), params) == pytest.approx(eps)
    w = g.sample(grid)
    params = SchemeParams(0.1, make_stencil(1, 1), g)
    assert g_eps_scheme(w, (0,), params) == 0.0
    assert g_eps_scheme(w, (200,), params) == 0.0
    # at a smooth strictly quasiconvex obstacle with tiny eps the obstacle term 0 is active
    params = SchemeParams(1e-4, make_stencil(1, 1), g)
    assert g_eps_scheme(w, grid.index([0.8]), params) == 0.0


def test_robust_scheme_examples():
    st = make_stencil(2, 1)
    u, g = sampled(lambda x: x[..., 0], 2, 9)
    assert robust_scheme(u, (4, 4), 0.5, st, g) == pytest.approx(0.0, abs=1e-12)
    u, g = sampled(lambda x: 10 * x[..., 0] + 3 * x[..., 1], 2, 9)
    assert robust_scheme(u, (4, 4), 0.5, st, g) == np.inf
    u, g = sampled(lambda x: 0.5 * (x**2).sum(-1), 2, 9)
    assert robust_scheme(u, (4, 4), 0.3, st, g) == pytest.approx(1.0)


def test_first_order_scheme_examples():
    st = make_stencil(2, 1)
    u, g = sampled(lambda x: np.full(x.shape[:-1], 2.0), 2, 9)
    params = SchemeParams(u.grid.h / 2, st, g)
    assert first_order_scheme(u, (3, 5), params) == 0.0
    u, g = sampled(lambda x: x[..., 0] - x[..., 1], 2, 9)
    params = SchemeParams(u.grid.h / 2, st, g)
    assert first_order_scheme(u, (3, 5), params) == pytest.approx(0.0, abs=1e-12)


def test_pointwise_requires_interior_node():
    u, g = sampled(lambda x: x[..., 0], 2, 9)
    with pytest.raises(ParameterError):
        first_diff(u, (0, 4), (1, 0), g)


@pytest.mark.parametrize("name,n,W", [("double-well", 33, 1), ("square", 13, 2), ("pacman", 11, 3)])
def test_vectorised_operator_matches_pointwise(name, n, W):
    g = obstacle.get(name)
    grid = make_grid(g.dim, n)
    st = make_stencil(g.dim, W)
    params = SchemeParams(0.2, st, g)
    rng = np.random.default_rng(0)
    u = GridFunction(grid, rng.normal(size=grid.shape))
    op = SchemeOperator(grid, st, g)
    F = op.f_eps(u.values, 0.2)
    G = op.g_eps(u.values, 0.2).reshape(-1)
    R = op.robust(u.values, 0.7)
    P = op.first_order(u.values, 0.2)
    for j, flat in enumerate(op.interior):
        k = np.unravel_index(flat, grid.shape)
        assert F[j] == pytest.approx(f_eps_scheme(u, k, params), rel=1e-12, abs=1e-12)
        assert G[flat] == pytest.approx(g_eps_scheme(u, k, params), rel=1e-12, abs=1e-12)
        assert R[j] == pytest.approx(robust_scheme(u, k, 0.7, st, g), rel=1e-12, abs=1e-12)
        assert P[j] == pytest.approx(first_order_scheme(u, k, params), rel=1e-12, abs=1e-12)
    for flat in np.flatnonzero(grid.boundary_mask.reshape(-1)):
        k = np.unravel_index(flat, grid.shape)
        assert G[flat] == pytest.approx(g_eps_scheme(u, k, params))


def test_operator_accepts_batches():
    g = obstacle.square_sdf()
    grid = make_grid(2, 9)
    op = SchemeOperator(grid, make_stencil(2, 2), g)
    u = np.random.default_rng(1).normal(size=(3, 2) + grid.shape)
    batched = op.g_eps(u, 0.3)
    assert batched.shape == u.shape
    assert np.allclose(batched[2, 1], op.g_eps(u[2, 1], 0.3))


def test_f_eps_exact_examples():
    assert f_eps_exact([0.0, 0.0], np.eye(2), 0.3) == pytest.approx(1.0)
    for eps in (0.01, 1.0, 7.0):
        assert f_eps_exact([1.0, 0.0], np.zeros((2, 2)), eps) == pytest.approx(0.0, abs=1e-12)
    assert f_eps_exact([1.0, 0.0], np.diag([-1.0, 2.0]), 1.0) == pytest.approx(0.0, abs=1e-9)
    assert f_eps_exact([2.0], [[3.0]], 0.5) == 7.0
    with pytest.raises(ParameterError):
        f_eps_exact([1.0, 0.0], np.eye(2), 0.1, samples=100)


def test_lambda_exact_examples():
    assert lambda_exact([1.0, 0.0], np.diag([-1.0, 2.0])) == pytest.approx(2.0)
    assert lambda_exact([0.0, 0.0], np.diag([3.0, 5.0])) == pytest.approx(3.0)
    assert lambda_exact([1.0, 0.0], np.diag([-1.0, 2.0]), 0.01) == pytest.approx(2 - 3e-4, abs=1e-5)


def test_lambda_exact_matches_sampling():
    rng = np.random.default_rng(4)
    for _ in range(50):
        q = QuadraticTestFunction.random(rng, 2)
        p, M = q.gradient(rng.uniform(-1, 1, 2)), q.hessian
        for r in (1e-4, 0.05, 0.5):
            exact = lambda_exact(p, M, r)
            approx = lambda_sampled(p, M, r, samples=2**18)
            if np.isfinite(approx):
                # sampling can only miss the arc end points, never undercut them
                assert approx >= exact - 1e-12
                assert approx - exact < 1e-3


def test_quadratic_test_function():
    q = QuadraticTestFunction(np.array([[1.0, 0.5], [0.5, 2.0]]), np.array([1.0, -1.0]), 0.5)
    x = np.array([0.3, -0.2])
    assert q(x) == pytest.approx(x @ q.A @ x + q.b @ x + 0.5)
    assert np.allclose(q.gradient(x), 2 * q.A @ x + q.b)
    assert np.allclose(q.hessian, 2 * q.A)
    with pytest.raises(ParameterError):
        QuadraticTestFunction(np.array([[1.0, 1.0], [0.0, 1.0]]), np.zeros(2))


def test_params_validation():
    st = make_stencil(2, 1)
    with pytest.raises(ParameterError):
        SchemeParams(0.0, st, obstacle.square_sdf())
    with pytest.raises(ParameterError):
        SchemeParams(0.1, make_stencil(1, 1), obstacle.square_sdf())
