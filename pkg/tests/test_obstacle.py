import numpy as np
import pytest

from qcenvelope import obstacle
from qcenvelope.envelope1d import qce_line
from qcenvelope.grid import GridFunction, ParameterError, make_grid
from qcenvelope.obstacle import eval as g_at


def test_double_well():
    g = obstacle.double_well_1d()
    assert g_at(g, -0.5) == pytest.approx(-0.3)
    assert g_at(g, 0.5) == 0.0
    assert g_at(g, 0.0) == pytest.approx(0.2)


def test_parabola():
    g = obstacle.inverted_parabola_1d()
    assert g_at(g, 0.0) == 1.0
    assert g_at(g, 1.0) == 0.0 and g_at(g, -1.0) == 0.0
    vals = g.sample(make_grid(1, 201)).values
    assert np.abs(qce_line(vals)).max() == 0.0


def test_square():
    g = obstacle.square_sdf()
    assert g_at(g, [0.0, 0.0]) == -0.5
    assert g_at(g, [0.75, 0.0]) == 0.25
    assert g_at(g, [0.5, 0.5]) == 0.0


def test_square_matches_brute_force_distance():
    g = obstacle.square_sdf()
    t = np.linspace(-0.5, 0.5, 25_001)
    edge = np.concatenate(
        [np.column_stack([t, np.full_like(t, s)]) for s in (-0.5, 0.5)]
        + [np.column_stack([np.full_like(t, s), t]) for s in (-0.5, 0.5)]
    )
    rng = np.random.default_rng(0)
    x = rng.uniform(-1, 1, (300, 2))
    d = np.sqrt(((x[:, None, :] - edge[None]) ** 2).sum(-1)).min(axis=1)
    inside = np.abs(x).max(axis=1) < 0.5
    assert np.abs(g(x) - np.where(inside, -d, d)).max() < 1e-3


def test_pacman():
    g = obstacle.pacman_sdf()
    assert abs(g_at(g, [0.0, -0.5])) < 1e-3
    assert abs(g_at(g, [0.0, 0.0])) < 1e-3
    # (-0.25, 0) lies on the radial segment of the curve
    assert abs(g_at(g, [-0.25, 0.0])) < 1e-3
    assert g_at(g, [0.25, 0.0]) == pytest.approx(-0.25, abs=1e-3)
    # the missing quarter is outside
    assert g_at(g, [-0.25, -0.25]) > 0


def test_circles():
    g = obstacle.cone_with_circles()
    assert g_at(g, [0.5, 0.0]) == 1.0
    assert g_at(g, [0.0, 0.0]) == -0.5
    assert g_at(g, [1.0, 1.0]) == pytest.approx(np.sqrt(2) - 0.5)


@pytest.mark.parametrize("name", ["square", "pacman"])
def test_signed_distance_is_lipschitz(name):
    g = obstacle.get(name)
    rng = np.random.default_rng(1)
    x, y = rng.uniform(-1, 1, (2, 2000, 2))
    assert np.all(np.abs(g(x) - g(y)) <= np.linalg.norm(x - y, axis=1) + 1e-3)


@pytest.mark.parametrize("name", sorted(obstacle.CORPUS))
def test_sampling_is_exact_at_nodes(name):
    g = obstacle.get(name)
    grid = make_grid(g.dim, 17)
    u = g.sample(grid)
    for k in [(0,) * g.dim, (3,) * g.dim, (16,) * g.dim]:
        assert u[k] == g_at(g, grid.coordinate(k))
    assert np.all(np.isfinite(u.values))


def test_domain_and_dimension_checks():
    g = obstacle.square_sdf()
    with pytest.raises(ParameterError):
        g([1.5, 0.0])
    with pytest.raises(ParameterError):
        g.sample(make_grid(1, 5))
    with pytest.raises(ParameterError):
        obstacle.get("triangle")


def test_nearest_node_obstacle(tmp_path):
    grid = make_grid(2, 9)
    u = GridFunction(grid, grid.points.sum(axis=-1))
    path = tmp_path / "g.csv"
    u.to_csv(path)
    g = obstacle.from_csv_file(path)
    assert g_at(g, [0.25, 0.5]) == 0.75
    # off-lattice points snap to the nearest node
    assert g_at(g, [0.26, 0.49]) == 0.75
