"""Obstacle functions, evaluable anywhere on the closed cube."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .grid import Grid, GridFunction, ParameterError, from_csv


@dataclass(frozen=True, eq=False)
class Obstacle:
    """A named obstacle ``g``.

    ``func`` is vectorised: it maps an array of shape ``(..., dim)`` to
    values of shape ``(...)``.
    """

    name: str
    dim: int
    func: Callable[[np.ndarray], np.ndarray]
    lower: float = -1.0
    upper: float = 1.0

    def __call__(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self.dim == 1 and (x.ndim == 0 or x.shape[-1] != 1):
            x = x[..., None]
        if x.shape[-1] != self.dim:
            raise ParameterError(f"{self.name} takes {self.dim}-dimensional points")
        tol = 1e-12 * (self.upper - self.lower)
        if np.any(x < self.lower - tol) or np.any(x > self.upper + tol):
            raise ParameterError(f"point outside [{self.lower}, {self.upper}]^{self.dim}")
        return self.func(np.clip(x, self.lower, self.upper))

    def sample(self, grid: Grid) -> GridFunction:
        if grid.dim != self.dim:
            raise ParameterError(f"{self.name} is {self.dim}D but the grid is {grid.dim}D")
        return GridFunction(grid, self(grid.points))


def eval(ob: Obstacle, x) -> float:  # noqa: A001 - mirrors the documented operation name
    return float(np.asarray(ob(x)).reshape(-1)[0])


def double_well_1d() -> Obstacle:
    """``min(|x - 0.5|, |x + 0.5| - 0.3)``."""
    return Obstacle(
        "double-well",
        1,
        lambda x: np.minimum(np.abs(x[..., 0] - 0.5), np.abs(x[..., 0] + 0.5) - 0.3),
    )


def inverted_parabola_1d() -> Obstacle:
    """``1 - x**2``; its quasiconvex envelope on ``[-1, 1]`` is identically 0."""
    return Obstacle("parabola", 1, lambda x: 1.0 - x[..., 0] ** 2)


def _square(x):
    a = np.abs(x)
    inside = np.max(a, axis=-1) - 0.5
    outside = np.linalg.norm(np.maximum(a - 0.5, 0.0), axis=-1)
    return np.where(inside <= 0, inside, outside)


def square_sdf() -> Obstacle:
    """Signed distance to the square ``max|x_i| = 1/2``, negative inside."""
    return Obstacle("square", 2, _square)


def pacman_curve(samples: int = 4096) -> np.ndarray:
    """Closed polyline for the three-quarter circle of radius 1/2 with two radii.

    The arc runs counter-clockwise from ``(0, -1/2)`` to ``(-1/2, 0)``; the
    missing quarter is ``x1 < 0, x2 < 0``.  Returns ``(m, 2)`` vertices with
    the first repeated at the end.
    """
    arc_len = 0.75 * np.pi
    total = arc_len + 1.0
    n_arc = max(int(round(samples * arc_len / total)), 8)
    n_seg = max((samples - n_arc) // 2, 2)
    t = np.linspace(-0.5 * np.pi, np.pi, n_arc + 1)
    arc = 0.5 * np.column_stack([np.cos(t), np.sin(t)])
    s = np.linspace(0.0, 1.0, n_seg + 1)[1:]
    to_origin = np.column_stack([-0.5 * (1 - s), np.zeros_like(s)])
    down = np.column_stack([np.zeros_like(s), -0.5 * s])
    return np.vstack([arc, to_origin, down])


def polyline_distance(points, vertices, chunk: int = 2048) -> np.ndarray:
    """Euclidean distance from each point to a polyline given by consecutive vertices."""
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    a = vertices[:-1]
    ab = vertices[1:] - a
    ab2 = np.einsum("ij,ij->i", ab, ab)
    out = np.empty(len(pts))
    for start in range(0, len(pts), chunk):
        p = pts[start : start + chunk, None, :]
        ap = p - a
        t = np.clip(np.einsum("pij,ij->pi", ap, ab) / ab2, 0.0, 1.0)
        d = ap - t[..., None] * ab
        out[start : start + chunk] = np.sqrt(np.einsum("pij,pij->pi", d, d).min(axis=1))
    return out.reshape(np.shape(points)[:-1])


def inside_polygon(points, vertices, chunk: int = 1024) -> np.ndarray:
    """Even-odd rule point-in-polygon test for a closed vertex list."""
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    x0, y0 = vertices[:-1, 0], vertices[:-1, 1]
    x1, y1 = vertices[1:, 0], vertices[1:, 1]
    out = np.empty(len(pts), dtype=bool)
    for start in range(0, len(pts), chunk):
        x = pts[start : start + chunk, :1]
        y = pts[start : start + chunk, 1:]
        crosses = (y0 > y) != (y1 > y)
        with np.errstate(divide="ignore", invalid="ignore"):
            xc = x0 + (y - y0) * (x1 - x0) / (y1 - y0)
        out[start : start + chunk] = (crosses & (x < xc)).sum(axis=1) % 2 == 1
    return out.reshape(np.shape(points)[:-1])


def pacman_sdf(samples: int = 4096) -> Obstacle:
    """Signed distance to the pacman curve, negative in the region it encloses."""
    verts = pacman_curve(samples)

    def func(x):
        d = polyline_distance(x, verts)
        return np.where(inside_polygon(x, verts), -d, d)

    return Obstacle("pacman", 2, func)


_DISK_CENTRES = np.array([[0.5, 0.0], [-0.5, 0.0], [0.0, 0.5], [0.0, -0.5]])


def cone_with_circles() -> Obstacle:
    """``|x| - 1/2`` with four disks of radius 1/4 raised to the plateau value 1."""

    def func(x):
        in_a = np.zeros(x.shape[:-1], dtype=bool)
        for c in _DISK_CENTRES:
            in_a |= np.sum((x - c) ** 2, axis=-1) <= 1.0 / 16.0
        return np.where(in_a, 1.0, np.linalg.norm(x, axis=-1) - 0.5)

    return Obstacle("circles", 2, func)


def from_grid_function(u: GridFunction, name: str = "custom") -> Obstacle:
    """Nearest-node obstacle built from a sampled grid function.

    Off-lattice evaluations snap to the nearest node, so boundary-clipped
    stencil arms see a first-order approximation of the intended data.
    """
    grid = u.grid
    values = u.values.copy()

    def func(x):
        k = np.clip(np.rint((x - grid.lower) / grid.h).astype(int), 0, grid.n - 1)
        return values[tuple(np.moveaxis(k, -1, 0))]

    return Obstacle(name, grid.dim, func, grid.lower, grid.upper)


def from_csv_file(path, name: str | None = None) -> Obstacle:
    return from_grid_function(from_csv(path), name or str(path))


CORPUS = {
    "double-well": double_well_1d,
    "parabola": inverted_parabola_1d,
    "square": square_sdf,
    "pacman": pacman_sdf,
    "circles": cone_with_circles,
}


def get(name: str) -> Obstacle:
    try:
        return CORPUS[name]()
    except KeyError:
        raise ParameterError(f"unknown example {name!r}; choose from {sorted(CORPUS)}") from None
