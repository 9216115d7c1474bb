"""Uniform node-centred grids on a cube and the functions that live on them."""

from __future__ import annotations

import io
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np


class ParameterError(ValueError):
    """Raised when an argument is outside the documented range."""


INTERIOR = "interior"
BOUNDARY = "boundary"


@dataclass(frozen=True)
class Grid:
    """Uniform lattice with ``n`` nodes per axis on ``[lower, upper]**dim``.

    The faces are grid nodes, so ``h = (upper - lower) / (n - 1)``.  The
    default cube is ``[-1, 1]``.
    """

    dim: int
    n: int
    lower: float = -1.0
    upper: float = 1.0

    def __post_init__(self):
        if self.dim not in (1, 2):
            raise ParameterError(f"dim must be 1 or 2, got {self.dim!r}")
        if int(self.n) != self.n or self.n < 3:
            raise ParameterError(f"points_per_axis must be an integer >= 3, got {self.n!r}")
        if not self.upper > self.lower:
            raise ParameterError("upper bound must exceed lower bound")

    @property
    def h(self) -> float:
        return (self.upper - self.lower) / (self.n - 1)

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.n,) * self.dim

    @property
    def size(self) -> int:
        return self.n**self.dim

    @cached_property
    def axis(self) -> np.ndarray:
        """Node coordinates along one axis."""
        x = self.lower + self.h * np.arange(self.n)
        x[-1] = self.upper
        return x

    @cached_property
    def points(self) -> np.ndarray:
        """Coordinates of every node, shape ``shape + (dim,)``."""
        mesh = np.meshgrid(*([self.axis] * self.dim), indexing="ij")
        return np.stack(mesh, axis=-1)

    @cached_property
    def boundary_mask(self) -> np.ndarray:
        idx = np.indices(self.shape)
        return np.any((idx == 0) | (idx == self.n - 1), axis=0)

    @property
    def interior_mask(self) -> np.ndarray:
        return ~self.boundary_mask

    def coordinate(self, index) -> np.ndarray:
        index = np.atleast_1d(np.asarray(index))
        if index.shape[-1] != self.dim:
            raise ParameterError(f"index must have {self.dim} components")
        if np.any(index < 0) or np.any(index > self.n - 1):
            raise ParameterError(f"index {index.tolist()} is off the lattice")
        return self.axis[index]

    def index(self, x) -> tuple[int, ...]:
        """Multi-index of the node at coordinate ``x``; rejects off-lattice points."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        if x.shape != (self.dim,):
            raise ParameterError(f"coordinate must have {self.dim} components")
        k = np.rint((x - self.lower) / self.h).astype(int)
        if np.any(k < 0) or np.any(k > self.n - 1) or not np.allclose(
            self.axis[k], x, rtol=0.0, atol=1e-9 * self.h
        ):
            raise ParameterError(f"{x.tolist()} is not a node of this grid")
        return tuple(int(i) for i in k)

    def classify(self, node) -> str:
        """``"boundary"`` if some coordinate of the node is on a face, else ``"interior"``.

        ``node`` is either a multi-index of ints or a coordinate of floats.
        """
        node = np.atleast_1d(np.asarray(node))
        if np.issubdtype(node.dtype, np.integer):
            self.coordinate(node)
            k = node
        else:
            k = np.asarray(self.index(node))
        return BOUNDARY if np.any((k == 0) | (k == self.n - 1)) else INTERIOR

    def contains(self, x, atol: float = 0.0) -> bool:
        x = np.asarray(x, dtype=float)
        return bool(np.all(x >= self.lower - atol) and np.all(x <= self.upper + atol))

    def ray_clip(self, x, w) -> tuple[float, float]:
        """Distances ``(t_plus, t_minus)`` from ``x`` to the cube boundary along ``+w`` and ``-w``.

        Distances are in units of ``w``, so ``x + t_plus * w`` lies on the
        boundary.  A zero direction raises :class:`ParameterError`.
        """
        x = np.atleast_1d(np.asarray(x, dtype=float))
        w = np.atleast_1d(np.asarray(w, dtype=float))
        if x.shape != (self.dim,) or w.shape != (self.dim,):
            raise ParameterError(f"x and w must have {self.dim} components")
        if not np.any(w):
            raise ParameterError("direction vector must be nonzero")
        if not self.contains(x, atol=1e-12):
            raise ParameterError(f"{x.tolist()} lies outside the domain")
        return _exit_time(x, w, self.lower, self.upper), _exit_time(x, -w, self.lower, self.upper)


def _exit_time(x, w, lower, upper):
    t = np.inf
    for xi, wi in zip(x, w):
        if wi > 0:
            t = min(t, (upper - xi) / wi)
        elif wi < 0:
            t = min(t, (lower - xi) / wi)
    return max(float(t), 0.0)


def exit_times(points, w, lower, upper):
    """Vectorised :meth:`Grid.ray_clip` along ``+w`` for many points at once."""
    points = np.asarray(points, dtype=float)
    t = np.full(points.shape[:-1], np.inf)
    for i, wi in enumerate(w):
        if wi > 0:
            t = np.minimum(t, (upper - points[..., i]) / wi)
        elif wi < 0:
            t = np.minimum(t, (lower - points[..., i]) / wi)
    return np.maximum(t, 0.0)


def make_grid(dim: int, points_per_axis: int, lower: float = -1.0, upper: float = 1.0) -> Grid:
    return Grid(dim, points_per_axis, lower, upper)


@dataclass(frozen=True, eq=False)
class GridFunction:
    """Real values on the nodes of a grid.

    ``values`` has shape ``grid.shape``.  Instances are not mutated in place
    by the library; updates produce new objects.
    """

    grid: Grid
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.shape != self.grid.shape:
            raise ParameterError(f"values have shape {values.shape}, expected {self.grid.shape}")
        if not np.all(np.isfinite(values)):
            raise ParameterError("grid function values must be finite")
        object.__setattr__(self, "values", values)

    def __getitem__(self, index):
        return float(self.values[tuple(index) if np.ndim(index) else index])

    def at(self, x) -> float:
        """Value at the node with coordinate ``x``."""
        return float(self.values[self.grid.index(x)])

    def interpolate(self, x) -> np.ndarray:
        """(Multi)linear interpolation at arbitrary points in the cube."""
        from scipy.interpolate import RegularGridInterpolator

        interp = RegularGridInterpolator([self.grid.axis] * self.grid.dim, self.values)
        x = np.asarray(x, dtype=float)
        if self.grid.dim == 1 and (x.ndim == 0 or x.shape[-1] != 1):
            x = x[..., None]
        return interp(x)

    def to_csv(self, path=None, metadata: dict | None = None) -> str:
        text = to_csv(self, metadata)
        if path is not None:
            with open(path, "w", newline="") as fh:
                fh.write(text)
        return text

    @classmethod
    def from_csv(cls, source) -> "GridFunction":
        return from_csv(source)


def to_csv(u: GridFunction, metadata: dict | None = None) -> str:
    """Serialise as ``# dim=.. N=.. h=..`` then ``x1[,x2],value`` rows in index order.

    Extra ``# key=value`` comment lines carry ``metadata`` after the header.
    """
    g = u.grid
    out = io.StringIO()
    header = f"# dim={g.dim} N={g.n} h={g.h!r}"
    if (g.lower, g.upper) != (-1.0, 1.0):
        header += f" lower={g.lower!r} upper={g.upper!r}"
    out.write(header + "\n")
    for key, value in (metadata or {}).items():
        out.write(f"# {key}={value}\n")
    pts = g.points.reshape(-1, g.dim)
    vals = u.values.reshape(-1)
    for p, v in zip(pts, vals):
        out.write(",".join(repr(float(c)) for c in p) + "," + repr(float(v)) + "\n")
    return out.getvalue()


def from_csv(source) -> GridFunction:
    if hasattr(source, "read"):
        text = source.read()
    elif isinstance(source, str) and "\n" in source:
        text = source
    else:
        with open(source) as fh:
            text = fh.read()
    lines = text.splitlines()
    if not lines or not lines[0].startswith("#"):
        raise ParameterError("missing '# dim=.. N=.. h=..' header")
    fields = dict(tok.split("=", 1) for tok in lines[0][1:].split())
    try:
        grid = Grid(
            int(fields["dim"]),
            int(fields["N"]),
            float(fields.get("lower", -1.0)),
            float(fields.get("upper", 1.0)),
        )
    except KeyError as exc:
        raise ParameterError(f"header lacks {exc}") from None
    rows = [ln for ln in lines[1:] if ln.strip() and not ln.startswith("#")]
    data = np.loadtxt(io.StringIO("\n".join(rows)), delimiter=",", ndmin=2)
    if data.shape != (grid.size, grid.dim + 1):
        raise ParameterError(f"expected {grid.size} rows of {grid.dim + 1} columns")
    return GridFunction(grid, data[:, -1].reshape(grid.shape))
