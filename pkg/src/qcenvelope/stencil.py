"""Wide stencils of reduced integer grid vectors."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .grid import ParameterError


@dataclass(frozen=True, eq=False)
class Stencil:
    """Symmetric set of gcd-reduced grid vectors of width ``width``.

    ``vectors`` has shape ``(m, dim)``; ``half`` keeps one vector of each
    antipodal pair (first nonzero component positive), which is all the
    symmetric difference operators need.
    """

    dim: int
    width: int
    vectors: np.ndarray
    dtheta: float

    @property
    def half(self) -> np.ndarray:
        v = self.vectors
        first = np.array([row[np.flatnonzero(row)[0]] for row in v])
        return v[first > 0]

    @property
    def unit_half(self) -> np.ndarray:
        h = self.half.astype(float)
        return h / np.linalg.norm(h, axis=1, keepdims=True)

    def __len__(self):
        return len(self.vectors)


def make_stencil(dim: int, width: int) -> Stencil:
    """All reduced nonzero integer vectors in ``[-width, width]**dim``."""
    if dim not in (1, 2):
        raise ParameterError(f"dim must be 1 or 2, got {dim!r}")
    if int(width) != width or width < 1:
        raise ParameterError(f"stencil width must be a positive integer, got {width!r}")
    vecs = [
        v
        for v in itertools.product(range(-width, width + 1), repeat=dim)
        if any(v) and math.gcd(*(abs(c) for c in v)) == 1
    ]
    # sort by angle so the 2D vectors come out in counter-clockwise order
    if dim == 2:
        vecs.sort(key=lambda v: math.atan2(v[1], v[0]) % (2 * math.pi))
    vectors = np.array(vecs, dtype=int).reshape(-1, dim)
    return Stencil(dim, int(width), vectors, directional_resolution(vectors))


def directional_resolution(vectors) -> float:
    """Largest angle between any unit direction and its nearest stencil direction.

    In 2D this is half the widest gap between consecutive directions; in 1D
    every direction is a stencil direction and the answer is 0.
    """
    v = np.asarray(vectors, dtype=float)
    if v.size == 0:
        raise ParameterError("stencil must contain at least one vector")
    v = v.reshape(len(v), -1)
    if np.any(np.all(v == 0, axis=1)):
        raise ParameterError("stencil vectors must be nonzero")
    if v.shape[1] == 1:
        signs = set(np.sign(v[:, 0]))
        return 0.0 if signs == {-1.0, 1.0} else math.pi
    if v.shape[1] != 2:
        raise ParameterError("only 1D and 2D stencils are supported")
    angles = np.unique(np.mod(np.arctan2(v[:, 1], v[:, 0]), 2 * np.pi))
    gaps = np.diff(np.append(angles, angles[0] + 2 * np.pi))
    return float(gaps.max() / 2)


def sampled_resolution(vectors, samples: int = 100_000) -> float:
    """Evaluate max over ``w`` of min over ``d`` of ``arccos(w . d)`` by sampling ``w`` (2D)."""
    d = np.asarray(vectors, dtype=float)
    d = d / np.linalg.norm(d, axis=1, keepdims=True)
    theta = np.linspace(0.0, 2 * np.pi, samples, endpoint=False)
    best = np.full(samples, -1.0)
    for dx, dy in d:
        np.maximum(best, np.cos(theta) * dx + np.sin(theta) * dy, out=best)
    return float(np.arccos(np.clip(best, -1.0, 1.0)).max())
