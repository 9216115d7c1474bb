"""Fused single-grid Euler step; compiled with numba when it is importable."""

from __future__ import annotations

import numpy as np

try:
    from numba import njit
except ImportError:  # pragma: no cover - exercised only without numba
    njit = None

FULL, FIRST_ORDER, ROBUST = 0, 1, 2
SCHEME_CODES = {"full": FULL, "first_order": FIRST_ORDER, "robust": ROBUST}


def _fused_step(u, ghost, interior, nbr_p, nbr_m, inv_p, inv_m, curv, g, boundary,
                eps, eps_r, delta, scheme, projected, out):
    # neighbour tables are laid out (node, direction) so the inner loop is contiguous
    n = u.size
    m, n_dirs = nbr_p.shape
    inv_eps = 1.0 / eps
    sup = 0.0
    for b in boundary:
        out[b] = g[b]
        sup = max(sup, abs(g[b] - u[b]))
    for j in range(m):
        i = interior[j]
        c = u[i]
        best = np.inf
        for d in range(n_dirs):
            k = nbr_p[j, d]
            up = u[k] if k < n else ghost[k - n]
            k = nbr_m[j, d]
            um = u[k] if k < n else ghost[k - n]
            sp = (up - c) * inv_p[j, d]
            sm = (um - c) * inv_m[j, d]
            first = max(sp, sm)
            if scheme == FULL:
                val = first * inv_eps + (sp + sm) * curv[j, d]
            elif scheme == FIRST_ORDER:
                val = first
            elif first <= eps_r:
                val = (sp + sm) * curv[j, d]
            else:
                val = np.inf
            best = min(best, val)
        if scheme == FULL:
            term = eps - best
        elif scheme == FIRST_ORDER:
            term = eps - best * inv_eps
        else:
            term = -best
        if projected:
            new = min(g[i], c - delta * term)
        else:
            new = c - delta * max(c - g[i], term)
        out[i] = new
        sup = max(sup, abs(new - c))
    return sup


fused_step = njit(cache=True, nogil=True, error_model="numpy")(_fused_step) if njit is not None else None
