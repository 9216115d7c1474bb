"""
Envelopes in one dimension
==========================

The 1D problem has a closed-form solution, and its quasiconvex envelope is
two running minima.  Both make good yardsticks for the grid solver.
"""

# %%
import numpy as np

from qcenvelope import SchemeParams, SolverConfig, classify_case, eval_analytic, make_grid, make_stencil, qce_line, solve
from qcenvelope import obstacle
from qcenvelope.obstacle import Obstacle

# %% [markdown]
# The double well has minima -0.3 at x = -0.5 and 0 at x = 0.5.  Its
# envelope fills the bump between them up to the higher minimum.

# %%
g = obstacle.double_well_1d()
grid = make_grid(1, 201)
gv = g.sample(grid).values
env = qce_line(gv)
for x in (-0.5, 0.0, 0.25, 0.5):
    k = grid.index([x])
    print(f"x={x:5.2f}  g={gv[k]: .4f}  envelope={env[k]: .4f}")

# %% [markdown]
# The penalised solution sits below the envelope and rises towards it as
# epsilon shrinks.  The projected update reaches the fixed point quickly
# even for tiny epsilon.

# %%
for eps in (0.2, 0.1, 0.05, 1e-3, 1e-4):
    params = SchemeParams(eps, make_stencil(1, 1), g)
    u, rep = solve(g, grid, params, SolverConfig(update="projected"))
    print(f"eps={eps:<7g} iterations={rep.iterations:<7d} sup|u - envelope|={np.abs(u.values - env).max():.4f}")

# %% [markdown]
# With the obstacle far above, the solver answers the boundary-value
# problem eps u'' + |u'| = eps^2, whose solution is known in closed form.
# A small rise gives the symmetric valley.

# %%
eps, H = 0.1, 0.5 * 0.1**2
case = classify_case(1.0, H, eps)
print(case.case, f"x*={case.x_star:.4f}", f"u0={case.u0:.3e}")
far = Obstacle("far", 1, lambda x: H * x[..., 0] + 10 * np.sin(np.pi * x[..., 0]), 0.0, 1.0)
for n in (65, 129, 257):
    gr = make_grid(1, n, 0.0, 1.0)
    u, rep = solve(far, gr, SchemeParams(eps, make_stencil(1, 1), far), SolverConfig(tol=1e-10))
    err = np.abs(u.values - eval_analytic(case, gr.axis)).max()
    print(f"n={n:<4d} max error={err:.3e}  error/h={err / gr.h:.3f}")
