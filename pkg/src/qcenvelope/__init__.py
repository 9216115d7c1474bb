"""Strict quasiconvex envelopes by a monotone wide-stencil obstacle scheme."""

from .envelope1d import Analytic1DCase, classify_case, eval_analytic, qce_line
from .grid import Grid, GridFunction, ParameterError, from_csv, make_grid, to_csv
from .obstacle import CORPUS, Obstacle, get
from .operators import (
    NORMALIZATION,
    QuadraticTestFunction,
    SchemeOperator,
    SchemeParams,
    f_eps_exact,
    f_eps_scheme,
    first_order_scheme,
    g_eps_scheme,
    lambda_exact,
    robust_scheme,
)
from .solver import SolveReport, SolverConfig, cfl_step, euler_step, line_sweep_round, solve
from .stencil import Stencil, make_stencil

__all__ = [
    "Analytic1DCase",
    "CORPUS",
    "Grid",
    "GridFunction",
    "NORMALIZATION",
    "Obstacle",
    "ParameterError",
    "QuadraticTestFunction",
    "SchemeOperator",
    "SchemeParams",
    "SolveReport",
    "SolverConfig",
    "Stencil",
    "cfl_step",
    "classify_case",
    "euler_step",
    "eval_analytic",
    "f_eps_exact",
    "f_eps_scheme",
    "first_order_scheme",
    "from_csv",
    "g_eps_scheme",
    "get",
    "lambda_exact",
    "line_sweep_round",
    "make_grid",
    "make_stencil",
    "qce_line",
    "robust_scheme",
    "solve",
    "to_csv",
]
