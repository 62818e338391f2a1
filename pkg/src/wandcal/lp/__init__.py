"""Sparse inequality-form linear programming with box bounds."""

from .mps import read_mps, write_mps
from .oracle import SelfTestResult, random_lp, selftest, vertex_enumeration
from .problem import LpProblem, LpSolution, LpStatus, check_feasible
from .simplex import SimplexConfig, simplex_solve
from .solve import LpConfig, solve_lp

__all__ = [
    "LpProblem",
    "LpSolution",
    "LpStatus",
    "LpConfig",
    "SimplexConfig",
    "check_feasible",
    "read_mps",
    "simplex_solve",
    "solve_lp",
    "write_mps",
    "SelfTestResult",
    "random_lp",
    "selftest",
    "vertex_enumeration",
]
