from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import linprog

from ..exceptions import InvalidArgumentError
from .problem import LpProblem, LpSolution, LpStatus, check_feasible
from .simplex import SimplexConfig, simplex_solve

_HIGHS_STATUS = {
    0: LpStatus.OPTIMAL,
    1: LpStatus.ITERATION_LIMIT,
    2: LpStatus.INFEASIBLE,
    3: LpStatus.UNBOUNDED,
    4: LpStatus.ITERATION_LIMIT,
}


@dataclass(frozen=True)
class LpConfig:
    """``method`` is ``"simplex"`` (the in-package revised simplex) or ``"highs"``."""

    method: str = "highs"
    feas_tol: float = 1e-7
    opt_tol: float = 1e-9
    max_iter: int | None = None
    bland_after: int = 50
    refactor_every: int = 50

    def __post_init__(self):
        if self.method not in ("simplex", "highs"):
            raise InvalidArgumentError(f"unknown LP method {self.method!r}")


def _solve_highs(p: LpProblem, cfg: LpConfig) -> LpSolution:
    options = {"primal_feasibility_tolerance": min(cfg.feas_tol, 1e-7) * 1e-2,
               "dual_feasibility_tolerance": cfg.opt_tol,
               "presolve": True}
    if cfg.max_iter is not None:
        options["maxiter"] = cfg.max_iter
    res = linprog(p.c, A_ub=p.A if p.n_rows else None, b_ub=p.b if p.n_rows else None,
                  bounds=np.column_stack([p.lo, p.hi]), method="highs-ds", options=options)
    status = _HIGHS_STATUS.get(res.status, LpStatus.ITERATION_LIMIT)
    if status is not LpStatus.OPTIMAL:
        return LpSolution(status, None, np.nan, int(getattr(res, "nit", 0)), res.message)
    x = np.asarray(res.x, dtype=float)
    return LpSolution(status, x, float(p.c @ x), int(res.nit), res.message)


def solve_lp(p: LpProblem, cfg: LpConfig | None = None) -> LpSolution:
    """Solve ``p``. An ``optimal`` result is always re-checked for feasibility.

    A solution violating rows or bounds by more than ``cfg.feas_tol`` is
    downgraded to ``iteration-limit`` rather than reported as optimal.
    """
    cfg = cfg or LpConfig()
    if cfg.method == "simplex":
        sol = simplex_solve(p, SimplexConfig(feas_tol=min(cfg.feas_tol, 1e-9), opt_tol=cfg.opt_tol,
                                             max_iter=cfg.max_iter, bland_after=cfg.bland_after,
                                             refactor_every=cfg.refactor_every))
    else:
        sol = _solve_highs(p, cfg)
    if sol.optimal:
        viol = check_feasible(p, sol.x)
        if viol > cfg.feas_tol:
            return LpSolution(LpStatus.ITERATION_LIMIT, None, np.nan, sol.iterations,
                              f"numerical breakdown: solution violates constraints by {viol:.3e}")
    return sol
