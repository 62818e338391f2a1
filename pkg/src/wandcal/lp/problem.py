from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np
import scipy.sparse as sp

from ..exceptions import InvalidArgumentError


class LpStatus(str, Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"
    ITERATION_LIMIT = "iteration-limit"


@dataclass
class LpProblem:
    """``min c @ x`` subject to ``A @ x <= b`` and ``lo <= x <= hi``.

    ``A`` is kept in CSR form. Bounds may be infinite.
    """

    c: np.ndarray
    A: sp.csr_matrix
    b: np.ndarray
    lo: np.ndarray
    hi: np.ndarray
    names: list[str] | None = field(default=None, repr=False)

    def __post_init__(self):
        self.c = np.asarray(self.c, dtype=float).ravel()
        n = self.c.size
        self.A = sp.csr_matrix(self.A, dtype=float)
        if self.A.shape[1] != n:
            raise InvalidArgumentError(f"A has {self.A.shape[1]} columns, expected {n}")
        self.b = np.asarray(self.b, dtype=float).ravel()
        if self.b.size != self.A.shape[0]:
            raise InvalidArgumentError("b length does not match the number of rows")
        self.lo = np.broadcast_to(np.asarray(self.lo, dtype=float), (n,)).copy()
        self.hi = np.broadcast_to(np.asarray(self.hi, dtype=float), (n,)).copy()
        if np.any(self.lo > self.hi):
            raise InvalidArgumentError("lower bound exceeds upper bound")
        if np.any(np.isnan(self.lo)) or np.any(np.isnan(self.hi)):
            raise InvalidArgumentError("bounds must not be NaN")
        if not (np.all(np.isfinite(self.c)) and np.all(np.isfinite(self.A.data)) and np.all(np.isfinite(self.b))):
            raise InvalidArgumentError("LP coefficients must be finite")
        self.A.eliminate_zeros()
        if self.A.shape[0] and np.any(np.diff(self.A.indptr) == 0):
            raise InvalidArgumentError("constraint matrix has an empty row")

    @property
    def n_vars(self) -> int:
        return self.c.size

    @property
    def n_rows(self) -> int:
        return self.A.shape[0]

    def with_rows(self, rows, rhs) -> LpProblem:
        """Return a copy with extra ``rows @ x <= rhs`` appended."""
        rows = sp.csr_matrix(rows, shape=(len(rhs), self.n_vars))
        return LpProblem(self.c.copy(), sp.vstack([self.A, rows], format="csr"),
                         np.concatenate([self.b, np.asarray(rhs, dtype=float)]),
                         self.lo.copy(), self.hi.copy(), self.names)


@dataclass
class LpSolution:
    status: LpStatus
    x: np.ndarray | None
    objective: float
    iterations: int
    message: str = ""

    @property
    def optimal(self) -> bool:
        return self.status is LpStatus.OPTIMAL


def check_feasible(p: LpProblem, x) -> float:
    """Largest violation of any row or bound at ``x`` (zero when feasible)."""
    x = np.asarray(x, dtype=float)
    viol = 0.0
    if p.n_rows:
        viol = max(viol, float(np.max(p.A @ x - p.b, initial=0.0)))
    viol = max(viol, float(np.max(p.lo - x, initial=0.0)), float(np.max(x - p.hi, initial=0.0)))
    return viol
