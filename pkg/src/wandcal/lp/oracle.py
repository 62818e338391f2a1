"""Brute-force reference for tiny LPs with finite bounds, and a random instance generator.

With every variable boxed the feasible set is a polytope, so an optimum (if
any) sits on a vertex. All ``n``-subsets of the rows and bound facets are
tried at once with a batched dense solve.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations

import numpy as np
import scipy.sparse as sp

from ..exceptions import InvalidArgumentError
from .problem import LpProblem, LpStatus, check_feasible
from .solve import LpConfig, solve_lp


def vertex_enumeration(p: LpProblem, tol: float = 1e-9):
    """Return ``(status, x, objective)`` by enumerating vertices. Bounds must be finite."""
    if not (np.all(np.isfinite(p.lo)) and np.all(np.isfinite(p.hi))):
        raise InvalidArgumentError("vertex enumeration needs finite bounds")
    n = p.n_vars
    eye = np.eye(n)
    G = np.vstack([p.A.toarray(), eye, -eye])
    h = np.concatenate([p.b, p.hi, -p.lo])
    subsets = np.array(list(combinations(range(G.shape[0]), n)))
    mats = G[subsets]
    rhs = h[subsets]
    ok = np.abs(np.linalg.det(mats)) > 1e-12
    if not np.any(ok):
        return LpStatus.INFEASIBLE, None, np.nan
    xs = np.linalg.solve(mats[ok], rhs[ok][..., None])[..., 0]
    slack = xs @ G.T - h
    scale = 1.0 + np.abs(h)
    feasible = np.all(slack <= tol * scale, axis=1)
    if not np.any(feasible):
        return LpStatus.INFEASIBLE, None, np.nan
    xs = xs[feasible]
    obj = xs @ p.c
    i = int(np.argmin(obj))
    return LpStatus.OPTIMAL, xs[i], float(obj[i])


def random_lp(rng, max_vars: int = 6, max_rows: int = 8, box: float = 5.0) -> LpProblem:
    """Random boxed LP. Roughly one in five instances is made infeasible."""
    n = int(rng.integers(1, max_vars + 1))
    m = int(rng.integers(1, max_rows + 1))
    A = rng.normal(size=(m, n))
    A[rng.random((m, n)) < 0.3] = 0.0
    for i in range(m):
        if not np.any(A[i]):
            A[i, rng.integers(n)] = 1.0
    x0 = rng.uniform(-box / 2, box / 2, n)
    b = A @ x0 + rng.uniform(0.0, 2.0, m)
    if rng.random() < 0.2:
        # a row and its negation with a gap that no x can satisfy
        row = rng.normal(size=n)
        A = np.vstack([A, row, -row])
        b = np.concatenate([b, [-1.0, -1.0]])
    c = rng.normal(size=n)
    lo = -box * rng.uniform(0.5, 1.0, n)
    hi = box * rng.uniform(0.5, 1.0, n)
    return LpProblem(c, sp.csr_matrix(A), b, lo, hi)


@dataclass
class SelfTestResult:
    n_cases: int
    n_failed: int
    max_objective_gap: float
    max_violation: float
    failures: list


def selftest(n_cases: int = 200, seed: int = 0, method: str = "simplex",
             obj_tol: float = 1e-8, feas_tol: float = 1e-7) -> SelfTestResult:
    """Solve random small LPs with ``method`` and compare against vertex enumeration."""
    rng = np.random.default_rng(seed)
    cfg = LpConfig(method=method)
    failures = []
    gap_max = 0.0
    viol_max = 0.0
    for i in range(n_cases):
        p = random_lp(rng)
        ref_status, _, ref_obj = vertex_enumeration(p)
        sol = solve_lp(p, cfg)
        if sol.status is not ref_status:
            failures.append((i, f"status {sol.status.value} vs oracle {ref_status.value}"))
            continue
        if sol.optimal:
            gap = abs(sol.objective - ref_obj)
            viol = check_feasible(p, sol.x)
            gap_max = max(gap_max, gap)
            viol_max = max(viol_max, viol)
            if gap > obj_tol * max(1.0, abs(ref_obj)) or viol > feas_tol:
                failures.append((i, f"objective gap {gap:.3e}, violation {viol:.3e}"))
    return SelfTestResult(n_cases, len(failures), gap_max, viol_max, failures)
