"""Revised simplex for inequality-form LPs with native variable bounds.

Slack columns turn every row into an equality; rows whose slack would start
negative get an artificial column and a phase-1 objective. Nonbasic variables
sit at a finite bound (or at zero when free). The basis inverse is held dense
and updated by elementary row operations, refactored periodically.

Pricing uses the largest reduced cost scaled by column norm; after a run of
degenerate pivots it switches to Bland's smallest-index rule until progress
resumes. The ratio test is Harris' two-pass variant.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .problem import LpProblem, LpSolution, LpStatus

BASIC, AT_LO, AT_HI, FREE = 0, 1, 2, 3


@dataclass(frozen=True)
class SimplexConfig:
    feas_tol: float = 1e-9
    opt_tol: float = 1e-9
    pivot_tol: float = 1e-10
    max_iter: int | None = None
    bland_after: int = 50
    refactor_every: int = 50


class _Tableau:
    def __init__(self, p: LpProblem):
        m, n = p.n_rows, p.n_vars
        self.m, self.n = m, n
        lo = p.lo.copy()
        hi = p.hi.copy()
        status = np.empty(n, dtype=int)
        xn = np.zeros(n)
        for j in range(n):
            if np.isfinite(lo[j]):
                status[j], xn[j] = AT_LO, lo[j]
            elif np.isfinite(hi[j]):
                status[j], xn[j] = AT_HI, hi[j]
            else:
                status[j], xn[j] = FREE, 0.0
        resid = p.b - p.A @ xn
        art_rows = np.flatnonzero(resid < 0)
        k = art_rows.size
        self.n_art = k
        # columns: structural | slack | artificial
        art = sp.csc_matrix((-np.ones(k), (art_rows, np.arange(k))), shape=(m, k))
        self.cols = sp.hstack([p.A.tocsc(), sp.identity(m, format="csc"), art], format="csc")
        self.ncol = n + m + k
        self.lo = np.concatenate([lo, np.zeros(m), np.zeros(k)])
        self.hi = np.concatenate([hi, np.full(m, np.inf), np.full(k, np.inf)])
        self.b = p.b.copy()
        self.x = np.concatenate([xn, np.zeros(m), np.zeros(k)])
        self.status = np.concatenate([status, np.full(m + k, AT_LO)])
        basis = np.arange(n, n + m)
        basis[art_rows] = n + m + np.arange(k)
        self.basis = basis
        self.status[basis] = BASIC
        self.x[n + np.arange(m)] = np.where(resid >= 0, resid, 0.0)
        self.x[n + m + np.arange(k)] = -resid[art_rows]
        norms = np.sqrt(np.asarray(self.cols.multiply(self.cols).sum(axis=0)).ravel())
        self.col_norm = np.maximum(norms, 1e-12)
        self.refactor()

    def column(self, j):
        c = self.cols[:, j]
        out = np.zeros(self.m)
        out[c.indices] = c.data
        return out

    def refactor(self):
        if self.m == 0:
            self.binv = np.zeros((0, 0))
            return
        bmat = self.cols[:, self.basis].toarray()
        self.binv = np.linalg.inv(bmat)
        nonbasic = self.status != BASIC
        rhs = self.b - self.cols[:, nonbasic] @ self.x[nonbasic]
        self.x[self.basis] = self.binv @ rhs


def _iterate(t: _Tableau, cost, cfg: SimplexConfig, budget):
    """Run simplex pivots for ``cost``. Returns (status, iterations)."""
    it = 0
    degenerate = 0
    bland = False
    since_refactor = 0
    movable = t.lo < t.hi
    while True:
        if it >= budget:
            return LpStatus.ITERATION_LIMIT, it
        y = cost[t.basis] @ t.binv if t.m else np.zeros(0)
        d = cost - t.cols.T @ y
        st = t.status
        cand = np.zeros(t.ncol)
        inc = (st == AT_LO) & (d < -cfg.opt_tol) & movable
        dec = (st == AT_HI) & (d > cfg.opt_tol) & movable
        fre = (st == FREE) & (np.abs(d) > cfg.opt_tol)
        elig = inc | dec | fre
        if not elig.any():
            return LpStatus.OPTIMAL, it
        if bland:
            q = int(np.flatnonzero(elig)[0])
        else:
            cand[elig] = np.abs(d[elig]) / t.col_norm[elig]
            q = int(np.argmax(cand))
        direction = 1.0 if d[q] < 0 else -1.0
        alpha = t.binv @ t.column(q) if t.m else np.zeros(0)
        rate = -direction * alpha
        xb = t.x[t.basis]
        lob = t.lo[t.basis]
        hib = t.hi[t.basis]
        down = rate < -cfg.pivot_tol
        up = rate > cfg.pivot_tol
        # Harris pass 1: largest step with bounds relaxed by the tolerance
        relaxed = np.full(t.m, np.inf)
        with np.errstate(invalid="ignore", divide="ignore"):
            relaxed[down] = (xb[down] - lob[down] + cfg.feas_tol) / -rate[down]
            relaxed[up] = (hib[up] - xb[up] + cfg.feas_tol) / rate[up]
        theta_max = relaxed.min(initial=np.inf)
        flip = t.hi[q] - t.lo[q]
        if not np.isfinite(theta_max) and not np.isfinite(flip):
            return LpStatus.UNBOUNDED, it
        leave = -1
        if np.isfinite(theta_max):
            exact = np.full(t.m, np.inf)
            with np.errstate(invalid="ignore", divide="ignore"):
                exact[down] = (xb[down] - lob[down]) / -rate[down]
                exact[up] = (hib[up] - xb[up]) / rate[up]
            exact = np.maximum(exact, 0.0)
            ok = np.flatnonzero(exact <= theta_max)
            if bland:
                tmin = exact[ok].min()
                ties = ok[exact[ok] <= tmin + cfg.feas_tol]
                leave = int(ties[np.argmin(t.basis[ties])])
            else:
                leave = int(ok[np.argmax(np.abs(rate[ok]))])
            theta = exact[leave]
        else:
            theta = np.inf
        it += 1
        if np.isfinite(flip) and flip <= theta:
            # bound flip: entering variable runs to its opposite bound
            t.x[q] += direction * flip
            t.x[t.basis] = xb + rate * flip
            t.status[q] = AT_HI if direction > 0 else AT_LO
            step = flip
        else:
            t.x[q] += direction * theta
            t.x[t.basis] = xb + rate * theta
            out = t.basis[leave]
            t.status[out] = AT_LO if rate[leave] < 0 else AT_HI
            t.x[out] = t.lo[out] if rate[leave] < 0 else t.hi[out]
            t.basis[leave] = q
            t.status[q] = BASIC
            piv = alpha[leave]
            row = t.binv[leave] / piv
            t.binv -= np.outer(alpha, row)
            t.binv[leave] = row
            since_refactor += 1
            if since_refactor >= cfg.refactor_every:
                t.refactor()
                since_refactor = 0
            step = theta
        if step <= cfg.feas_tol:
            degenerate += 1
            if degenerate >= cfg.bland_after:
                bland = True
        else:
            degenerate = 0
            bland = False


def simplex_solve(p: LpProblem, cfg: SimplexConfig | None = None) -> LpSolution:
    cfg = cfg or SimplexConfig()
    t = _Tableau(p)
    budget = cfg.max_iter if cfg.max_iter is not None else 50 * (t.m + t.ncol) + 1000
    total = 0
    if t.n_art:
        c1 = np.zeros(t.ncol)
        c1[t.n + t.m:] = 1.0
        status, it = _iterate(t, c1, cfg, budget)
        total += it
        if status is LpStatus.ITERATION_LIMIT:
            return LpSolution(status, None, np.nan, total, "phase 1 iteration limit")
        t.refactor()
        infeas = float(t.x[t.n + t.m:].sum())
        if infeas > cfg.feas_tol * max(1.0, t.m):
            return LpSolution(LpStatus.INFEASIBLE, None, np.nan, total,
                              f"phase 1 ended with infeasibility {infeas:.3e}")
        # artificials are pinned to zero for phase 2
        t.hi[t.n + t.m:] = 0.0
        t.x[t.n + t.m:] = np.clip(t.x[t.n + t.m:], 0.0, 0.0)
        t.refactor()
    c2 = np.zeros(t.ncol)
    c2[: t.n] = p.c
    status, it = _iterate(t, c2, cfg, budget - total)
    total += it
    t.refactor()
    x = t.x[: t.n].copy()
    if status is not LpStatus.OPTIMAL:
        return LpSolution(status, None if status is not LpStatus.ITERATION_LIMIT else x,
                          np.nan, total)
    return LpSolution(status, x, float(p.c @ x), total)
