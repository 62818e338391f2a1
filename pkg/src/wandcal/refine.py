"""Alternating refinement of camera angles and of markers/translations.

Each outer iteration first re-solves every camera's angles independently
(Levenberg-Marquardt, markers and translations held fixed), then solves a
least-absolute-error LP for markers and translations. The state is brought
back to metric scale after every LP solve, so the squared objective ``E`` is
comparable across iterations.

Exact block minimization over markers/translations at frozen angles can stall
away from the minimum because the absolute-error block is not smooth. The
default scheme therefore lets the LP also move the angles to first order,
within a trust region; the exactly separated scheme remains available.
"""

from __future__ import annotations

import logging
import os
import time
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from .exceptions import BehindCameraError, DegenerateGeometryError, InvalidArgumentError
from .lm import LmConfig, solve_angles
from .lp import LpConfig
from .residuals import (
    ObservationSet,
    eval_E,
    eval_LAE,
    eval_P,
    recover_scale,
    wand_length_stats,
)
from .state import SceneState
from .subproblem import SubproblemConfig, solve_linearized_step, solve_subproblem

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class RefineConfig:
    """Outer-loop settings.

    ``scheme`` selects the second stage of each iteration:

    * ``"linearized"`` (default): the LP also carries first-order angle
      increments, inside a trust region that is grown or shrunk by the actual
      absolute error at metric scale;
    * ``"separated"``: the LP is solved exactly at frozen angles.
    """

    max_iter: int = 100
    tol: float = 1e-8
    abs_tol: float = 1e-20
    lm: LmConfig = field(default_factory=LmConfig)
    lp: LpConfig = field(default_factory=LpConfig)
    subproblem: SubproblemConfig = field(default_factory=SubproblemConfig)
    scheme: str = "linearized"
    trust_radius: float = 0.1
    max_trust_radius: float = 0.5
    min_trust_radius: float = 1e-12
    scale_method: str = "mean"
    n_jobs: int | None = None
    divergence_guard: bool = True

    def __post_init__(self):
        if not self.tol > 0:
            raise InvalidArgumentError("tol must be positive")
        if self.max_iter < 1:
            raise InvalidArgumentError("max_iter must be at least 1")
        if self.scheme not in ("linearized", "separated"):
            raise InvalidArgumentError(f"unknown scheme {self.scheme!r}")
        if not 0 < self.min_trust_radius <= self.trust_radius <= self.max_trust_radius:
            raise InvalidArgumentError("trust radii must satisfy 0 < min <= initial <= max")


@dataclass
class IterationRecord:
    iteration: int
    E: float
    LAE: float
    P: float | None
    length_std: float
    ms_angles: float
    ms_lp: float
    lae_lp_in: float | None = None
    lae_lp_out: float | None = None
    lp_objective: float | None = None
    lp_iterations: int | None = None
    margin: float | None = None
    scale: float | None = None
    trust_radius: float | None = None
    lp_solves: int | None = None

    CSV_FIELDS = ("iteration", "E", "LAE", "P", "length_std", "ms_angles", "ms_lp")


@dataclass
class RefineReport:
    iterations: list[IterationRecord] = field(default_factory=list)
    reason: str = ""
    final_scale: float = 1.0
    angle_reports: list = field(default_factory=list, repr=False)

    @property
    def E(self) -> list[float]:
        return [r.E for r in self.iterations]

    def to_dict(self) -> dict:
        return {
            "reason": self.reason,
            "final_scale": self.final_scale,
            "iterations": [asdict(r) for r in self.iterations],
        }

    def csv_rows(self):
        yield IterationRecord.CSV_FIELDS
        for r in self.iterations:
            yield tuple(getattr(r, k) for k in IterationRecord.CSV_FIELDS)


def _safe_P(state, obs, iteration):
    try:
        return eval_P(state, obs)
    except BehindCameraError as exc:
        warnings.warn(f"iteration {iteration}: {exc}; P omitted", RuntimeWarning, stacklevel=3)
        return None


def _record(k, state, obs, obs_norm, ms_a, ms_lp, **extra):
    return IterationRecord(
        iteration=k,
        E=eval_E(state, obs_norm, obs.mask),
        LAE=eval_LAE(state, obs_norm, obs.mask),
        P=_safe_P(state, obs, k),
        length_std=wand_length_stats(state.markers).std,
        ms_angles=ms_a,
        ms_lp=ms_lp,
        **extra,
    )


def angle_stage(state: SceneState, obs_norm, mask, cfg: LmConfig, n_jobs=None):
    """Re-solve every camera's angles independently. Returns ``(state, reports)``."""
    n = state.n_cameras
    workers = n_jobs or min(n, os.cpu_count() or 1)
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(lambda i: solve_angles(i, state, obs_norm, mask, cfg), range(n)))
    else:
        results = [solve_angles(i, state, obs_norm, mask, cfg) for i in range(n)]
    new = state.copy()
    new.angles = np.stack([a for a, _ in results])
    return new, [r for _, r in results]


def _separated_stage(state_a, obs, obs_norm, cfg, k):
    sub = solve_subproblem(state_a, obs_norm, obs.mask, cfg.subproblem, cfg.lp, iteration=k)
    state_b, s = recover_scale(sub.state, obs.wand_length, cfg.scale_method)
    extra = dict(lae_lp_in=sub.lae_in, lae_lp_out=sub.lae_out, lp_objective=sub.objective,
                 lp_iterations=sub.iterations, margin=sub.margin, scale=s, lp_solves=1)
    return state_b, extra


def _linearized_stage(state_a, obs, obs_norm, cfg, k, radius):
    """Trust-region loop around :func:`solve_linearized_step`.

    Returns ``(state, extra, radius)``; the state is ``state_a`` itself when no
    step within the smallest radius lowers the absolute error.
    """
    mask = obs.mask
    base = eval_LAE(state_a, obs_norm, mask)
    solves = 0
    iters = 0
    while radius >= cfg.min_trust_radius:
        step = solve_linearized_step(state_a, obs_norm, mask, radius, cfg.subproblem, cfg.lp, k)
        solves += 1
        iters += step.iterations
        cand, s = recover_scale(step.state, obs.wand_length, cfg.scale_method)
        actual = eval_LAE(cand, obs_norm, mask)
        if actual < base:
            predicted = s * step.predicted
            ratio = (base - actual) / (base - predicted) if base > predicted else 1.0
            if ratio > 0.75:
                radius = min(2.0 * radius, cfg.max_trust_radius)
            elif ratio < 0.25:
                radius = max(radius / 2.0, cfg.min_trust_radius)
            extra = dict(lae_lp_in=base, lae_lp_out=actual, lp_objective=step.predicted,
                         lp_iterations=iters, scale=s, trust_radius=radius, lp_solves=solves)
            return cand, extra, radius
        radius /= 4.0
    extra = dict(lae_lp_in=base, lae_lp_out=base, lp_iterations=iters, trust_radius=radius,
                 lp_solves=solves)
    return state_a, extra, radius


def refine(init: SceneState, obs: ObservationSet, cfg: RefineConfig | None = None):
    """Refine ``init`` against ``obs``. Returns ``(state, RefineReport)``.

    Every iteration re-solves all camera angles, then runs the LP stage. The
    loop stops when the relative decrease of ``E`` drops below ``cfg.tol``,
    when ``E`` falls under ``cfg.abs_tol``, when the LP stage can no longer
    lower the absolute error, or when an LP step raises ``E`` (that step is
    rolled back). The result is rescaled so the mean wand length is exact.

    Raises :class:`~wandcal.exceptions.LpFailure` (carrying the iteration) if
    an LP is infeasible or fails.
    """
    cfg = cfg or RefineConfig()
    if init.n_cameras != obs.n_cameras or init.n_markers != obs.n_markers:
        raise InvalidArgumentError("initial state does not match the observation set")
    obs.check_coverage()
    obs_norm = obs.normalized()
    mask = obs.mask
    state, _ = recover_scale(init, obs.wand_length, cfg.scale_method)
    report = RefineReport()
    report.iterations.append(_record(0, state, obs, obs_norm, 0.0, 0.0))
    e_prev = report.iterations[0].E
    radius = cfg.trust_radius
    report.reason = "max_iter"
    for k in range(1, cfg.max_iter + 1):
        t0 = time.perf_counter()
        state_a, angle_reports = angle_stage(state, obs_norm, mask, cfg.lm, cfg.n_jobs)
        report.angle_reports = angle_reports
        t1 = time.perf_counter()
        e_a = eval_E(state_a, obs_norm, mask)
        if cfg.scheme == "separated":
            state_b, extra = _separated_stage(state_a, obs, obs_norm, cfg, k)
            stalled = False
        else:
            state_b, extra, radius = _linearized_stage(state_a, obs, obs_norm, cfg, k, radius)
            stalled = state_b is state_a
        t2 = time.perf_counter()
        e_b = eval_E(state_b, obs_norm, mask)
        ms = (1e3 * (t1 - t0), 1e3 * (t2 - t1))
        if cfg.divergence_guard and e_b > e_a * (1 + 1e-12) + cfg.abs_tol:
            # the LP step made the squared objective worse: keep the angle update only
            state = state_a
            report.iterations.append(_record(k, state, obs, obs_norm, *ms, **extra))
            report.reason = "lae_lse_divergence"
            log.info("iteration %d: LP step raised E from %.3e to %.3e; stopping", k, e_a, e_b)
            break
        state = state_b
        report.iterations.append(_record(k, state, obs, obs_norm, *ms, **extra))
        log.debug("iteration %d: E=%.6e", k, e_b)
        if e_b <= cfg.abs_tol:
            report.reason = "converged"
            break
        if stalled:
            report.reason = "stalled"
            break
        if (e_prev - e_b) < cfg.tol * e_prev:
            report.reason = "converged"
            break
        e_prev = e_b
    state, s = recover_scale(state, obs.wand_length, cfg.scale_method)
    report.final_scale = s
    return state, report


@dataclass(frozen=True)
class Similarity:
    """``y = scale * rotation @ x + translation``."""

    scale: float
    rotation: np.ndarray
    translation: np.ndarray

    def apply_points(self, pts) -> np.ndarray:
        return self.scale * np.asarray(pts) @ self.rotation.T + self.translation

    def apply(self, state: SceneState) -> SceneState:
        centers = self.apply_points(state.centers())
        rots = state.rotations() @ self.rotation.T
        return SceneState.from_rotations(rots, centers, self.apply_points(state.markers))


def umeyama(src, dst, with_scale: bool = True) -> Similarity:
    """Least-squares similarity mapping ``src`` onto ``dst`` (both ``(P, 3)``)."""
    src = np.asarray(src, dtype=float)
    dst = np.asarray(dst, dtype=float)
    mu_s, mu_d = src.mean(axis=0), dst.mean(axis=0)
    a, b = src - mu_s, dst - mu_d
    sv_ref = np.linalg.svd(b, compute_uv=False)
    sv_src = np.linalg.svd(a, compute_uv=False)
    for sv in (sv_ref, sv_src):
        if sv[0] == 0 or sv[1] <= 1e-9 * sv[0]:
            raise DegenerateGeometryError("point set is collinear or coincident; alignment is undefined")
    cov = b.T @ a / len(src)
    u, d, vt = np.linalg.svd(cov)
    sign = np.ones(3)
    if np.linalg.det(u) * np.linalg.det(vt) < 0:
        sign[2] = -1.0
    rot = u @ np.diag(sign) @ vt
    var_src = np.mean(np.sum(a * a, axis=1))
    scale = float(np.sum(d * sign) / var_src) if with_scale else 1.0
    return Similarity(scale, rot, mu_d - scale * rot @ mu_s)


def gauge_align(estimate: SceneState, reference: SceneState):
    """Align ``estimate`` to ``reference`` using camera centers and markers.

    Returns ``(Similarity, aligned_state)``.
    """
    if estimate.n_cameras != reference.n_cameras or estimate.n_markers != reference.n_markers:
        raise InvalidArgumentError("states have different camera or marker counts")
    src = np.vstack([estimate.centers(), estimate.markers])
    dst = np.vstack([reference.centers(), reference.markers])
    sim = umeyama(src, dst)
    return sim, sim.apply(estimate)
