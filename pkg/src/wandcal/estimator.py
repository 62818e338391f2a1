"""scikit-learn style wrapper around :func:`wandcal.refine.refine`."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .exceptions import InvalidArgumentError
from .lm import LmConfig
from .lp import LpConfig
from .refine import RefineConfig, refine
from .residuals import ObservationSet, camera_frame_points, reprojection_rms
from .state import SceneState
from .subproblem import SubproblemConfig


def check_observations(obs) -> ObservationSet:
    if not isinstance(obs, ObservationSet):
        raise InvalidArgumentError(f"expected an ObservationSet, got {type(obs).__name__}")
    obs.check_coverage()
    return obs


def check_state(state, obs: ObservationSet | None = None) -> SceneState:
    if not isinstance(state, SceneState):
        raise InvalidArgumentError(f"expected a SceneState, got {type(state).__name__}")
    if obs is not None and (state.n_cameras != obs.n_cameras or state.n_markers != obs.n_markers):
        raise InvalidArgumentError(
            f"state has {state.n_cameras} cameras / {state.n_markers} markers, "
            f"observations have {obs.n_cameras} / {obs.n_markers}")
    return state


class WandCalibrator(BaseEstimator):
    """Refine camera poses and wand markers from an initial guess.

    ``fit(obs, init)`` runs the refinement; the result is in ``state_``,
    the per-iteration history in ``report_``. ``predict`` projects world
    points through the fitted cameras; ``score`` is the negative pixel RMS.
    """

    def __init__(self, max_iter=100, tol=1e-8, m_cal=200, bound=10.0, scheme="linearized",
                 lp_method="highs", trust_radius=0.1, n_jobs=None):
        self.max_iter = max_iter
        self.tol = tol
        self.m_cal = m_cal
        self.bound = bound
        self.scheme = scheme
        self.lp_method = lp_method
        self.trust_radius = trust_radius
        self.n_jobs = n_jobs

    def _config(self) -> RefineConfig:
        return RefineConfig(
            max_iter=self.max_iter, tol=self.tol, lm=LmConfig(),
            lp=LpConfig(method=self.lp_method),
            subproblem=SubproblemConfig(bound=self.bound, m_cal=self.m_cal),
            scheme=self.scheme, trust_radius=self.trust_radius, n_jobs=self.n_jobs,
        )

    def fit(self, obs, init=None):
        obs = check_observations(obs)
        if init is None:
            raise InvalidArgumentError(
                "an initial state is required; initialization is not part of this package")
        init = check_state(init, obs)
        self.state_, self.report_ = refine(init, obs, self._config())
        self.n_iter_ = len(self.report_.iterations) - 1
        self.n_cameras_ = obs.n_cameras
        self.intrinsics_ = list(obs.intrinsics)
        return self

    def predict(self, points):
        """Pixel coordinates ``(P, N, 2)`` of world points; NaN where a point is behind a camera."""
        check_is_fitted(self, "state_")
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        if pts.shape[-1] != 3:
            raise InvalidArgumentError("points must have shape (P, 3)")
        st = SceneState(self.state_.angles, self.state_.t_prime, pts)
        cam = camera_frame_points(st)
        out = np.full(cam.shape[:2] + (2,), np.nan)
        for n, k in enumerate(self.intrinsics_):
            p = cam[:, n]
            ok = p[:, 2] > 0
            out[ok, n, 0] = k.alpha + k.gamma * k.f * p[ok, 0] / p[ok, 2]
            out[ok, n, 1] = k.beta + k.f * p[ok, 1] / p[ok, 2]
        return out

    def transform(self, obs):
        """Normalized image coordinates of ``obs``; masked entries are zero."""
        return check_observations(obs).normalized()

    def score(self, obs, y=None):
        check_is_fitted(self, "state_")
        obs = check_observations(obs)
        check_state(self.state_, obs)
        return -reprojection_rms(self.state_, obs)

