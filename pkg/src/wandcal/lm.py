"""Levenberg-Marquardt solve of one camera's Euler angles at fixed markers and translation."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve

from .exceptions import InsufficientObservationsError, InvalidArgumentError, NumericError
from .geometry import rotation_derivatives, rotation_from_euler, wrap_angle
from .state import SceneState


@dataclass(frozen=True)
class LmConfig:
    lambda0: float = 1e-3
    lambda_up: float = 10.0
    lambda_down: float = 10.0
    max_iter: int = 50
    grad_tol: float = 1e-10
    step_tol: float = 1e-12

    def __post_init__(self):
        if not self.lambda0 > 0:
            raise InvalidArgumentError("lambda0 must be positive")
        if not (self.lambda_up > 1 and self.lambda_down > 1):
            raise InvalidArgumentError("damping factors must exceed 1")
        if not (self.grad_tol > 0 and self.step_tol > 0):
            raise InvalidArgumentError("tolerances must be positive")
        if self.max_iter < 1:
            raise InvalidArgumentError("max_iter must be at least 1")


@dataclass(frozen=True)
class AngleSolveReport:
    iterations: int
    initial_cost: float
    final_cost: float
    reason: str
    grad_norm: float


def _camera_data(n, state: SceneState, obs_norm, mask):
    vis = np.flatnonzero(mask[:, n])
    return state.markers[vis], obs_norm[vis, n], state.t_prime[n]


def stacked_residuals(angles, xs, t, fpn):
    p = xs @ rotation_from_euler(angles).T + t
    r = np.empty((xs.shape[0], 2))
    r[:, 0] = fpn[:, 0] * p[:, 2] - p[:, 0]
    r[:, 1] = fpn[:, 1] * p[:, 2] - p[:, 1]
    return r.ravel()


def stacked_jacobian(angles, xs, fpn):
    _, d = rotation_derivatives(angles)
    # dp[k] has shape (K, 3): derivative of camera-frame points w.r.t. angle k
    dp = np.einsum("kij,mj->kmi", d, xs)
    jac = np.empty((xs.shape[0], 2, 3))
    jac[:, 0, :] = (fpn[:, 0][None, :] * dp[:, :, 2] - dp[:, :, 0]).T
    jac[:, 1, :] = (fpn[:, 1][None, :] * dp[:, :, 2] - dp[:, :, 1]).T
    return jac.reshape(-1, 3)


def angle_jacobian(n: int, state: SceneState, obs_norm, mask) -> np.ndarray:
    """Rows ``dU_m/dphi`` and ``dV_m/dphi`` interleaved over markers visible to camera ``n``."""
    xs, fpn, _ = _camera_data(n, state, obs_norm, mask)
    return stacked_jacobian(state.angles[n], xs, fpn)


def angle_residuals(n: int, state: SceneState, obs_norm, mask) -> np.ndarray:
    xs, fpn, t = _camera_data(n, state, obs_norm, mask)
    return stacked_residuals(state.angles[n], xs, t, fpn)


def _solve_damped(jtj, g, lam):
    a = jtj + lam * np.eye(3)
    while True:
        try:
            return cho_solve(cho_factor(a), -g)
        except LinAlgError:
            lam = max(lam * 10.0, 1e-12)
            a = jtj + lam * np.eye(3)


def solve_angles(n: int, state: SceneState, obs_norm, mask, cfg: LmConfig | None = None):
    """Minimize ``sum_m U_mn**2 + V_mn**2`` over camera ``n``'s angles.

    Only camera ``n``'s entry of ``state`` is read besides the markers; the
    state is not modified. Returns ``(angles, AngleSolveReport)``.
    """
    cfg = cfg or LmConfig()
    xs, fpn, t = _camera_data(n, state, obs_norm, mask)
    if xs.shape[0] < 3:
        raise InsufficientObservationsError(
            f"camera {n} observes {xs.shape[0]} markers; at least 3 are needed"
        )
    phi = state.angles[n].copy()
    r = stacked_residuals(phi, xs, t, fpn)
    cost = float(r @ r)
    if not np.isfinite(cost):
        raise NumericError(f"non-finite residual for camera {n}")
    initial = cost
    lam = cfg.lambda0
    reason = "max_iter"
    gnorm = np.inf
    it = 0
    while it < cfg.max_iter:
        jac = stacked_jacobian(phi, xs, fpn)
        g = jac.T @ r
        gnorm = float(np.max(np.abs(g)))
        if gnorm < cfg.grad_tol:
            reason = "gradient"
            break
        jtj = jac.T @ jac
        it += 1
        delta = _solve_damped(jtj, g, lam)
        cand = phi + delta
        r_new = stacked_residuals(cand, xs, t, fpn)
        cost_new = float(r_new @ r_new)
        if not np.isfinite(cost_new):
            raise NumericError(f"non-finite residual for camera {n}")
        if cost_new < cost:
            phi, r, cost = cand, r_new, cost_new
            lam = max(lam / cfg.lambda_down, 1e-15)
            if np.linalg.norm(delta) <= cfg.step_tol * (np.linalg.norm(phi) + cfg.step_tol):
                reason = "step"
                break
        else:
            lam *= cfg.lambda_up
            if np.linalg.norm(delta) <= cfg.step_tol * (np.linalg.norm(phi) + cfg.step_tol):
                reason = "step"
                break
    if reason != "gradient":
        gnorm = float(np.max(np.abs(stacked_jacobian(phi, xs, fpn).T @ r)))
    return wrap_angle(phi), AngleSolveReport(it, initial, cost, reason, gnorm)
