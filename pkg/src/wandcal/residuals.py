"""Observation model and the reprojection objectives.

Three objectives are evaluated over the visibility mask:

* ``eval_P``: squared pixel reprojection error (fractional model),
* ``eval_E``: squared non-fractional residuals ``U**2 + V**2``,
* ``eval_LAE``: absolute non-fractional residuals ``|U| + |V|``.

Sums use :func:`math.fsum`, so results do not depend on summation order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .exceptions import (
    BehindCameraError,
    DegenerateGeometryError,
    InsufficientObservationsError,
    InvalidArgumentError,
)
from .geometry import CameraIntrinsics, _pose_parts
from .state import SceneState


@dataclass
class ObservationSet:
    """Feature points ``fps`` of shape ``(M, N, 2)`` (NaN where unobserved).

    Rows ``2k`` and ``2k + 1`` (zero-based) are the two markers of wand frame ``k``.
    """

    fps: np.ndarray
    intrinsics: list[CameraIntrinsics]
    wand_length: float
    mask: np.ndarray = field(default=None)

    def __post_init__(self):
        self.fps = np.array(self.fps, dtype=float)
        if self.fps.ndim != 3 or self.fps.shape[2] != 2:
            raise InvalidArgumentError(f"fps must have shape (M, N, 2), got {self.fps.shape}")
        present = np.all(np.isfinite(self.fps), axis=2)
        if self.mask is None:
            self.mask = present
        else:
            self.mask = np.asarray(self.mask).astype(bool)
            if self.mask.shape != present.shape or np.any(self.mask != present):
                raise InvalidArgumentError("mask must be 1 exactly where a feature point is present")
        self.fps[~self.mask] = np.nan
        if len(self.intrinsics) != self.n_cameras:
            raise InvalidArgumentError(
                f"expected {self.n_cameras} intrinsics entries, got {len(self.intrinsics)}"
            )
        if self.n_markers % 2:
            raise InvalidArgumentError("marker count must be even (two markers per wand frame)")
        if not (np.isfinite(self.wand_length) and self.wand_length > 0):
            raise InvalidArgumentError(f"wand length must be positive, got {self.wand_length}")

    @property
    def n_markers(self) -> int:
        return self.fps.shape[0]

    @property
    def n_cameras(self) -> int:
        return self.fps.shape[1]

    @property
    def n_frames(self) -> int:
        return self.n_markers // 2

    def check_coverage(self, min_cameras: int = 2, min_markers: int = 3):
        """Raise unless every marker is seen by ``min_cameras`` and every camera sees ``min_markers``."""
        per_marker = self.mask.sum(axis=1)
        bad = np.flatnonzero(per_marker < min_cameras)
        if bad.size:
            raise InsufficientObservationsError(
                f"markers {bad[:10].tolist()} are seen by fewer than {min_cameras} cameras"
            )
        per_cam = self.mask.sum(axis=0)
        bad = np.flatnonzero(per_cam < min_markers)
        if bad.size:
            raise InsufficientObservationsError(
                f"cameras {bad.tolist()} observe fewer than {min_markers} markers"
            )

    def normalized(self) -> np.ndarray:
        """Normalized coordinates ``(u_bar, v_bar)``, zero where unobserved."""
        k = np.array([c.as_array() for c in self.intrinsics])
        f, alpha, beta, gamma = k.T
        out = np.empty_like(self.fps)
        out[..., 0] = (self.fps[..., 0] - alpha) / (gamma * f)
        out[..., 1] = (self.fps[..., 1] - beta) / f
        out[~self.mask] = 0.0
        return out


@dataclass(frozen=True)
class ResidualPair:
    U: float
    V: float


def residual_uv(x, pose, fp_norm) -> ResidualPair:
    """Non-fractional residuals of one observation.

    ``U = (u_bar r3 - r1) x + u_bar t'_z - t'_x`` and likewise for ``V``.
    """
    rot, t = _pose_parts(pose)
    p = rot @ np.asarray(x, dtype=float) + t
    ub, vb = fp_norm
    return ResidualPair(float(ub * p[2] - p[0]), float(vb * p[2] - p[1]))


def camera_frame_points(state: SceneState) -> np.ndarray:
    """All markers in all camera frames, shape ``(M, N, 3)``."""
    rots = state.rotations()
    return np.einsum("nij,mj->mni", rots, state.markers) + state.t_prime[None, :, :]


def residual_arrays(state: SceneState, obs_norm, mask):
    """``U`` and ``V`` of shape ``(M, N)``; zero where ``mask`` is false."""
    p = camera_frame_points(state)
    U = obs_norm[..., 0] * p[..., 2] - p[..., 0]
    V = obs_norm[..., 1] * p[..., 2] - p[..., 1]
    U = np.where(mask, U, 0.0)
    V = np.where(mask, V, 0.0)
    return U, V


def _fsum(a) -> float:
    return math.fsum(np.ravel(a).tolist())


def eval_E(state: SceneState, obs_norm, mask) -> float:
    U, V = residual_arrays(state, obs_norm, mask)
    return _fsum(np.square(U[mask])) + _fsum(np.square(V[mask]))


def eval_LAE(state: SceneState, obs_norm, mask) -> float:
    U, V = residual_arrays(state, obs_norm, mask)
    return _fsum(np.abs(U[mask])) + _fsum(np.abs(V[mask]))


def reprojection_errors(state: SceneState, obs: ObservationSet) -> np.ndarray:
    """Pixel differences ``(u - u_obs, v - v_obs)`` for observed pairs, shape ``(K, 2)``.

    Raises :class:`BehindCameraError` if an observed marker has non-positive depth.
    """
    p = camera_frame_points(state)
    depth = p[..., 2]
    behind = obs.mask & ~(depth > 0)
    if behind.any():
        m, n = np.argwhere(behind)[0]
        raise BehindCameraError(int(m), int(n), float(depth[m, n]))
    k = np.array([c.as_array() for c in obs.intrinsics])
    f, alpha, beta, gamma = k.T
    with np.errstate(divide="ignore", invalid="ignore"):
        u = alpha + gamma * f * p[..., 0] / depth
        v = beta + f * p[..., 1] / depth
    du = (u - obs.fps[..., 0])[obs.mask]
    dv = (v - obs.fps[..., 1])[obs.mask]
    return np.column_stack([du, dv])


def eval_P(state: SceneState, obs: ObservationSet) -> float:
    """Sum of squared pixel reprojection errors over observed pairs."""
    return _fsum(np.square(reprojection_errors(state, obs)))


def reprojection_rms(state: SceneState, obs: ObservationSet) -> float:
    """Root mean square pixel error per observed image coordinate pair."""
    n = int(obs.mask.sum())
    return math.sqrt(eval_P(state, obs) / n) if n else 0.0


@dataclass(frozen=True)
class WandLengthStats:
    mean: float
    lengths: np.ndarray
    std: float


def wand_length_stats(markers) -> WandLengthStats:
    markers = np.asarray(markers, dtype=float)
    if markers.shape[0] % 2:
        raise InvalidArgumentError("marker count must be even")
    lengths = np.linalg.norm(markers[1::2] - markers[0::2], axis=1)
    return WandLengthStats(float(np.mean(lengths)), lengths, float(np.std(lengths)))


def recover_scale(state: SceneState, d: float, method: str = "mean"):
    """Rescale translations and markers so the estimated wand length equals ``d``.

    Both ``t'`` and the markers are multiplied, which leaves every normalized
    residual ratio unchanged. Returns ``(scaled_state, s)``.
    """
    stats = wand_length_stats(state.markers)
    if method == "mean":
        dm = stats.mean
    elif method == "median":
        dm = float(np.median(stats.lengths))
    else:
        raise InvalidArgumentError(f"unknown scale method {method!r}")
    if not dm > 0:
        raise DegenerateGeometryError("estimated wand length is zero; scale cannot be recovered")
    s = d / dm
    return state.scaled(s), s
