"""Synthetic camera rigs and wand recordings.

Cameras sit on a ring above the capture volume and look inward. The wand
midpoint follows a random walk, confined for the first ``m_cal // 2`` frames
to a low box under every camera, and free in a larger box afterwards.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .exceptions import DegenerateGeometryError, InvalidArgumentError
from .geometry import CameraIntrinsics, look_at_rotation
from .residuals import ObservationSet
from .state import SceneState


@dataclass(frozen=True)
class SceneSpec:
    n_cameras: int = 4
    n_frames: int = 150
    wand_length: float = 0.5
    ring_radius: float = 4.0
    height_range: tuple[float, float] = (2.5, 3.5)
    target: tuple[float, float, float] = (0.0, 0.0, 1.0)
    focal_range: tuple[float, float] = (800.0, 1000.0)
    gamma_range: tuple[float, float] = (0.98, 1.02)
    image_size: tuple[int, int] = (1280, 960)
    low_box: tuple = ((-1.0, 1.0), (-1.0, 1.0), (0.3, 0.9))
    free_box: tuple = ((-1.5, 1.5), (-1.5, 1.5), (0.3, 2.0))
    step: float = 0.15
    m_cal: int = 200
    noise: float = 0.0
    dropout: float = 0.0
    seed: int = 0
    max_resample: int = 200

    def __post_init__(self):
        if self.n_cameras < 2:
            raise InvalidArgumentError(f"at least 2 cameras are required, got {self.n_cameras}")
        if self.n_frames < 2:
            raise InvalidArgumentError(f"at least 2 frames are required, got {self.n_frames}")
        if not self.wand_length > 0:
            raise InvalidArgumentError("wand length must be positive")
        if self.noise < 0 or not 0 <= self.dropout < 1:
            raise InvalidArgumentError("noise must be >= 0 and dropout in [0, 1)")
        if self.m_cal < 0:
            raise InvalidArgumentError("m_cal must be non-negative")
        ceiling = self.low_box[2][1] + self.wand_length / 2
        if not self.height_range[0] > ceiling:
            raise InvalidArgumentError(
                f"camera heights must be above the low-start ceiling {ceiling} m"
            )


@dataclass
class GroundTruth:
    state: SceneState
    intrinsics: list[CameraIntrinsics]
    frustum_mask: np.ndarray = field(repr=False)
    low_start_markers: int = 0


def _make_cameras(spec: SceneSpec, rng):
    n = spec.n_cameras
    phase = rng.uniform(0, 2 * np.pi)
    rots, centers, intr = [], [], []
    for i in range(n):
        th = phase + 2 * np.pi * i / n + rng.uniform(-0.2, 0.2)
        h = rng.uniform(*spec.height_range)
        r = spec.ring_radius * rng.uniform(0.9, 1.1)
        c = np.array([r * np.cos(th), r * np.sin(th), h])
        target = np.asarray(spec.target) + rng.uniform(-0.2, 0.2, 3)
        rots.append(look_at_rotation(c, target))
        centers.append(c)
        w, hgt = spec.image_size
        intr.append(CameraIntrinsics(
            f=rng.uniform(*spec.focal_range),
            alpha=w / 2 + rng.uniform(-10, 10),
            beta=hgt / 2 + rng.uniform(-10, 10),
            gamma=rng.uniform(*spec.gamma_range),
        ))
    return np.array(rots), np.array(centers), intr


def _pixels(points, rots, centers, intr):
    """Pixel coordinates ``(P, N, 2)`` and depths ``(P, N)``."""
    p = np.einsum("nij,pnj->pni", rots, points[:, None, :] - centers[None, :, :])
    k = np.array([c.as_array() for c in intr])
    f, alpha, beta, gamma = k.T
    depth = p[..., 2]
    with np.errstate(divide="ignore", invalid="ignore"):
        u = alpha + gamma * f * p[..., 0] / depth
        v = beta + f * p[..., 1] / depth
    return np.stack([u, v], axis=-1), depth


def _in_frustum(px, depth, spec):
    w, h = spec.image_size
    return (depth > 0.1) & (px[..., 0] >= 0) & (px[..., 0] < w) & (px[..., 1] >= 0) & (px[..., 1] < h)


def generate_scene(spec: SceneSpec):
    """Build a rig and a wand recording. Returns ``(GroundTruth, ObservationSet)``."""
    rng = np.random.default_rng(spec.seed)
    rots, centers, intr = _make_cameras(spec, rng)
    n_low = min(spec.m_cal // 2 + spec.m_cal % 2, spec.n_frames)
    half = spec.wand_length / 2
    markers = np.empty((2 * spec.n_frames, 3))
    frustum = np.zeros((2 * spec.n_frames, spec.n_cameras), dtype=bool)
    mask = np.zeros_like(frustum)
    low = np.array(spec.low_box, dtype=float)
    free = np.array(spec.free_box, dtype=float)
    mid = low.mean(axis=1)
    for k in range(spec.n_frames):
        box = low if k < n_low else free
        for _ in range(spec.max_resample):
            cand = np.clip(mid + spec.step * rng.normal(size=3), box[:, 0], box[:, 1])
            axis = rng.normal(size=3)
            axis /= np.linalg.norm(axis)
            pts = np.stack([cand - half * axis, cand + half * axis])
            px, depth = _pixels(pts, rots, centers, intr)
            vis = _in_frustum(px, depth, spec)
            if np.all(vis.sum(axis=1) >= 2):
                break
        else:
            raise DegenerateGeometryError(f"frame {k}: no wand placement is seen by two cameras")
        for _ in range(spec.max_resample):
            keep = vis & (rng.random(vis.shape) >= spec.dropout)
            if np.all(keep.sum(axis=1) >= 2):
                break
        else:
            raise DegenerateGeometryError(f"frame {k}: dropout leaves fewer than two views")
        mid = cand
        markers[2 * k: 2 * k + 2] = pts
        frustum[2 * k: 2 * k + 2] = vis
        mask[2 * k: 2 * k + 2] = keep
    if np.any(mask.sum(axis=0) < 3):
        raise DegenerateGeometryError("a camera observes fewer than three markers")
    px, _ = _pixels(markers, rots, centers, intr)
    if spec.noise > 0:
        px = px + rng.normal(scale=spec.noise, size=px.shape)
    px[~mask] = np.nan
    state = SceneState.from_rotations(rots, centers, markers)
    truth = GroundTruth(state, intr, frustum, min(2 * n_low, 2 * spec.n_frames))
    return truth, ObservationSet(px, intr, spec.wand_length, mask)


def perturb_state(state: SceneState, angle: float = 0.0, translation: float = 0.0,
                  marker: float = 0.0, seed=None, bound: float = 10.0) -> SceneState:
    """Add uniform noise of the given half-widths (radians, meters, meters), clamped to bounds."""
    if min(angle, translation, marker) < 0:
        raise InvalidArgumentError("perturbation magnitudes must be non-negative")
    rng = np.random.default_rng(seed)
    angles = state.angles + rng.uniform(-angle, angle, state.angles.shape)
    t_prime = state.t_prime + rng.uniform(-translation, translation, state.t_prime.shape)
    markers = state.markers + rng.uniform(-marker, marker, state.markers.shape)
    return SceneState(angles, np.clip(t_prime, -bound, bound), np.clip(markers, -bound, bound))
