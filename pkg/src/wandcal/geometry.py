"""Rotation parameterization and the pinhole camera model.

Conventions: right-handed frames, camera z axis points forward (depth),
x to the right, y down in the image. A pose maps world points into the
camera frame as ``p_cam = R(phi) @ x + t_prime`` where
``R(phi) = Rz(phi_z) @ Ry(phi_y) @ Rx(phi_x)`` acts on column vectors.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import BehindCameraError, InvalidArgumentError


def _finite_vector(values, size, name):
    arr = np.asarray(values, dtype=float)
    if arr.shape != (size,):
        raise InvalidArgumentError(f"{name} must have shape ({size},), got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise InvalidArgumentError(f"{name} must be finite, got {arr}")
    return arr


def wrap_angle(a):
    """Map angles to the half-open interval (-pi, pi]."""
    a = np.asarray(a, dtype=float)
    out = np.pi - np.mod(np.pi - a, 2.0 * np.pi)
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class EulerAngles:
    phi_x: float
    phi_y: float
    phi_z: float

    def __post_init__(self):
        _finite_vector([self.phi_x, self.phi_y, self.phi_z], 3, "angles")

    @classmethod
    def from_array(cls, a) -> EulerAngles:
        a = _finite_vector(a, 3, "angles")
        return cls(float(a[0]), float(a[1]), float(a[2]))

    def as_array(self) -> np.ndarray:
        return np.array([self.phi_x, self.phi_y, self.phi_z])

    def normalized(self) -> EulerAngles:
        return EulerAngles.from_array(wrap_angle(self.as_array()))


@dataclass(frozen=True)
class CameraIntrinsics:
    """Focal length ``f``, principal point ``(alpha, beta)`` and aspect ratio ``gamma``."""

    f: float
    alpha: float
    beta: float
    gamma: float = 1.0

    def __post_init__(self):
        _finite_vector([self.f, self.alpha, self.beta, self.gamma], 4, "intrinsics")
        if self.f <= 0:
            raise InvalidArgumentError(f"focal length must be positive, got {self.f}")
        if self.gamma <= 0:
            raise InvalidArgumentError(f"aspect ratio must be positive, got {self.gamma}")

    def as_array(self) -> np.ndarray:
        return np.array([self.f, self.alpha, self.beta, self.gamma])


@dataclass(frozen=True)
class CameraPose:
    angles: EulerAngles
    t_prime: tuple[float, float, float]

    def __post_init__(self):
        t = _finite_vector(self.t_prime, 3, "t_prime")
        object.__setattr__(self, "t_prime", tuple(float(v) for v in t))

    @classmethod
    def from_arrays(cls, angles, t_prime) -> CameraPose:
        return cls(EulerAngles.from_array(angles), tuple(np.asarray(t_prime, dtype=float)))

    @property
    def rotation(self) -> np.ndarray:
        return rotation_from_euler(self.angles)

    @property
    def translation(self) -> np.ndarray:
        return np.array(self.t_prime)


def _as_angle_array(angles) -> np.ndarray:
    if isinstance(angles, EulerAngles):
        return angles.as_array()
    return _finite_vector(angles, 3, "angles")


def _elementary(angles):
    ax, ay, az = angles
    cx, sx = np.cos(ax), np.sin(ax)
    cy, sy = np.cos(ay), np.sin(ay)
    cz, sz = np.cos(az), np.sin(az)
    rx = np.array([[1.0, 0.0, 0.0], [0.0, cx, -sx], [0.0, sx, cx]])
    ry = np.array([[cy, 0.0, sy], [0.0, 1.0, 0.0], [-sy, 0.0, cy]])
    rz = np.array([[cz, -sz, 0.0], [sz, cz, 0.0], [0.0, 0.0, 1.0]])
    drx = np.array([[0.0, 0.0, 0.0], [0.0, -sx, -cx], [0.0, cx, -sx]])
    dry = np.array([[-sy, 0.0, cy], [0.0, 0.0, 0.0], [-cy, 0.0, -sy]])
    drz = np.array([[-sz, -cz, 0.0], [cz, -sz, 0.0], [0.0, 0.0, 0.0]])
    return (rx, ry, rz), (drx, dry, drz)


def rotation_from_euler(angles) -> np.ndarray:
    """Return ``Rz(phi_z) @ Ry(phi_y) @ Rx(phi_x)``."""
    (rx, ry, rz), _ = _elementary(_as_angle_array(angles))
    return rz @ ry @ rx


def rotation_derivatives(angles) -> tuple[np.ndarray, np.ndarray]:
    """Rotation matrix and its partials with respect to (phi_x, phi_y, phi_z).

    The second array has shape (3, 3, 3); ``dR[k]`` is dR/dphi_k.
    """
    (rx, ry, rz), (drx, dry, drz) = _elementary(_as_angle_array(angles))
    rot = rz @ ry @ rx
    d = np.stack([rz @ ry @ drx, rz @ dry @ rx, drz @ ry @ rx])
    return rot, d


def euler_from_rotation(rot) -> np.ndarray:
    """Inverse of :func:`rotation_from_euler` (angles in (-pi, pi]).

    At gimbal lock (|phi_y| = pi/2) phi_x is set to zero.
    """
    rot = np.asarray(rot, dtype=float)
    sy = -rot[2, 0]
    sy = min(1.0, max(-1.0, sy))
    ay = np.arcsin(sy)
    cy = np.hypot(rot[0, 0], rot[1, 0])
    if cy > 1e-12:
        ax = np.arctan2(rot[2, 1], rot[2, 2])
        az = np.arctan2(rot[1, 0], rot[0, 0])
    else:
        ax = 0.0
        az = np.arctan2(-rot[0, 1], rot[1, 1])
    return wrap_angle(np.array([ax, ay, az]))


def rotation_angle_between(r1, r2) -> float:
    """Geodesic distance (radians) between two rotation matrices."""
    r = np.asarray(r1).T @ np.asarray(r2)
    # atan2 of (2 sin, 2 cos) stays accurate near zero, unlike arccos of the trace
    skew = np.array([r[2, 1] - r[1, 2], r[0, 2] - r[2, 0], r[1, 0] - r[0, 1]])
    return float(np.arctan2(np.linalg.norm(skew), np.trace(r) - 1.0))


def _pose_parts(pose):
    if isinstance(pose, CameraPose):
        return pose.rotation, pose.translation
    angles, t = pose
    return rotation_from_euler(angles), _finite_vector(t, 3, "t_prime")


def project(x, pose, k: CameraIntrinsics, marker_index=None, camera_index=None):
    """Project world point ``x`` into pixel coordinates ``(u, v)``.

    ``pose`` is a :class:`CameraPose` or an ``(angles, t_prime)`` pair.
    """
    x = _finite_vector(x, 3, "x")
    rot, t = _pose_parts(pose)
    p = rot @ x + t
    if not p[2] > 0:
        raise BehindCameraError(marker_index, camera_index, float(p[2]))
    u = k.alpha + k.gamma * k.f * p[0] / p[2]
    v = k.beta + k.f * p[1] / p[2]
    return float(u), float(v)


def normalize_fp(fp, k: CameraIntrinsics):
    """Pixel observation to normalized image coordinates.

    The aspect ratio divides the horizontal coordinate so that a perfect
    observation yields a zero residual.
    """
    u, v = fp
    return (u - k.alpha) / (k.gamma * k.f), (v - k.beta) / k.f


def camera_center(pose) -> np.ndarray:
    """World position of the optical center, ``-R^T t'``."""
    rot, t = _pose_parts(pose)
    return -rot.T @ t


def look_at_rotation(center, target, up=(0.0, 0.0, 1.0)) -> np.ndarray:
    """World-to-camera rotation for a camera at ``center`` looking at ``target``."""
    fwd = np.asarray(target, dtype=float) - np.asarray(center, dtype=float)
    fwd /= np.linalg.norm(fwd)
    right = np.cross(fwd, np.asarray(up, dtype=float))
    nr = np.linalg.norm(right)
    if nr < 1e-9:
        raise InvalidArgumentError("viewing direction is parallel to the up vector")
    right /= nr
    down = np.cross(fwd, right)
    return np.vstack([right, down, fwd])
