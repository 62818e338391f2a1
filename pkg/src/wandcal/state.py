"""Array-backed container for the full calibration state."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import InvalidArgumentError
from .geometry import CameraPose, euler_from_rotation, rotation_from_euler


@dataclass
class SceneState:
    """Camera angles ``(N, 3)``, camera-frame translations ``(N, 3)`` and markers ``(M, 3)``."""

    angles: np.ndarray
    t_prime: np.ndarray
    markers: np.ndarray

    def __post_init__(self):
        self.angles = np.array(self.angles, dtype=float).reshape(-1, 3)
        self.t_prime = np.array(self.t_prime, dtype=float).reshape(-1, 3)
        self.markers = np.array(self.markers, dtype=float).reshape(-1, 3)
        if self.angles.shape != self.t_prime.shape:
            raise InvalidArgumentError("angles and t_prime must both have shape (N, 3)")
        for name in ("angles", "t_prime", "markers"):
            if not np.all(np.isfinite(getattr(self, name))):
                raise InvalidArgumentError(f"{name} contains non-finite values")

    @property
    def n_cameras(self) -> int:
        return self.angles.shape[0]

    @property
    def n_markers(self) -> int:
        return self.markers.shape[0]

    def copy(self) -> SceneState:
        return SceneState(self.angles.copy(), self.t_prime.copy(), self.markers.copy())

    def rotations(self) -> np.ndarray:
        return np.stack([rotation_from_euler(a) for a in self.angles])

    def centers(self) -> np.ndarray:
        rots = self.rotations()
        return -np.einsum("nji,nj->ni", rots, self.t_prime)

    def poses(self) -> list[CameraPose]:
        return [CameraPose.from_arrays(a, t) for a, t in zip(self.angles, self.t_prime)]

    @classmethod
    def from_rotations(cls, rotations, centers, markers) -> SceneState:
        rotations = np.asarray(rotations, dtype=float)
        centers = np.asarray(centers, dtype=float)
        angles = np.stack([euler_from_rotation(r) for r in rotations])
        t_prime = -np.einsum("nij,nj->ni", rotations, centers)
        return cls(angles, t_prime, markers)

    def scaled(self, s: float) -> SceneState:
        return SceneState(self.angles.copy(), s * self.t_prime, s * self.markers)

    def max_abs(self) -> float:
        return float(max(np.abs(self.t_prime).max(initial=0.0), np.abs(self.markers).max(initial=0.0)))
