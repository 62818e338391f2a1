"""Accuracy metrics of an estimated state against a reference, after similarity alignment."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import InvalidArgumentError
from .geometry import rotation_angle_between
from .refine import Similarity, gauge_align
from .residuals import ObservationSet, reprojection_rms, wand_length_stats
from .state import SceneState


@dataclass
class Metrics:
    center_errors: np.ndarray
    angle_errors_deg: np.ndarray
    marker_rms: float
    reprojection_rms: float | None
    wand_length_std: float
    similarity: Similarity

    def summary(self) -> dict:
        return {
            "center_error_max_m": float(self.center_errors.max()),
            "center_error_mean_m": float(self.center_errors.mean()),
            "angle_error_max_deg": float(self.angle_errors_deg.max()),
            "angle_error_mean_deg": float(self.angle_errors_deg.mean()),
            "marker_rms_m": self.marker_rms,
            "reprojection_rms_px": self.reprojection_rms,
            "wand_length_std_m": self.wand_length_std,
        }

    def table_rows(self):
        yield ("camera", "center_error_m", "angle_error_deg")
        for i, (c, a) in enumerate(zip(self.center_errors, self.angle_errors_deg)):
            yield (i, float(c), float(a))

    def format_table(self) -> str:
        lines = [f"{'camera':>6}  {'center err [m]':>15}  {'angle err [deg]':>15}"]
        for i, c, a in list(self.table_rows())[1:]:
            lines.append(f"{i:>6}  {c:>15.6e}  {a:>15.6e}")
        lines.append("")
        for k, v in self.summary().items():
            lines.append(f"{k:>22}: {'n/a' if v is None else f'{v:.6e}'}")
        return "\n".join(lines)


def evaluate(estimate: SceneState, reference: SceneState, obs: ObservationSet | None = None) -> Metrics:
    """Align ``estimate`` to ``reference`` and measure the remaining discrepancy.

    The reprojection RMS is taken on the unaligned estimate (alignment does not
    change it up to scale) and only when observations are supplied.
    """
    if estimate.n_cameras != reference.n_cameras:
        raise InvalidArgumentError(
            f"camera counts differ: {estimate.n_cameras} vs {reference.n_cameras}")
    if estimate.n_markers != reference.n_markers:
        raise InvalidArgumentError(
            f"marker counts differ: {estimate.n_markers} vs {reference.n_markers}")
    sim, aligned = gauge_align(estimate, reference)
    centers = np.linalg.norm(aligned.centers() - reference.centers(), axis=1)
    angles = np.array([rotation_angle_between(a, b)
                       for a, b in zip(aligned.rotations(), reference.rotations())])
    diff = aligned.markers - reference.markers
    marker_rms = float(np.sqrt(np.mean(np.sum(diff * diff, axis=1))))
    rms = reprojection_rms(estimate, obs) if obs is not None else None
    return Metrics(centers, np.rad2deg(angles), marker_rms, rms,
                   wand_length_stats(estimate.markers).std, sim)
