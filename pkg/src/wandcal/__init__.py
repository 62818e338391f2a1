"""Wand-based refinement of multi-camera extrinsics."""

from .estimator import WandCalibrator
from .evaluation import Metrics, evaluate
from .exceptions import (
    BehindCameraError,
    DegenerateGeometryError,
    InsufficientObservationsError,
    InvalidArgumentError,
    LpFailure,
    NumericError,
    SchemaError,
    WandCalError,
)
from .geometry import CameraIntrinsics, CameraPose, EulerAngles, project, rotation_from_euler
from .refine import RefineConfig, RefineReport, gauge_align, refine
from .residuals import ObservationSet, eval_E, eval_LAE, eval_P, recover_scale
from .simulate import SceneSpec, generate_scene, perturb_state
from .state import SceneState

__version__ = "0.1.0"

__all__ = [
    "BehindCameraError",
    "CameraIntrinsics",
    "CameraPose",
    "DegenerateGeometryError",
    "EulerAngles",
    "InsufficientObservationsError",
    "InvalidArgumentError",
    "LpFailure",
    "Metrics",
    "NumericError",
    "ObservationSet",
    "RefineConfig",
    "RefineReport",
    "SceneSpec",
    "SceneState",
    "SchemaError",
    "WandCalError",
    "WandCalibrator",
    "eval_E",
    "eval_LAE",
    "eval_P",
    "evaluate",
    "gauge_align",
    "generate_scene",
    "perturb_state",
    "project",
    "recover_scale",
    "refine",
    "rotation_from_euler",
]
