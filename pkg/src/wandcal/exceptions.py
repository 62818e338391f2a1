"""Exception types raised across the package."""


class WandCalError(Exception):
    """Base class for all package errors."""


class InvalidArgumentError(WandCalError, ValueError):
    pass


class BehindCameraError(WandCalError):
    """A marker projects with non-positive depth."""

    def __init__(self, marker_index=None, camera_index=None, depth=None):
        self.marker_index = marker_index
        self.camera_index = camera_index
        self.depth = depth
        super().__init__(
            f"marker {marker_index} is behind camera {camera_index} (depth={depth})"
        )


class DegenerateGeometryError(WandCalError):
    pass


class InsufficientObservationsError(WandCalError):
    pass


class NumericError(WandCalError, ArithmeticError):
    pass


class LpFailure(WandCalError):
    """The LP subproblem did not reach an optimal solution."""

    def __init__(self, status, iteration=None, message=""):
        self.status = status
        self.iteration = iteration
        super().__init__(message or f"LP returned status {status!r} at iteration {iteration}")


class SchemaError(WandCalError, ValueError):
    """A dataset, results or config document failed validation."""

    def __init__(self, message, path=()):
        self.path = tuple(path)
        loc = "/".join(str(p) for p in self.path) or "<root>"
        super().__init__(f"{loc}: {message}")
