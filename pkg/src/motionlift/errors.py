"""Exception types shared across the package."""


class MotionLiftError(Exception):
    """Base class for all package-specific errors."""


class NonPositiveDepth(MotionLiftError):
    """A point lies behind or on the camera plane (Z_c <= 1e-9)."""

    def __init__(self, frame: int, joint: int, depth: float):
        self.frame = frame
        self.joint = joint
        self.depth = depth
        super().__init__(
            f"point (frame={frame}, joint={joint}) has non-positive camera depth {depth:.3e}"
        )


class InsufficientViews(MotionLiftError):
    """Fewer than two unmasked observations for a point."""

    def __init__(self, frame: int, joint: int, count: int):
        self.frame = frame
        self.joint = joint
        self.count = count
        super().__init__(
            f"point (frame={frame}, joint={joint}) has {count} valid view(s); need at least 2"
        )


class DegenerateGeometry(MotionLiftError):
    """Triangulation normal equations are too ill-conditioned (near-parallel rays)."""

    def __init__(self, frame: int, joint: int, cond: float):
        self.frame = frame
        self.joint = joint
        self.cond = cond
        super().__init__(
            f"point (frame={frame}, joint={joint}) normal-equation condition {cond:.3e} exceeds 1e10"
        )


class UnknownKind(MotionLiftError):
    """Requested motion kind is not registered."""


class IoFailure(MotionLiftError):
    """A file could not be read, parsed, or written."""


class BadStepCount(MotionLiftError):
    """Diffusion schedule cannot be built for the requested step count."""


class ShapeMismatch(MotionLiftError):
    """Array arguments disagree in shape."""


class ModeMismatch(MotionLiftError):
    """Denoiser invoked with inputs from the wrong (single/multi view) mode."""


class DatasetModeMismatch(MotionLiftError):
    """Training stage is incompatible with the model or dataset."""


class NonFiniteState(MotionLiftError):
    """A denoising step produced NaN or infinite values."""


class NonFiniteCost(MotionLiftError):
    """Refinement cost evaluated to NaN or infinity."""


class DegenerateConfiguration(MotionLiftError):
    """Point set is collinear or coincident; alignment transform is not unique."""


class TooShort(MotionLiftError):
    """Sequence has too few frames for the requested finite difference."""
