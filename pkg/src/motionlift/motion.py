"""World-coordinate 3D motion container."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .skeleton import Skeleton
from .validation import as_float_array, check_finite


@dataclass(frozen=True)
class Motion3D:
    """A (T, J, 3) world-coordinate joint trajectory in meters."""

    coords: np.ndarray
    fps: float = 30.0
    skeleton: Skeleton | None = None

    def __post_init__(self):
        coords = as_float_array(self.coords, "coords").copy()
        if coords.ndim != 3 or coords.shape[-1] != 3:
            raise ValueError(f"coords must have shape (T, J, 3), got {coords.shape}")
        check_finite(coords, "coords")
        if self.fps <= 0:
            raise ValueError("fps must be positive")
        if self.skeleton is not None and self.skeleton.joint_count != coords.shape[1]:
            raise ValueError(
                f"skeleton has {self.skeleton.joint_count} joints, coords have {coords.shape[1]}"
            )
        coords.setflags(write=False)
        object.__setattr__(self, "coords", coords)

    @property
    def frame_count(self) -> int:
        return self.coords.shape[0]

    @property
    def joint_count(self) -> int:
        return self.coords.shape[1]

    def with_coords(self, coords: np.ndarray) -> "Motion3D":
        return Motion3D(coords=coords, fps=self.fps, skeleton=self.skeleton)
