"""Disentangled 2D motion: local pose plus root trajectory and bbox scale.

A per-view global 2D motion (T, J, 2) splits into

* ``trajectory`` -- the root joint's pixel position per frame,
* ``scale`` -- per-axis half-extent of the all-joint bounding box, floored
  at ``EPS_SCALE`` so degenerate poses stay invertible,
* ``local`` -- the remaining J-1 joints, root-centered and divided by the
  scale componentwise.

Decoding is the exact inverse: non-root joints are ``local * scale +
trajectory`` and the root is the trajectory itself, so encode/decode round
trips in pixel space to float precision. Because the scale includes the
root, each local coordinate is bounded by 2 in magnitude (the root-centered
offset can span at most the full box extent).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .validation import as_float_array, check_finite

#: Scale floor in pixels; prevents division by zero on degenerate frames.
EPS_SCALE = 1e-3

#: Bound on |local| guaranteed by :func:`encode` (see module docstring).
LOCAL_BOUND = 2.0


@dataclass(frozen=True)
class GlobalMotion2D:
    """Per-view 2D joint trajectories in pixels, shape (T, J, 2)."""

    coords: np.ndarray
    view_index: int = 0

    def __post_init__(self):
        coords = as_float_array(self.coords, "coords").copy()
        if coords.ndim != 3 or coords.shape[-1] != 2:
            raise ValueError(f"coords must have shape (T, J, 2), got {coords.shape}")
        if coords.shape[0] < 1 or coords.shape[1] < 2:
            raise ValueError("need at least 1 frame and 2 joints")
        check_finite(coords, "coords")
        coords.setflags(write=False)
        object.__setattr__(self, "coords", coords)

    @property
    def frame_count(self) -> int:
        return self.coords.shape[0]

    @property
    def joint_count(self) -> int:
        return self.coords.shape[1]


@dataclass(frozen=True)
class DisentangledMotion:
    """Local pose (T, J-1, 2), trajectory (T, 2), and scale (T, 2)."""

    local: np.ndarray
    trajectory: np.ndarray
    scale: np.ndarray
    root_joint: int
    view_index: int = 0

    def __post_init__(self):
        local = as_float_array(self.local, "local").copy()
        traj = as_float_array(self.trajectory, "trajectory").copy()
        scale = as_float_array(self.scale, "scale").copy()
        if local.ndim != 3 or local.shape[-1] != 2:
            raise ValueError(f"local must have shape (T, J-1, 2), got {local.shape}")
        T = local.shape[0]
        if traj.shape != (T, 2) or scale.shape != (T, 2):
            raise ValueError("trajectory and scale must both have shape (T, 2)")
        for arr, name in ((local, "local"), (traj, "trajectory"), (scale, "scale")):
            check_finite(arr, name)
        if np.any(scale < EPS_SCALE * (1 - 1e-9)):
            raise ValueError(f"scale components must be >= {EPS_SCALE}")
        if not 0 <= self.root_joint <= local.shape[1]:
            raise ValueError("root_joint out of range")
        for arr in (local, traj, scale):
            arr.setflags(write=False)
        object.__setattr__(self, "local", local)
        object.__setattr__(self, "trajectory", traj)
        object.__setattr__(self, "scale", scale)

    @property
    def frame_count(self) -> int:
        return self.local.shape[0]

    @property
    def joint_count(self) -> int:
        return self.local.shape[1] + 1


def bbox_per_frame(motion: GlobalMotion2D) -> tuple[np.ndarray, np.ndarray]:
    """Per-frame axis-aligned bounding box over all joints.

    Returns ``(centers, half_extents)``, both (T, 2) in pixels; half-extents
    are floored at ``EPS_SCALE``.
    """
    lo = motion.coords.min(axis=1)
    hi = motion.coords.max(axis=1)
    centers = (lo + hi) / 2.0
    half_extents = np.maximum((hi - lo) / 2.0, EPS_SCALE)
    return centers, half_extents


def encode(motion: GlobalMotion2D, root_joint: int = 0) -> DisentangledMotion:
    """Split global 2D motion into local pose, trajectory, and scale."""
    coords = motion.coords
    if not 0 <= root_joint < coords.shape[1]:
        raise ValueError(f"root_joint {root_joint} out of range [0, {coords.shape[1]})")
    trajectory = coords[:, root_joint, :]
    _, scale = bbox_per_frame(motion)
    others = np.delete(coords, root_joint, axis=1)
    local = (others - trajectory[:, None, :]) / scale[:, None, :]
    return DisentangledMotion(
        local=local,
        trajectory=trajectory,
        scale=scale,
        root_joint=root_joint,
        view_index=motion.view_index,
    )


def decode(d: DisentangledMotion) -> GlobalMotion2D:
    """Invert :func:`encode`: local * scale + trajectory, root re-inserted."""
    others = d.local * d.scale[:, None, :] + d.trajectory[:, None, :]
    coords = np.insert(others, d.root_joint, d.trajectory, axis=1)
    return GlobalMotion2D(coords=coords, view_index=d.view_index)
