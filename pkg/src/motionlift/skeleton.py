"""Skeleton topologies: joint trees, rest bone lengths, and rest directions.

Three parent tables ship with the package:

* ``toy8`` -- the 8-joint desk-scale default (pelvis, chest, head, two
  hip/foot legs, and a chest-to-hands midpoint),
* ``smpl22`` -- the 22-joint SMPL body tree with neutral bone lengths,
* ``coco17`` -- the COCO keypoint set arranged as a tree rooted at the
  left hip (COCO has no pelvis; the rooting is a convention documented
  here so the lifting pipeline stays joint-format agnostic).

The parent array uses ``parent[root] == root``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .validation import as_float_array


@dataclass(frozen=True)
class Skeleton:
    """Joint tree with rest bone lengths and (optional) rest directions.

    ``rest_directions[j]`` is the unit vector from parent to joint j in the
    rest pose; it is required by the forward-kinematics motion generators
    but not by triangulation or metrics.
    """

    parent: np.ndarray  # (J,) int, parent[root] == root
    rest_bone_lengths: np.ndarray  # (J,) meters, 0 at the root
    joint_names: tuple[str, ...]
    rest_directions: np.ndarray | None = None  # (J, 3) unit vectors
    name: str = "custom"

    def __post_init__(self):
        parent = np.asarray(self.parent, dtype=np.int64).copy()
        lengths = as_float_array(self.rest_bone_lengths, "rest_bone_lengths").copy()
        J = len(parent)
        if lengths.shape != (J,) or len(self.joint_names) != J:
            raise ValueError("parent, rest_bone_lengths, and joint_names disagree in length")
        roots = np.flatnonzero(parent == np.arange(J))
        if len(roots) != 1:
            raise ValueError("skeleton must have exactly one root with parent[root] == root")
        root = int(roots[0])
        # Walking up from every joint must terminate at the root (acyclic).
        for j in range(J):
            seen, k = set(), j
            while k != root:
                if k in seen:
                    raise ValueError(f"parent array has a cycle through joint {j}")
                seen.add(k)
                k = int(parent[k])
        if np.any(lengths[np.arange(J) != root] <= 0):
            raise ValueError("non-root bone lengths must be positive")
        dirs = self.rest_directions
        if dirs is not None:
            dirs = as_float_array(dirs, "rest_directions", (J, 3)).copy()
            norms = np.linalg.norm(dirs, axis=1)
            nonroot = np.arange(J) != root
            if np.any(np.abs(norms[nonroot] - 1.0) > 1e-6):
                dirs[nonroot] = dirs[nonroot] / norms[nonroot, None]
            dirs[root] = 0.0
            dirs.setflags(write=False)
        parent.setflags(write=False)
        lengths.setflags(write=False)
        object.__setattr__(self, "parent", parent)
        object.__setattr__(self, "rest_bone_lengths", lengths)
        object.__setattr__(self, "joint_names", tuple(self.joint_names))
        object.__setattr__(self, "rest_directions", dirs)
        object.__setattr__(self, "_root", root)

    @property
    def joint_count(self) -> int:
        return len(self.parent)

    @property
    def root(self) -> int:
        return self._root

    @property
    def foot_joints(self) -> tuple[int, ...]:
        """Joints whose names contain 'foot' or 'ankle'."""
        return tuple(
            j for j, n in enumerate(self.joint_names) if "foot" in n or "ankle" in n
        )

    def topological_order(self) -> list[int]:
        """Joint indices ordered so parents precede children."""
        order, placed = [self.root], {self.root}
        while len(order) < self.joint_count:
            for j in range(self.joint_count):
                if j not in placed and int(self.parent[j]) in placed:
                    order.append(j)
                    placed.add(j)
        return order


def toy8_skeleton() -> Skeleton:
    """8-joint desk-scale skeleton; straight legs, hands merged to one point."""
    names = ("pelvis", "chest", "head", "left_hip", "left_foot",
             "right_hip", "right_foot", "hands")
    parent = [0, 0, 1, 0, 3, 0, 5, 1]
    lengths = [0.0, 0.45, 0.35, 0.12, 0.80, 0.12, 0.80, 0.50]
    dirs = np.array([
        [0.0, 0.0, 0.0],   # pelvis (root)
        [0.0, 0.0, 1.0],   # chest: up
        [0.0, 0.0, 1.0],   # head: up
        [0.0, 1.0, 0.0],   # left hip: lateral (+y when facing +x)
        [0.0, 0.0, -1.0],  # left foot: down
        [0.0, -1.0, 0.0],  # right hip
        [0.0, 0.0, -1.0],  # right foot
        [2.0, 0.0, -1.0],  # hands: forward and slightly below the chest
    ])
    return Skeleton(parent=np.array(parent), rest_bone_lengths=np.array(lengths),
                    joint_names=names, rest_directions=dirs, name="toy8")


def smpl22_skeleton() -> Skeleton:
    """22-joint SMPL body tree with neutral-body bone lengths."""
    names = (
        "pelvis", "left_hip", "right_hip", "spine1", "left_knee", "right_knee",
        "spine2", "left_ankle", "right_ankle", "spine3", "left_foot", "right_foot",
        "neck", "left_collar", "right_collar", "head", "left_shoulder",
        "right_shoulder", "left_elbow", "right_elbow", "left_wrist", "right_wrist",
    )
    parent = [0, 0, 0, 0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 9, 9, 12, 13, 14, 16, 17, 18, 19]
    lengths = [0.0, 0.11, 0.11, 0.12, 0.38, 0.38, 0.14, 0.41, 0.41, 0.06,
               0.14, 0.14, 0.21, 0.15, 0.15, 0.10, 0.10, 0.10, 0.26, 0.26, 0.25, 0.25]
    down, up = [0.0, 0.0, -1.0], [0.0, 0.0, 1.0]
    left, right = [0.0, 1.0, 0.0], [0.0, -1.0, 0.0]
    fwd_down = [0.7, 0.0, -0.7]
    dirs = np.array([
        [0, 0, 0], left, right, up, down, down, up, down, down, up,
        fwd_down, fwd_down, up, left, right, up, left, right, down, down, down, down,
    ], dtype=np.float64)
    return Skeleton(parent=np.array(parent), rest_bone_lengths=np.array(lengths),
                    joint_names=names, rest_directions=dirs, name="smpl22")


def coco17_skeleton() -> Skeleton:
    """COCO-17 keypoints as a tree rooted at the left hip (convention)."""
    names = (
        "nose", "left_eye", "right_eye", "left_ear", "right_ear",
        "left_shoulder", "right_shoulder", "left_elbow", "right_elbow",
        "left_wrist", "right_wrist", "left_hip", "right_hip",
        "left_knee", "right_knee", "left_ankle", "right_ankle",
    )
    parent = [5, 0, 0, 1, 2, 11, 12, 5, 6, 7, 8, 11, 11, 11, 12, 13, 14]
    lengths = [0.55, 0.06, 0.06, 0.08, 0.08, 0.50, 0.50, 0.28, 0.28,
               0.26, 0.26, 0.0, 0.22, 0.43, 0.43, 0.42, 0.42]
    up, down = [0.0, 0.0, 1.0], [0.0, 0.0, -1.0]
    left, right = [0.0, 1.0, 0.0], [0.0, -1.0, 0.0]
    dirs = np.array([
        up, [0.4, 0.9, 0.2], [0.4, -0.9, 0.2], [-0.5, 0.8, 0.0], [-0.5, -0.8, 0.0],
        up, up, down, down, down, down,
        [0, 0, 0], right, down, down, down, down,
    ], dtype=np.float64)
    return Skeleton(parent=np.array(parent), rest_bone_lengths=np.array(lengths),
                    joint_names=names, rest_directions=dirs, name="coco17")


SKELETONS = {
    "toy8": toy8_skeleton,
    "smpl22": smpl22_skeleton,
    "coco17": coco17_skeleton,
}


def get_skeleton(name: str) -> Skeleton:
    try:
        return SKELETONS[name]()
    except KeyError:
        raise ValueError(f"unknown skeleton {name!r}; choose from {sorted(SKELETONS)}") from None
