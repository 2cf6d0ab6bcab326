"""File formats: motion documents, rig files, and JSON plumbing.

All documents are JSON with a ``format_version`` field. Floats are written
with ``repr`` precision (the json module's default), which round-trips
float64 exactly. Writers go through a write-then-rename so interrupted runs
never leave partial files.

Motion document (3D)::

    {"format_version": 1, "type": "motion3d", "fps": 30.0,
     "joint_names": [...] | null, "frames": [[[x, y, z] * J] * T]}

Motion document (2D) is analogous with ``"type": "motion2d"``, a
``view_index`` field, and T x J x 2 frames.

Rig file::

    {"format_version": 1, "primary_index": 0, "cameras": [
        {"fx": ..., "fy": ..., "cx": ..., "cy": ...,
         "rotation": [r00, r01, ..., r22],   # row-major, must be orthonormal
         "translation": [tx, ty, tz],
         "image_w": ..., "image_h": ...}, ...]}

Parsers reject rigs whose rotations fail the orthonormality check in
:class:`~motionlift.geometry.Camera`.
"""

from __future__ import annotations

import json
import os
from pathlib import Path

import numpy as np

from .errors import IoFailure
from .geometry import Camera, CameraRig, Pointmap
from .motion import Motion3D
from .representation import DisentangledMotion, GlobalMotion2D
from .skeleton import Skeleton

FORMAT_VERSION = 1


def atomic_write_json(obj, path, indent: int | None = 1) -> None:
    """Serialize ``obj`` to ``path`` via a temp file and atomic rename."""
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        tmp = path.with_name(path.name + ".tmp")
        with open(tmp, "w") as f:
            json.dump(obj, f, indent=indent)
            f.write("\n")
        os.replace(tmp, path)
    except OSError as e:
        raise IoFailure(f"cannot write {path}: {e}") from e


def load_json(path) -> dict:
    path = Path(path)
    try:
        with open(path) as f:
            return json.load(f)
    except OSError as e:
        raise IoFailure(f"cannot read {path}: {e}") from e
    except json.JSONDecodeError as e:
        raise IoFailure(f"malformed JSON in {path} at line {e.lineno} column {e.colno}: {e.msg}") from e


def _require(doc: dict, field: str, path) -> object:
    if field not in doc:
        raise IoFailure(f"{path}: missing required field {field!r}")
    return doc[field]


# ---------------------------------------------------------------------------
# motion documents

def motion3d_to_dict(motion: Motion3D) -> dict:
    names = list(motion.skeleton.joint_names) if motion.skeleton is not None else None
    return {
        "format_version": FORMAT_VERSION,
        "type": "motion3d",
        "fps": motion.fps,
        "joint_names": names,
        "frames": motion.coords.tolist(),
    }


def motion3d_from_dict(doc: dict, path="<memory>", skeleton: Skeleton | None = None) -> Motion3D:
    if doc.get("type") != "motion3d":
        raise IoFailure(f"{path}: field 'type' must be 'motion3d', got {doc.get('type')!r}")
    frames = np.asarray(_require(doc, "frames", path), dtype=np.float64)
    if frames.ndim != 3 or frames.shape[-1] != 3:
        raise IoFailure(f"{path}: field 'frames' must be T x J x 3, got shape {frames.shape}")
    return Motion3D(coords=frames, fps=float(_require(doc, "fps", path)), skeleton=skeleton)


def save_motion3d(motion: Motion3D, path) -> None:
    atomic_write_json(motion3d_to_dict(motion), path)


def load_motion3d(path, skeleton: Skeleton | None = None) -> Motion3D:
    return motion3d_from_dict(load_json(path), path, skeleton)


def motion2d_to_dict(motion: GlobalMotion2D) -> dict:
    return {
        "format_version": FORMAT_VERSION,
        "type": "motion2d",
        "view_index": motion.view_index,
        "frames": motion.coords.tolist(),
    }


def motion2d_from_dict(doc: dict, path="<memory>") -> GlobalMotion2D:
    if doc.get("type") != "motion2d":
        raise IoFailure(f"{path}: field 'type' must be 'motion2d', got {doc.get('type')!r}")
    frames = np.asarray(_require(doc, "frames", path), dtype=np.float64)
    if frames.ndim != 3 or frames.shape[-1] != 2:
        raise IoFailure(f"{path}: field 'frames' must be T x J x 2, got shape {frames.shape}")
    return GlobalMotion2D(coords=frames, view_index=int(doc.get("view_index", 0)))


def save_motion2d(motion: GlobalMotion2D, path) -> None:
    atomic_write_json(motion2d_to_dict(motion), path)


def load_motion2d(path) -> GlobalMotion2D:
    return motion2d_from_dict(load_json(path), path)


# ---------------------------------------------------------------------------
# cameras and rigs

def camera_to_dict(camera: Camera) -> dict:
    return {
        "fx": camera.fx, "fy": camera.fy, "cx": camera.cx, "cy": camera.cy,
        "rotation": camera.rotation.ravel().tolist(),
        "translation": camera.translation.tolist(),
        "image_w": camera.image_w, "image_h": camera.image_h,
    }


def camera_from_dict(doc: dict, path="<memory>") -> Camera:
    rotation = np.asarray(_require(doc, "rotation", path), dtype=np.float64)
    if rotation.size != 9:
        raise IoFailure(f"{path}: field 'rotation' must hold 9 floats (row-major 3x3)")
    try:
        return Camera(
            fx=float(_require(doc, "fx", path)), fy=float(_require(doc, "fy", path)),
            cx=float(_require(doc, "cx", path)), cy=float(_require(doc, "cy", path)),
            rotation=rotation.reshape(3, 3),
            translation=np.asarray(_require(doc, "translation", path), dtype=np.float64),
            image_w=int(_require(doc, "image_w", path)),
            image_h=int(_require(doc, "image_h", path)),
        )
    except ValueError as e:
        raise IoFailure(f"{path}: invalid camera: {e}") from e


def rig_to_dict(rig: CameraRig) -> dict:
    return {
        "format_version": FORMAT_VERSION,
        "primary_index": rig.primary_index,
        "cameras": [camera_to_dict(c) for c in rig.cameras],
    }


def rig_from_dict(doc: dict, path="<memory>") -> CameraRig:
    cams = _require(doc, "cameras", path)
    if not isinstance(cams, list) or not cams:
        raise IoFailure(f"{path}: field 'cameras' must be a non-empty list")
    cameras = tuple(camera_from_dict(c, path) for c in cams)
    try:
        return CameraRig(cameras=cameras, primary_index=int(doc.get("primary_index", 0)))
    except ValueError as e:
        raise IoFailure(f"{path}: invalid rig: {e}") from e


def save_rig(rig: CameraRig, path) -> None:
    atomic_write_json(rig_to_dict(rig), path)


def load_rig(path) -> CameraRig:
    return rig_from_dict(load_json(path), path)


# ---------------------------------------------------------------------------
# pointmaps and disentangled motion (dataset internals)

def pointmap_to_dict(pm: Pointmap) -> dict:
    return {
        "grid_w": pm.grid_w, "grid_h": pm.grid_h, "view_index": pm.view_index,
        "points": pm.points.tolist(), "valid": pm.valid.astype(int).tolist(),
    }


def pointmap_from_dict(doc: dict) -> Pointmap:
    return Pointmap(
        grid_w=int(doc["grid_w"]), grid_h=int(doc["grid_h"]),
        points=np.asarray(doc["points"], dtype=np.float64),
        valid=np.asarray(doc["valid"], dtype=bool),
        view_index=int(doc.get("view_index", 0)),
    )


def disentangled_to_dict(d: DisentangledMotion) -> dict:
    return {
        "root_joint": d.root_joint, "view_index": d.view_index,
        "local": d.local.tolist(), "trajectory": d.trajectory.tolist(),
        "scale": d.scale.tolist(),
    }


def disentangled_from_dict(doc: dict) -> DisentangledMotion:
    return DisentangledMotion(
        local=np.asarray(doc["local"], dtype=np.float64),
        trajectory=np.asarray(doc["trajectory"], dtype=np.float64),
        scale=np.asarray(doc["scale"], dtype=np.float64),
        root_joint=int(doc["root_joint"]),
        view_index=int(doc.get("view_index", 0)),
    )
