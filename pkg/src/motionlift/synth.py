"""Synthetic motion generation, augmentation, and multi-view dataset building.

Motions come from forward kinematics over smooth joint-angle curves (at most
three Fourier harmonics), so bone lengths are constant by construction.
Gait-style generators (walker, circle, squat) shift each frame vertically so
the lowest joint touches z = 0, giving exact per-frame ground contact;
``random_smooth`` applies one global shift instead to preserve smoothness.

Dataset layout (see :func:`build_dataset`)::

    out_dir/
      manifest.json          # seeds, params, skeleton, sample file list
      sample_00000.json      # motion, rig, per-view 2d/disentangled/pointmaps
      ...
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import io
from .errors import UnknownKind
from .geometry import Camera, CameraRig, Pointmap, look_at_camera, pointmap_generate, project
from .motion import Motion3D
from .representation import DisentangledMotion, GlobalMotion2D, encode
from .skeleton import Skeleton, get_skeleton

MOTION_KINDS = ("walker", "circle", "squat", "random_smooth")

DEFAULT_POINTMAP_GRID = 16


@dataclass(frozen=True)
class AugmentParams:
    """Ranges for rigid motion augmentation and camera-pose sampling.

    All angle ranges are radians and sampled uniformly in [-range, +range];
    ``translation_range`` gives per-axis horizontal extents in meters.
    """

    yaw_range: float = np.pi
    translation_range: tuple[float, float] = (0.8, 0.8)
    cam_pitch_range: float = 0.08
    cam_yaw_range: float = 0.08
    cam_roll_range: float = 0.05
    cam_distance_range: float = 0.4
    seed: int = 0

    def __post_init__(self):
        tr = self.translation_range
        if np.isscalar(tr):
            tr = (float(tr), float(tr))
        tr = (float(tr[0]), float(tr[1]))
        object.__setattr__(self, "translation_range", tr)
        ranges = (self.yaw_range, *tr, self.cam_pitch_range, self.cam_yaw_range,
                  self.cam_roll_range, self.cam_distance_range)
        if any(r < 0 for r in ranges):
            raise ValueError("augmentation ranges must be non-negative")


@dataclass(frozen=True)
class MotionSample:
    """One dataset entry: a motion with its rig and derived per-view data."""

    motion: Motion3D
    rig: CameraRig
    views_2d: tuple[GlobalMotion2D, ...]
    disentangled: tuple[DisentangledMotion, ...]
    pointmaps: tuple[Pointmap, ...]
    kind: str
    index: int = 0


# ---------------------------------------------------------------------------
# forward kinematics

def _rot_z(a: np.ndarray) -> np.ndarray:
    c, s = np.cos(a), np.sin(a)
    zero, one = np.zeros_like(a), np.ones_like(a)
    return np.stack([
        np.stack([c, -s, zero], -1),
        np.stack([s, c, zero], -1),
        np.stack([zero, zero, one], -1),
    ], -2)


def _rot_y(a: np.ndarray) -> np.ndarray:
    c, s = np.cos(a), np.sin(a)
    zero, one = np.zeros_like(a), np.ones_like(a)
    return np.stack([
        np.stack([c, zero, s], -1),
        np.stack([zero, one, zero], -1),
        np.stack([-s, zero, c], -1),
    ], -2)


def _rot_x(a: np.ndarray) -> np.ndarray:
    c, s = np.cos(a), np.sin(a)
    zero, one = np.zeros_like(a), np.ones_like(a)
    return np.stack([
        np.stack([one, zero, zero], -1),
        np.stack([zero, c, -s], -1),
        np.stack([zero, s, c], -1),
    ], -2)


def _forward_kinematics(skeleton: Skeleton, root_pos: np.ndarray, root_yaw: np.ndarray,
                        swing: np.ndarray) -> np.ndarray:
    """Pose the skeleton: per-joint swing = (pitch about y, roll about x).

    Rotations compose down the chain, so a parent's swing carries its whole
    subtree. Returns (T, J, 3) joint positions.
    """
    if skeleton.rest_directions is None:
        raise ValueError(f"skeleton {skeleton.name!r} has no rest directions for FK")
    T, J = root_pos.shape[0], skeleton.joint_count
    coords = np.zeros((T, J, 3))
    global_rot = np.zeros((T, J, 3, 3))
    root = skeleton.root
    coords[:, root] = root_pos
    global_rot[:, root] = _rot_z(root_yaw)
    for j in skeleton.topological_order()[1:]:
        p = int(skeleton.parent[j])
        local = _rot_y(swing[:, j, 0]) @ _rot_x(swing[:, j, 1])
        global_rot[:, j] = global_rot[:, p] @ local
        offset = skeleton.rest_bone_lengths[j] * skeleton.rest_directions[j]
        coords[:, j] = coords[:, p] + np.einsum("tab,b->ta", global_rot[:, j], offset)
    return coords


def _ground_shift(coords: np.ndarray, per_frame: bool) -> np.ndarray:
    """Shift vertically so the lowest joint touches z = 0."""
    out = coords.copy()
    if per_frame:
        out[..., 2] -= coords[..., 2].min(axis=1, keepdims=True)
    else:
        out[..., 2] -= coords[..., 2].min()
    return out


def _recenter_xy(coords: np.ndarray, root: int) -> np.ndarray:
    out = coords.copy()
    out[..., :2] -= coords[:, root, :2].mean(axis=0)
    return out


def _joint_index(skeleton: Skeleton, name: str) -> int | None:
    try:
        return skeleton.joint_names.index(name)
    except ValueError:
        return None


def _gait_swing(skeleton: Skeleton, phase: np.ndarray, rng: np.random.Generator,
                leg_amp: float) -> np.ndarray:
    """Shared walker/circle leg, arm, and torso curves."""
    T, J = len(phase), skeleton.joint_count
    swing = np.zeros((T, J, 2))
    lift = 0.20 + 0.10 * rng.random()
    # Swing whichever leg pivots exist: toy8 has hip->foot bones arriving at
    # the feet; smpl22/coco17 swing their thighs at the knee joints.
    for name, sign in (("left_foot", 1.0), ("right_foot", -1.0),
                       ("left_knee", 1.0), ("right_knee", -1.0)):
        j = _joint_index(skeleton, name)
        if j is not None:
            swing[:, j, 0] = sign * leg_amp * np.sin(phase)
            swing[:, j, 1] = sign * lift * (1 + sign * np.sin(phase)) / 2
    for name, amp in (("hands", 0.3), ("left_elbow", 0.35), ("right_elbow", -0.35),
                      ("left_shoulder", 0.2), ("right_shoulder", -0.2)):
        j = _joint_index(skeleton, name)
        if j is not None:
            swing[:, j, 0] = amp * np.sin(phase)
    for name in ("chest", "spine1"):
        j = _joint_index(skeleton, name)
        if j is not None:
            swing[:, j, 0] = 0.05 * np.sin(2 * phase)
    return swing


def _leg_clearance(skeleton: Skeleton) -> float:
    """Rest-pose distance from the root down to the lowest joint."""
    rest = _forward_kinematics(
        skeleton, np.zeros((1, 3)), np.zeros(1), np.zeros((1, skeleton.joint_count, 2)))
    return float(-rest[0, :, 2].min())


def _make_walker(skeleton, frames, fps, rng):
    t = np.arange(frames) / fps
    speed = 0.9 * (0.85 + 0.3 * rng.random())
    freq = 1.4 * (0.85 + 0.3 * rng.random())
    phase = 2 * np.pi * freq * t + rng.uniform(0, 2 * np.pi)
    swing = _gait_swing(skeleton, phase, rng, leg_amp=0.45 + 0.15 * rng.random())
    root_pos = np.stack([speed * t, np.zeros(frames),
                         np.full(frames, _leg_clearance(skeleton))], -1)
    coords = _forward_kinematics(skeleton, root_pos, np.zeros(frames), swing)
    return _ground_shift(coords, per_frame=True)


def _make_circle(skeleton, frames, fps, rng):
    t = np.arange(frames) / fps
    radius = 0.7 + 0.4 * rng.random()
    speed = 0.8 * (0.85 + 0.3 * rng.random())
    omega = speed / radius
    theta0 = rng.uniform(0, 2 * np.pi)
    theta = theta0 + omega * t
    freq = 1.4 * (0.85 + 0.3 * rng.random())
    phase = 2 * np.pi * freq * t + rng.uniform(0, 2 * np.pi)
    swing = _gait_swing(skeleton, phase, rng, leg_amp=0.4 + 0.15 * rng.random())
    root_pos = np.stack([radius * np.cos(theta), radius * np.sin(theta),
                         np.full(frames, _leg_clearance(skeleton))], -1)
    yaw = theta + np.pi / 2  # tangent heading
    coords = _forward_kinematics(skeleton, root_pos, yaw, swing)
    return _ground_shift(coords, per_frame=True)


def _make_squat(skeleton, frames, fps, rng):
    t = np.arange(frames) / fps
    freq = 0.5 * (0.8 + 0.4 * rng.random())
    depth = 0.5 + 0.3 * rng.random()  # peak leg splay in radians
    theta = depth * (1 - np.cos(2 * np.pi * freq * t)) / 2
    T, J = frames, skeleton.joint_count
    swing = np.zeros((T, J, 2))
    for name, sign in (("left_foot", 1.0), ("right_foot", -1.0),
                       ("left_knee", 1.0), ("right_knee", -1.0)):
        j = _joint_index(skeleton, name)
        if j is not None:
            swing[:, j, 1] = sign * theta
    for name in ("hands", "left_elbow", "right_elbow"):
        j = _joint_index(skeleton, name)
        if j is not None:
            swing[:, j, 0] = -0.8 * theta
    root_pos = np.stack([np.zeros(T), np.zeros(T), np.full(T, _leg_clearance(skeleton))], -1)
    coords = _forward_kinematics(skeleton, root_pos, np.zeros(T), swing)
    return _ground_shift(coords, per_frame=True)


def _fourier_curve(rng, frames, fps, amplitude, harmonics=3):
    """Smooth zero-mean curve with at most ``harmonics`` low harmonics."""
    t = np.arange(frames) / fps
    duration = max(frames / fps, 1e-9)
    out = np.zeros(frames)
    for k in range(1, harmonics + 1):
        a = rng.normal(0, amplitude / k)
        phi = rng.uniform(0, 2 * np.pi)
        out += a * np.sin(2 * np.pi * k * t / duration + phi)
    return out


def _make_random_smooth(skeleton, frames, fps, rng):
    J = skeleton.joint_count
    swing = np.zeros((frames, J, 2))
    for j in range(J):
        if j == skeleton.root:
            continue
        swing[:, j, 0] = _fourier_curve(rng, frames, fps, 0.25)
        swing[:, j, 1] = _fourier_curve(rng, frames, fps, 0.25)
    root_pos = np.stack([
        _fourier_curve(rng, frames, fps, 0.3),
        _fourier_curve(rng, frames, fps, 0.3),
        _leg_clearance(skeleton) + _fourier_curve(rng, frames, fps, 0.04),
    ], -1)
    yaw = _fourier_curve(rng, frames, fps, 0.5)
    coords = _forward_kinematics(skeleton, root_pos, yaw, swing)
    return _ground_shift(coords, per_frame=False)


_GENERATORS = {
    "walker": _make_walker,
    "circle": _make_circle,
    "squat": _make_squat,
    "random_smooth": _make_random_smooth,
}


def generate_motion(skeleton: Skeleton, kind: str, frames: int, seed: int,
                    fps: float = 30.0) -> Motion3D:
    """Generate a deterministic synthetic motion of the given kind.

    The x/y root path is re-centered on the origin so augmentation ranges
    bound the subject's distance from the rig center.
    """
    if frames < 2:
        raise ValueError("need at least 2 frames")
    try:
        gen = _GENERATORS[kind]
    except KeyError:
        raise UnknownKind(f"unknown motion kind {kind!r}; choose from {MOTION_KINDS}") from None
    rng = np.random.default_rng(seed)
    coords = gen(skeleton, frames, fps, rng)
    coords = _recenter_xy(coords, skeleton.root)
    return Motion3D(coords=coords, fps=fps, skeleton=skeleton)


# ---------------------------------------------------------------------------
# augmentation

def augment_motion(motion: Motion3D, params: AugmentParams) -> Motion3D:
    """Apply a random yaw about the world z-axis and a horizontal translation.

    Rigid by construction: bone lengths and per-frame ground clearance are
    bit-preserved in z.
    """
    rng = np.random.default_rng(params.seed)
    yaw = rng.uniform(-params.yaw_range, params.yaw_range) if params.yaw_range > 0 else 0.0
    tx, ty = params.translation_range
    dx = rng.uniform(-tx, tx) if tx > 0 else 0.0
    dy = rng.uniform(-ty, ty) if ty > 0 else 0.0
    c, s = np.cos(yaw), np.sin(yaw)
    xy = motion.coords[..., :2]
    rotated = np.stack([c * xy[..., 0] - s * xy[..., 1],
                        s * xy[..., 0] + c * xy[..., 1]], -1)
    coords = np.concatenate([rotated + np.array([dx, dy]), motion.coords[..., 2:]], -1)
    return motion.with_coords(coords)


def sample_camera_rig(base: CameraRig, params: AugmentParams, seed: int) -> CameraRig:
    """Perturb every non-primary camera's orbit pose around the origin.

    Yaw/pitch move the camera on its viewing sphere (azimuth/elevation),
    distance changes the orbit radius, and roll spins the re-aimed camera
    about its optical axis. The camera is always re-aimed at the origin;
    base cameras must therefore already target the origin.
    """
    for cam in base.cameras:
        aim = -cam.center
        aim_norm = np.linalg.norm(aim)
        if aim_norm < 1e-9 or np.dot(cam.rotation[2], aim / aim_norm) < 1 - 1e-6:
            raise ValueError("sample_camera_rig requires base cameras aimed at the origin")
    if (params.cam_pitch_range == 0 and params.cam_yaw_range == 0
            and params.cam_roll_range == 0 and params.cam_distance_range == 0):
        return base
    rng = np.random.default_rng(seed)
    cameras = []
    for idx, cam in enumerate(base.cameras):
        if idx == base.primary_index:
            cameras.append(cam)
            continue
        center = cam.center
        radius = np.linalg.norm(center)
        azimuth = np.arctan2(center[1], center[0])
        elevation = np.arcsin(np.clip(center[2] / radius, -1, 1))
        azimuth += rng.uniform(-params.cam_yaw_range, params.cam_yaw_range)
        elevation = np.clip(
            elevation + rng.uniform(-params.cam_pitch_range, params.cam_pitch_range),
            0.02, np.pi / 2 - 0.02)
        radius = max(radius + rng.uniform(-params.cam_distance_range,
                                          params.cam_distance_range), 0.5)
        roll = rng.uniform(-params.cam_roll_range, params.cam_roll_range)
        new_center = radius * np.array([
            np.cos(elevation) * np.cos(azimuth),
            np.cos(elevation) * np.sin(azimuth),
            np.sin(elevation),
        ])
        cameras.append(look_at_camera(
            new_center, (0.0, 0.0, 0.0), fx=cam.fx, fy=cam.fy, cx=cam.cx, cy=cam.cy,
            image_w=cam.image_w, image_h=cam.image_h, roll=roll))
    return CameraRig(cameras=tuple(cameras), primary_index=base.primary_index)


def default_rig(views: int = 4, radius: float = 3.0, height: float = 1.6,
                fx: float = 1000.0, image_size: int = 1000) -> CameraRig:
    """Evenly spaced cameras on a circle, aimed at the origin; view 0 primary."""
    cameras = []
    for v in range(views):
        azimuth = 2 * np.pi * v / views
        center = (radius * np.cos(azimuth), radius * np.sin(azimuth), height)
        cameras.append(look_at_camera(
            center, (0.0, 0.0, 0.0), fx=fx, fy=fx,
            cx=image_size / 2, cy=image_size / 2,
            image_w=image_size, image_h=image_size))
    return CameraRig(cameras=tuple(cameras), primary_index=0)


# ---------------------------------------------------------------------------
# dataset generation

def make_sample(skeleton: Skeleton, kind: str, frames: int, rig: CameraRig,
                params: AugmentParams, seed: int, index: int = 0,
                pointmap_grid: int = DEFAULT_POINTMAP_GRID, fps: float = 30.0) -> MotionSample:
    """Generate one augmented motion observed by one sampled rig."""
    seq = np.random.SeedSequence(seed)
    motion_seed, augment_seed, rig_seed = (int(s.generate_state(1)[0]) for s in seq.spawn(3))
    motion = generate_motion(skeleton, kind, frames, motion_seed, fps=fps)
    motion = augment_motion(motion, replace(params, seed=augment_seed))
    sampled_rig = sample_camera_rig(rig, params, rig_seed)
    views_2d, disentangled, pointmaps = [], [], []
    for v, cam in enumerate(sampled_rig.cameras):
        g2d = GlobalMotion2D(coords=project(cam, motion.coords), view_index=v)
        views_2d.append(g2d)
        disentangled.append(encode(g2d, root_joint=skeleton.root))
        pointmaps.append(pointmap_generate(cam, pointmap_grid, pointmap_grid, view_index=v))
    return MotionSample(
        motion=motion, rig=sampled_rig, views_2d=tuple(views_2d),
        disentangled=tuple(disentangled), pointmaps=tuple(pointmaps),
        kind=kind, index=index)


def generate_samples(skeleton: Skeleton, kinds, count: int, frames: int,
                     rig: CameraRig, params: AugmentParams,
                     pointmap_grid: int = DEFAULT_POINTMAP_GRID,
                     fps: float = 30.0) -> list[MotionSample]:
    """Generate ``count`` samples with per-index seeds split from params.seed.

    Seeds are spawned per sample index, so any subset (or a parallel run)
    reproduces exactly the same samples.
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    kinds = list(kinds)
    children = np.random.SeedSequence(params.seed).spawn(count)
    samples = []
    for i in range(count):
        kind = kinds[i % len(kinds)]
        sample_seed = int(children[i].generate_state(1)[0])
        samples.append(make_sample(skeleton, kind, frames, rig, params, sample_seed,
                                   index=i, pointmap_grid=pointmap_grid, fps=fps))
    return samples


def sample_to_dict(sample: MotionSample) -> dict:
    return {
        "format_version": io.FORMAT_VERSION,
        "type": "motion_sample",
        "index": sample.index,
        "kind": sample.kind,
        "motion": io.motion3d_to_dict(sample.motion),
        "rig": io.rig_to_dict(sample.rig),
        "views_2d": [io.motion2d_to_dict(m) for m in sample.views_2d],
        "disentangled": [io.disentangled_to_dict(d) for d in sample.disentangled],
        "pointmaps": [io.pointmap_to_dict(p) for p in sample.pointmaps],
    }


def sample_from_dict(doc: dict, skeleton: Skeleton | None = None, path="<memory>") -> MotionSample:
    return MotionSample(
        motion=io.motion3d_from_dict(doc["motion"], path, skeleton),
        rig=io.rig_from_dict(doc["rig"], path),
        views_2d=tuple(io.motion2d_from_dict(m, path) for m in doc["views_2d"]),
        disentangled=tuple(io.disentangled_from_dict(d) for d in doc["disentangled"]),
        pointmaps=tuple(io.pointmap_from_dict(p) for p in doc["pointmaps"]),
        kind=doc.get("kind", "unknown"),
        index=int(doc.get("index", 0)),
    )


def build_dataset(skeleton: Skeleton, kinds, count: int, frames: int, rig: CameraRig,
                  params: AugmentParams, out_path,
                  pointmap_grid: int = DEFAULT_POINTMAP_GRID, fps: float = 30.0) -> dict:
    """Write ``count`` samples plus a manifest; returns the manifest dict.

    Deterministic given ``params.seed``: re-running with the same arguments
    reproduces every file byte-for-byte.
    """
    out_dir = Path(out_path)
    samples = generate_samples(skeleton, kinds, count, frames, rig, params,
                               pointmap_grid=pointmap_grid, fps=fps)
    files = []
    coords_min = np.full(3, np.inf)
    coords_max = np.full(3, -np.inf)
    for sample in samples:
        name = f"sample_{sample.index:05d}.json"
        io.atomic_write_json(sample_to_dict(sample), out_dir / name, indent=None)
        files.append(name)
        coords_min = np.minimum(coords_min, sample.motion.coords.min(axis=(0, 1)))
        coords_max = np.maximum(coords_max, sample.motion.coords.max(axis=(0, 1)))
    manifest = {
        "format_version": io.FORMAT_VERSION,
        "type": "dataset_manifest",
        "count": count,
        "frames": frames,
        "fps": fps,
        "views": len(rig),
        "kinds": list(kinds),
        "skeleton": skeleton.name,
        "pointmap_grid": pointmap_grid,
        "seed": params.seed,
        "augment": {
            "yaw_range": params.yaw_range,
            "translation_range": list(params.translation_range),
            "cam_pitch_range": params.cam_pitch_range,
            "cam_yaw_range": params.cam_yaw_range,
            "cam_roll_range": params.cam_roll_range,
            "cam_distance_range": params.cam_distance_range,
        },
        "coords_min": coords_min.tolist(),
        "coords_max": coords_max.tolist(),
        "samples": files,
    }
    io.atomic_write_json(manifest, out_dir / "manifest.json")
    return manifest


def load_dataset(path) -> tuple[list[MotionSample], dict]:
    """Load a dataset directory written by :func:`build_dataset`."""
    root = Path(path)
    manifest = io.load_json(root / "manifest.json")
    skeleton = None
    if manifest.get("skeleton") in ("toy8", "smpl22", "coco17"):
        skeleton = get_skeleton(manifest["skeleton"])
    samples = [
        sample_from_dict(io.load_json(root / name), skeleton, root / name)
        for name in manifest["samples"]
    ]
    return samples, manifest
