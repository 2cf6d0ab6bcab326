"""Motion-capture evaluation metrics with pinned alignment procedures.

All position errors are reported in millimeters. Alignment classes:

* ``pa_mpjpe`` -- per-frame similarity (rotation + translation + scale)
  Procrustes alignment, then mean joint distance;
* ``mpjpe`` -- per-frame root alignment (subtract each frame's root from
  both motions) or none (``abs_mpjpe``);
* ``w_mpjpe`` -- one rigid yaw-about-gravity + 3D translation fitted to the
  joints of the first two frames, applied to the whole sequence;
* ``wa_mpjpe`` -- the same rigid class fitted to all frames jointly.

The W/WA aligner is restricted to yaw + translation so gravity-direction
errors stay visible; a full rotation would hide them.

Accel is the mean norm of the second central difference error against
ground truth (mm/frame^2); jitter the mean norm of the prediction's third
difference (mm/frame^3); foot sliding the mean horizontal displacement of
foot joints between consecutive frames that are both in ground contact
(foot height below ``contact_height``).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateConfiguration, ShapeMismatch, TooShort
from .geometry import CameraRig
from .motion import Motion3D

MM = 1000.0

DEFAULT_CONTACT_HEIGHT = 0.05

#: Column order of the CSV report; fixed contract.
REPORT_FIELDS = (
    "pa_mpjpe", "mpjpe", "w_mpjpe", "wa_mpjpe", "abs_mpjpe", "t_root",
    "accel", "jitter", "fs", "frame_count", "joint_count",
)


@dataclass(frozen=True)
class MetricsReport:
    """All evaluation metrics for one sequence.

    ``pose_frame`` records whether pa_mpjpe/mpjpe were computed in the
    primary camera frame (rig supplied) or the world frame.
    """

    pa_mpjpe: float
    mpjpe: float
    w_mpjpe: float
    wa_mpjpe: float
    abs_mpjpe: float
    t_root: float
    accel: float
    jitter: float
    fs: float
    frame_count: int
    joint_count: int
    pose_frame: str = "world"

    def __post_init__(self):
        for name in REPORT_FIELDS:
            value = getattr(self, name)
            if not np.isfinite(value) or value < 0:
                raise ValueError(f"metric {name} must be finite and >= 0, got {value}")

    def row(self) -> list:
        return [getattr(self, f) for f in REPORT_FIELDS]

    def summary(self) -> str:
        lines = [f"frames: {self.frame_count}  joints: {self.joint_count}  "
                 f"pose frame: {self.pose_frame}"]
        units = {"accel": "mm/frame^2", "jitter": "mm/frame^3"}
        for name in REPORT_FIELDS[:9]:
            lines.append(f"  {name:>9}: {getattr(self, name):10.3f} {units.get(name, 'mm')}")
        return "\n".join(lines)


def _paired(pred: Motion3D, gt: Motion3D) -> tuple[np.ndarray, np.ndarray]:
    if pred.coords.shape != gt.coords.shape:
        raise ShapeMismatch(
            f"pred shape {pred.coords.shape} != gt shape {gt.coords.shape}")
    return pred.coords, gt.coords


def _root_index(motion: Motion3D) -> int:
    return motion.skeleton.root if motion.skeleton is not None else 0


# ---------------------------------------------------------------------------
# alignment solvers

def procrustes(X, Y, with_scale: bool = False) -> tuple[np.ndarray, np.ndarray, float]:
    """Least-squares similarity transform aligning X to Y (K x 3 each).

    Returns ``(R, t, s)`` minimizing ``sum ||s R x + t - y||^2`` with R a
    proper rotation; ``s`` is fixed at 1 when ``with_scale`` is False.

    Raises :class:`DegenerateConfiguration` for coincident or collinear
    point sets, where the rotation is not unique.
    """
    X = np.asarray(X, dtype=np.float64)
    Y = np.asarray(Y, dtype=np.float64)
    if X.shape != Y.shape or X.ndim != 2 or X.shape[1] != 3 or X.shape[0] < 3:
        raise ShapeMismatch(f"need matching (K>=3, 3) arrays, got {X.shape} and {Y.shape}")
    mx, my = X.mean(axis=0), Y.mean(axis=0)
    Xc, Yc = X - mx, Y - my
    var_x = (Xc ** 2).sum() / len(X)
    cov = Yc.T @ Xc / len(X)
    U, D, Vt = np.linalg.svd(cov)
    scale_ref = max(np.sqrt(var_x), np.sqrt((Yc ** 2).sum() / len(Y)), 1e-30)
    if var_x < 1e-24 or D[1] < 1e-12 * scale_ref ** 2:
        raise DegenerateConfiguration(
            "point set is coincident or collinear; similarity transform not unique")
    sign = np.sign(np.linalg.det(U @ Vt))
    S = np.diag([1.0, 1.0, sign])
    R = U @ S @ Vt
    s = float(np.trace(np.diag(D) @ S) / var_x) if with_scale else 1.0
    t = my - s * R @ mx
    return R, t, s


def _yaw_translation_fit(P: np.ndarray, G: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Closed-form yaw (about +z) plus 3D translation aligning P to G."""
    P = P.reshape(-1, 3)
    G = G.reshape(-1, 3)
    mp, mg = P.mean(axis=0), G.mean(axis=0)
    Pc, Gc = P - mp, G - mg
    c = float(Pc[:, 0] @ Gc[:, 0] + Pc[:, 1] @ Gc[:, 1])
    s = float(Pc[:, 0] @ Gc[:, 1] - Pc[:, 1] @ Gc[:, 0])
    theta = np.arctan2(s, c)
    ct, st = np.cos(theta), np.sin(theta)
    R = np.array([[ct, -st, 0.0], [st, ct, 0.0], [0.0, 0.0, 1.0]])
    t = mg - R @ mp
    return R, t


# ---------------------------------------------------------------------------
# position metrics

def mpjpe(pred: Motion3D, gt: Motion3D, mode: str = "root_aligned") -> float:
    """Mean per-joint position error in mm; ``mode`` in {root_aligned, none}.

    ``none`` is the absolute error (no alignment); ``root_aligned``
    subtracts each frame's root joint from both motions first.
    """
    P, G = _paired(pred, gt)
    if mode == "root_aligned":
        root = _root_index(gt)
        P = P - P[:, root:root + 1, :]
        G = G - G[:, root:root + 1, :]
    elif mode != "none":
        raise ValueError(f"mode must be 'root_aligned' or 'none', got {mode!r}")
    return float(np.linalg.norm(P - G, axis=-1).mean()) * MM


def pa_mpjpe(pred: Motion3D, gt: Motion3D) -> float:
    """Per-frame similarity-Procrustes-aligned MPJPE in mm."""
    P, G = _paired(pred, gt)
    errors = []
    for t in range(P.shape[0]):
        R, tr, s = procrustes(P[t], G[t], with_scale=True)
        aligned = s * P[t] @ R.T + tr
        errors.append(np.linalg.norm(aligned - G[t], axis=-1).mean())
    return float(np.mean(errors)) * MM


def w_mpjpe(pred: Motion3D, gt: Motion3D) -> float:
    """MPJPE after one yaw+translation fit to the first two frames (mm)."""
    P, G = _paired(pred, gt)
    if P.shape[0] < 2:
        raise TooShort("w_mpjpe needs at least 2 frames")
    R, t = _yaw_translation_fit(P[:2], G[:2])
    aligned = P @ R.T + t
    return float(np.linalg.norm(aligned - G, axis=-1).mean()) * MM


def wa_mpjpe(pred: Motion3D, gt: Motion3D) -> float:
    """MPJPE after one yaw+translation fit over the whole sequence (mm)."""
    P, G = _paired(pred, gt)
    R, t = _yaw_translation_fit(P, G)
    aligned = P @ R.T + t
    return float(np.linalg.norm(aligned - G, axis=-1).mean()) * MM


def t_root(pred: Motion3D, gt: Motion3D) -> float:
    """Mean unaligned root-trajectory distance in mm."""
    P, G = _paired(pred, gt)
    root = _root_index(gt)
    return float(np.linalg.norm(P[:, root] - G[:, root], axis=-1).mean()) * MM


# ---------------------------------------------------------------------------
# smoothness and contact metrics

def accel_error(pred: Motion3D, gt: Motion3D) -> float:
    """Mean second-central-difference error in mm/frame^2."""
    P, G = _paired(pred, gt)
    if P.shape[0] < 3:
        raise TooShort("accel_error needs at least 3 frames")
    ap = P[2:] - 2 * P[1:-1] + P[:-2]
    ag = G[2:] - 2 * G[1:-1] + G[:-2]
    return float(np.linalg.norm(ap - ag, axis=-1).mean()) * MM


def jitter(pred: Motion3D) -> float:
    """Mean third-finite-difference magnitude in mm/frame^3."""
    P = pred.coords
    if P.shape[0] < 4:
        raise TooShort("jitter needs at least 4 frames")
    d3 = P[3:] - 3 * P[2:-1] + 3 * P[1:-2] - P[:-3]
    return float(np.linalg.norm(d3, axis=-1).mean()) * MM


def foot_sliding(pred: Motion3D, foot_joints,
                 contact_height: float = DEFAULT_CONTACT_HEIGHT) -> float:
    """Mean horizontal foot displacement per contact frame pair, in mm.

    A frame pair (t, t+1) counts when the foot's height is below
    ``contact_height`` in both frames. Returns 0 when no contact occurs.
    """
    feet = tuple(foot_joints)
    if not feet:
        raise ValueError("foot_joints must be non-empty")
    P = pred.coords[:, feet, :]  # (T, F, 3)
    contact = P[..., 2] < contact_height
    both = contact[:-1] & contact[1:]
    if not both.any():
        return 0.0
    disp = np.linalg.norm(P[1:, :, :2] - P[:-1, :, :2], axis=-1)
    return float(disp[both].mean()) * MM


def accel_to_m_per_s2(value_mm: float, fps: float) -> float:
    return value_mm / MM * fps ** 2


def jitter_to_m_per_s3(value_mm: float, fps: float) -> float:
    return value_mm / MM * fps ** 3


# ---------------------------------------------------------------------------
# aggregation

def _to_camera_frame(motion: Motion3D, rig: CameraRig) -> Motion3D:
    cam = rig.primary
    coords = motion.coords @ cam.rotation.T + cam.translation
    return Motion3D(coords=coords, fps=motion.fps, skeleton=motion.skeleton)


def evaluate_all(pred: Motion3D, gt: Motion3D, rig: CameraRig | None = None,
                 foot_joints=None,
                 contact_height: float = DEFAULT_CONTACT_HEIGHT) -> MetricsReport:
    """Fill a :class:`MetricsReport` using the individual metric operations.

    With a rig, pa_mpjpe and mpjpe are computed in the primary camera frame
    (the report's ``pose_frame`` says which was used); world-coordinate
    metrics always stay in the world frame. Foot joints default to the
    skeleton's foot/ankle joints; without any, fs is reported as 0.
    """
    _paired(pred, gt)
    if foot_joints is None:
        skel = pred.skeleton or gt.skeleton
        foot_joints = skel.foot_joints if skel is not None else ()
    if rig is not None:
        pose_pred, pose_gt, frame = _to_camera_frame(pred, rig), _to_camera_frame(gt, rig), "camera"
    else:
        pose_pred, pose_gt, frame = pred, gt, "world"
    return MetricsReport(
        pa_mpjpe=pa_mpjpe(pose_pred, pose_gt),
        mpjpe=mpjpe(pose_pred, pose_gt, mode="root_aligned"),
        w_mpjpe=w_mpjpe(pred, gt),
        wa_mpjpe=wa_mpjpe(pred, gt),
        abs_mpjpe=mpjpe(pred, gt, mode="none"),
        t_root=t_root(pred, gt),
        accel=accel_error(pred, gt),
        jitter=jitter(pred),
        fs=foot_sliding(pred, foot_joints, contact_height) if foot_joints else 0.0,
        frame_count=pred.frame_count,
        joint_count=pred.joint_count,
        pose_frame=frame,
    )


def reports_to_csv(rows: list[tuple[str, MetricsReport]]) -> str:
    """Render (name, report) pairs as a CSV table with a trailing mean row."""
    lines = ["sequence," + ",".join(REPORT_FIELDS)]
    for name, report in rows:
        lines.append(name + "," + ",".join(repr(v) for v in report.row()))
    if len(rows) > 1:
        means = np.mean([r.row() for _, r in rows], axis=0)
        lines.append("mean," + ",".join(repr(float(v)) for v in means))
    return "\n".join(lines) + "\n"
