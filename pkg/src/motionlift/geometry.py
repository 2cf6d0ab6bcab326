"""Pinhole cameras, projection, DLT triangulation, and ground-plane pointmaps.

Coordinate conventions
----------------------
World frame: right-handed, z-up. The ground plane is z = 0 and gravity
points along -z.

Camera frame: standard computer vision axes, x right, y down, z forward
(the optical axis). ``rotation`` maps world to camera coordinates and
``translation`` completes the rigid transform::

    X_c = rotation @ X_w + translation

Image frame: pixels, origin at the top-left corner, u right, v down.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateGeometry, InsufficientViews, NonPositiveDepth
from .validation import as_float_array, check_finite

#: Minimum camera-frame depth accepted by :func:`project`.
MIN_DEPTH = 1e-9

#: Condition-number threshold separating rank deficiency from float noise.
DEGENERACY_CONDITION = 1e10

_ORTHONORMAL_TOL = 1e-9


@dataclass(frozen=True)
class Camera:
    """A calibrated pinhole camera with full 6-DoF pose.

    Parameters
    ----------
    fx, fy : float
        Focal lengths in pixels (positive).
    cx, cy : float
        Principal point in pixels.
    rotation : ndarray, shape (3, 3)
        World-to-camera rotation; must be orthonormal with det +1.
    translation : ndarray, shape (3,)
        World-to-camera translation in meters.
    image_w, image_h : int
        Image dimensions in pixels (positive).
    """

    fx: float
    fy: float
    cx: float
    cy: float
    rotation: np.ndarray
    translation: np.ndarray
    image_w: int
    image_h: int

    def __post_init__(self):
        R = as_float_array(self.rotation, "rotation", (3, 3)).copy()
        t = as_float_array(self.translation, "translation", (3,)).copy()
        check_finite(R, "rotation")
        check_finite(t, "translation")
        if not np.allclose(R.T @ R, np.eye(3), atol=_ORTHONORMAL_TOL):
            raise ValueError("rotation is not orthonormal within 1e-9")
        if abs(np.linalg.det(R) - 1.0) > _ORTHONORMAL_TOL:
            raise ValueError("rotation determinant is not +1 within 1e-9")
        if self.fx <= 0 or self.fy <= 0:
            raise ValueError("focal lengths must be positive")
        if self.image_w <= 0 or self.image_h <= 0:
            raise ValueError("image dimensions must be positive")
        R.setflags(write=False)
        t.setflags(write=False)
        object.__setattr__(self, "rotation", R)
        object.__setattr__(self, "translation", t)

    @property
    def intrinsic_matrix(self) -> np.ndarray:
        """3x3 intrinsic matrix K."""
        return np.array(
            [[self.fx, 0.0, self.cx], [0.0, self.fy, self.cy], [0.0, 0.0, 1.0]]
        )

    @property
    def projection_matrix(self) -> np.ndarray:
        """3x4 projection matrix K @ [R | t]."""
        Rt = np.hstack([self.rotation, self.translation[:, None]])
        return self.intrinsic_matrix @ Rt

    @property
    def center(self) -> np.ndarray:
        """Camera center in world coordinates, -R^T t."""
        return -self.rotation.T @ self.translation


@dataclass(frozen=True)
class CameraRig:
    """An ordered set of V >= 2 cameras with a designated primary view."""

    cameras: tuple[Camera, ...]
    primary_index: int = 0

    def __post_init__(self):
        cams = tuple(self.cameras)
        if len(cams) < 2:
            raise ValueError("a rig needs at least 2 cameras for triangulation")
        if not 0 <= self.primary_index < len(cams):
            raise ValueError(
                f"primary_index {self.primary_index} out of range [0, {len(cams)})"
            )
        object.__setattr__(self, "cameras", cams)

    def __len__(self) -> int:
        return len(self.cameras)

    @property
    def primary(self) -> Camera:
        return self.cameras[self.primary_index]


@dataclass(frozen=True)
class Pointmap:
    """Grid of pixel-to-world ground-plane correspondences for one view.

    ``points[r, c]`` is the world point where the ray through the center of
    grid cell (r, c) meets the plane z = 0; cells whose rays never reach the
    plane in front of the camera carry (0, 0, 0) with ``valid`` False.
    """

    grid_w: int
    grid_h: int
    points: np.ndarray  # (grid_h, grid_w, 3) world meters
    valid: np.ndarray  # (grid_h, grid_w) bool
    view_index: int = 0

    def __post_init__(self):
        pts = as_float_array(self.points, "points", (self.grid_h, self.grid_w, 3)).copy()
        val = np.asarray(self.valid, dtype=bool).copy()
        if val.shape != (self.grid_h, self.grid_w):
            raise ValueError("valid mask shape does not match grid dimensions")
        pts.setflags(write=False)
        val.setflags(write=False)
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "valid", val)

    @property
    def valid_fraction(self) -> float:
        return float(self.valid.mean())


def look_at_camera(
    center,
    target=(0.0, 0.0, 0.0),
    *,
    fx: float = 1000.0,
    fy: float = 1000.0,
    cx: float = 500.0,
    cy: float = 500.0,
    image_w: int = 1000,
    image_h: int = 1000,
    roll: float = 0.0,
) -> Camera:
    """Build a camera at ``center`` aimed at ``target`` with z-up framing.

    ``roll`` rotates the camera about its optical axis (radians, positive
    turns the image counterclockwise). Falls back to the world x-axis as the
    reference direction when the view is within ~1e-6 of straight up/down.
    """
    center = as_float_array(center, "center", (3,))
    target = as_float_array(target, "target", (3,))
    forward = target - center
    norm = np.linalg.norm(forward)
    if norm < 1e-12:
        raise ValueError("camera center coincides with target")
    forward = forward / norm
    up = np.array([0.0, 0.0, 1.0])
    right = np.cross(forward, up)
    if np.linalg.norm(right) < 1e-6:
        right = np.cross(forward, np.array([1.0, 0.0, 0.0]))
    right /= np.linalg.norm(right)
    down = np.cross(forward, right)
    R = np.stack([right, down, forward])
    if abs(roll) > 0:
        c, s = np.cos(roll), np.sin(roll)
        R = np.array([[c, s, 0.0], [-s, c, 0.0], [0.0, 0.0, 1.0]]) @ R
    t = -R @ center
    return Camera(
        fx=fx, fy=fy, cx=cx, cy=cy, rotation=R, translation=t,
        image_w=image_w, image_h=image_h,
    )


def project(camera: Camera, points) -> np.ndarray:
    """Perspective-project world points into pixel coordinates.

    Parameters
    ----------
    camera : Camera
    points : ndarray, shape (..., 3)
        World points in meters; typically (T, J, 3).

    Returns
    -------
    ndarray, shape (..., 2)
        Pixel coordinates (u, v). Points may fall outside the image bounds;
        no clipping is applied.

    Raises
    ------
    NonPositiveDepth
        If any point has camera-frame depth Z_c <= 1e-9. The reported
        (frame, joint) is the index within the two leading axes (0 for
        missing axes).
    """
    pts = np.asarray(points, dtype=np.float64)
    if pts.shape[-1] != 3:
        raise ValueError(f"points must have a trailing axis of size 3, got {pts.shape}")
    cam_pts = pts @ camera.rotation.T + camera.translation
    depth = cam_pts[..., 2]
    bad = depth <= MIN_DEPTH
    if np.any(bad):
        idx = np.unravel_index(int(np.argmax(bad)), bad.shape) if bad.ndim else ()
        frame = int(idx[0]) if len(idx) >= 1 else 0
        joint = int(idx[1]) if len(idx) >= 2 else 0
        raise NonPositiveDepth(frame, joint, float(depth[idx] if idx else depth))
    u = camera.fx * cam_pts[..., 0] / depth + camera.cx
    v = camera.fy * cam_pts[..., 1] / depth + camera.cy
    return np.stack([u, v], axis=-1)


def triangulate(rig: CameraRig, observations, mask=None) -> np.ndarray:
    """Triangulate world points from multi-view pixel observations via DLT.

    Per (frame, joint) this stacks the two linear constraints

        u * (p3 . X~) - (p1 . X~) = 0,
        v * (p3 . X~) - (p2 . X~) = 0

    over all unmasked views, where p_i are rows of each camera's 3x4
    projection matrix and X~ = (X, 1), and solves the resulting
    inhomogeneous least-squares problem in the three coordinates of X
    through its normal equations.

    Parameters
    ----------
    rig : CameraRig
    observations : ndarray, shape (V, T, J, 2)
        Pixel observations per view.
    mask : ndarray of bool, shape (V, T, J), optional
        True where an observation is usable. Defaults to all True.

    Returns
    -------
    ndarray, shape (T, J, 3)
        Triangulated world points in meters.

    Raises
    ------
    InsufficientViews
        If any point has fewer than 2 unmasked views.
    DegenerateGeometry
        If any point's normal-equation matrix has condition number > 1e10.
    """
    obs = np.asarray(observations, dtype=np.float64)
    V = len(rig)
    if obs.ndim != 4 or obs.shape[0] != V or obs.shape[-1] != 2:
        raise ValueError(f"observations must have shape (V={V}, T, J, 2), got {obs.shape}")
    _, T, J, _ = obs.shape
    if mask is None:
        mask_arr = np.ones((V, T, J), dtype=bool)
    else:
        mask_arr = np.asarray(mask, dtype=bool)
        if mask_arr.shape != (V, T, J):
            raise ValueError(f"mask must have shape {(V, T, J)}, got {mask_arr.shape}")

    counts = mask_arr.sum(axis=0)
    if np.any(counts < 2):
        t, j = np.unravel_index(int(np.argmin(counts)), counts.shape)
        raise InsufficientViews(int(t), int(j), int(counts[t, j]))

    P = np.stack([cam.projection_matrix for cam in rig.cameras])  # (V, 3, 4)
    # Constraint rows: obs_k * p3 - p_k for k in {1, 2}; shape (V, T, J, 2, 4).
    rows = obs[..., None] * P[:, None, None, None, 2, :] - P[:, None, None, :2, :]
    rows = rows * mask_arr[..., None, None]
    # Stack the per-view row pairs: (T, J, 2V, 4).
    rows = np.moveaxis(rows, 0, 2).reshape(T, J, 2 * V, 4)
    A = rows[..., :3]
    b = -rows[..., 3]

    M = A.transpose(0, 1, 3, 2) @ A  # (T, J, 3, 3) normal-equation matrices
    cond = np.linalg.cond(M)
    bad = ~np.isfinite(cond) | (cond > DEGENERACY_CONDITION)
    if np.any(bad):
        t, j = np.unravel_index(int(np.argmax(bad)), bad.shape)
        raise DegenerateGeometry(int(t), int(j), float(cond[t, j]))

    rhs = np.einsum("tjrk,tjr->tjk", A, b)
    return np.linalg.solve(M, rhs[..., None])[..., 0]


def ray_ground_intersect(camera: Camera, pixel) -> np.ndarray | None:
    """Intersect the viewing ray through ``pixel`` with the ground plane z = 0.

    Returns the world intersection point if it lies in front of the camera
    (positive ray parameter), else ``None`` (horizon or upward pixels).
    """
    px = as_float_array(pixel, "pixel", (2,))
    point, valid = _ray_ground_batch(camera, px[None, :])
    return point[0] if valid[0] else None


def _ray_ground_batch(camera: Camera, pixels: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized ray/ground intersection for (N, 2) pixel arrays."""
    dirs_cam = np.stack(
        [
            (pixels[:, 0] - camera.cx) / camera.fx,
            (pixels[:, 1] - camera.cy) / camera.fy,
            np.ones(len(pixels)),
        ],
        axis=-1,
    )
    dirs_world = dirs_cam @ camera.rotation  # R^T applied to each row
    origin = camera.center
    dz = dirs_world[:, 2]
    with np.errstate(divide="ignore", invalid="ignore"):
        s = -origin[2] / dz
        valid = np.isfinite(s) & (s > 0)
        points = origin[None, :] + np.where(valid, s, 0.0)[:, None] * dirs_world
    points[:, 2] = 0.0  # exactly on the plane
    points[~valid] = 0.0
    return points, valid


def pointmap_generate(camera: Camera, grid_w: int = 16, grid_h: int = 16,
                      view_index: int = 0) -> Pointmap:
    """Sample the pixel grid at cell centers and intersect with the ground.

    Cell (r, c) covers pixels ``[c*w/grid_w, (c+1)*w/grid_w) x [r*h/grid_h,
    (r+1)*h/grid_h)`` and is sampled at its center. Cells whose rays miss
    the ground plane (at or above the horizon) are marked invalid.
    """
    if grid_w < 2 or grid_h < 2:
        raise ValueError("pointmap grid must be at least 2x2")
    cell_w = camera.image_w / grid_w
    cell_h = camera.image_h / grid_h
    us = (np.arange(grid_w) + 0.5) * cell_w
    vs = (np.arange(grid_h) + 0.5) * cell_h
    uu, vv = np.meshgrid(us, vs)  # (grid_h, grid_w)
    pixels = np.stack([uu.ravel(), vv.ravel()], axis=-1)
    points, valid = _ray_ground_batch(camera, pixels)
    return Pointmap(
        grid_w=grid_w,
        grid_h=grid_h,
        points=points.reshape(grid_h, grid_w, 3),
        valid=valid.reshape(grid_h, grid_w),
        view_index=view_index,
    )
