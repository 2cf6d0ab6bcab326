"""Packing motion into network tensors and back, plus conditioning assembly.

The network works on dimensionless values. For the decoupled layout a view's
(T, J+1, 2) tensor rows are::

    rows 0 .. J-2   local pose (already dimensionless)
    row  J-1        root trajectory, divided by (image_w, image_h)
    row  J          bbox scale, divided by (image_w, image_h)

The direct layout (the ``--decouple off`` ablation) is simply the global
(u, v) coordinates divided by the image dimensions, shape (T, J, 2).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ShapeMismatch
from ..geometry import Camera, CameraRig, Pointmap, pointmap_generate
from ..representation import EPS_SCALE, LOCAL_BOUND, DisentangledMotion, GlobalMotion2D, decode, encode

#: Divisor applied to pointmap world coordinates before they enter the
#: network, roughly the scene radius in meters.
POINTMAP_WORLD_SCALE = 5.0

#: Clamp on scaled pointmap coordinates (tames near-horizon cells).
POINTMAP_CLIP = 4.0

CAMERA_FEATURE_DIM = 16


def _image_dims(camera: Camera) -> np.ndarray:
    return np.array([camera.image_w, camera.image_h], dtype=np.float64)


def disentangled_to_tensor(views: list[DisentangledMotion] | tuple[DisentangledMotion, ...],
                           cameras) -> np.ndarray:
    """Stack per-view disentangled motion into a (V, T, J+1, 2) tensor."""
    parts = []
    for d, cam in zip(views, cameras):
        dims = _image_dims(cam)
        rows = np.concatenate(
            [d.local, d.trajectory[:, None, :] / dims, d.scale[:, None, :] / dims], axis=1)
        parts.append(rows)
    return np.stack(parts)


def tensor_to_disentangled(values: np.ndarray, cameras, root_joint: int,
                           ) -> list[DisentangledMotion]:
    """Unpack a (V, T, J+1, 2) tensor into per-view disentangled motion.

    Network outputs are free-range, so local coordinates are clamped to
    the representation's +-2 bound and scales floored at ``EPS_SCALE`` to
    keep every decoded motion well-formed.
    """
    out = []
    for v, cam in enumerate(cameras):
        dims = _image_dims(cam)
        local = np.clip(values[v, :, :-2, :], -LOCAL_BOUND, LOCAL_BOUND)
        trajectory = values[v, :, -2, :] * dims
        scale = np.maximum(values[v, :, -1, :] * dims, EPS_SCALE)
        out.append(DisentangledMotion(local=local, trajectory=trajectory, scale=scale,
                                      root_joint=root_joint, view_index=v))
    return out


class DecoupledCodec:
    """Tensor layout carrying local pose, trajectory, and scale rows."""

    decouple = True

    def __init__(self, cameras, joint_count: int, root_joint: int = 0):
        self.cameras = tuple(cameras)
        self.joint_count = joint_count
        self.root_joint = root_joint
        self.rows = joint_count + 1

    def tensor_from_global(self, coords: np.ndarray) -> np.ndarray:
        """(V, T, J, 2) pixel coords -> (V, T, J+1, 2) network tensor."""
        views = [encode(GlobalMotion2D(coords=coords[v], view_index=v), self.root_joint)
                 for v in range(len(self.cameras))]
        return disentangled_to_tensor(views, self.cameras)

    def global_from_tensor(self, values: np.ndarray) -> np.ndarray:
        """(V, T, J+1, 2) network tensor -> (V, T, J, 2) pixel coords."""
        views = tensor_to_disentangled(values, self.cameras, self.root_joint)
        return np.stack([decode(d).coords for d in views])


class DirectCodec:
    """Tensor layout carrying raw global (u, v) per joint (ablation)."""

    decouple = False

    def __init__(self, cameras, joint_count: int, root_joint: int = 0):
        self.cameras = tuple(cameras)
        self.joint_count = joint_count
        self.root_joint = root_joint
        self.rows = joint_count

    def tensor_from_global(self, coords: np.ndarray) -> np.ndarray:
        dims = np.stack([_image_dims(c) for c in self.cameras])
        return coords / dims[:, None, None, :]

    def global_from_tensor(self, values: np.ndarray) -> np.ndarray:
        dims = np.stack([_image_dims(c) for c in self.cameras])
        return values * dims[:, None, None, :]


def make_codec(cameras, joint_count: int, root_joint: int = 0, decouple: bool = True):
    cls = DecoupledCodec if decouple else DirectCodec
    return cls(cameras, joint_count, root_joint)


# ---------------------------------------------------------------------------
# conditioning

def camera_features(camera: Camera) -> np.ndarray:
    """16-dim raw descriptor of intrinsics and full 6-DoF extrinsics.

    The network compresses this with a small perceptron; storing the full
    pose keeps the conditioning lossless even though it is embedded lossily.
    """
    return np.concatenate([
        [camera.fx / camera.image_w, camera.fy / camera.image_h,
         camera.cx / camera.image_w, camera.cy / camera.image_h],
        camera.rotation.ravel(),
        camera.translation / POINTMAP_WORLD_SCALE,
    ])


def pointmap_features(pm: Pointmap) -> np.ndarray:
    """(grid_h, grid_w, 3) array of (x_w, y_w, valid), scaled and clipped."""
    xy = np.clip(pm.points[..., :2] / POINTMAP_WORLD_SCALE, -POINTMAP_CLIP, POINTMAP_CLIP)
    xy = np.where(pm.valid[..., None], xy, 0.0)
    return np.concatenate([xy, pm.valid[..., None].astype(np.float64)], axis=-1)


@dataclass(frozen=True)
class Conditioning:
    """Inputs the multi-view denoiser is conditioned on.

    ``m0`` is the primary view's observed global 2D motion normalized by
    its image dimensions, and ``m0_rows`` the same motion packed in the
    network's tensor layout (the primary view's known clean rows);
    ``cameras`` holds one 16-dim feature per view; ``pointmaps`` is
    (V, grid_h, grid_w, 3) of scaled (x_w, y_w, valid) features, or None
    when pointmap conditioning is disabled.
    """

    m0: np.ndarray  # (T, J, 2)
    m0_rows: np.ndarray  # (T, rows, 2)
    cameras: np.ndarray  # (V, 16)
    pointmaps: np.ndarray | None  # (V, gh, gw, 3)


def build_conditioning(m0: GlobalMotion2D, rig: CameraRig,
                       use_pointmaps: bool = True,
                       pointmap_grid: int = 16,
                       pointmaps=None,
                       decouple: bool = True,
                       root_joint: int = 0) -> Conditioning:
    """Assemble conditioning from the primary-view motion and the rig.

    Pointmaps are generated from the rig when not supplied.
    """
    primary = rig.primary
    m0_norm = m0.coords / _image_dims(primary)
    if decouple:
        d = encode(m0, root_joint=root_joint)
        m0_rows = disentangled_to_tensor([d], [primary])[0]
    else:
        m0_rows = m0_norm
    cams = np.stack([camera_features(c) for c in rig.cameras])
    pm_feats = None
    if use_pointmaps:
        if pointmaps is None:
            pointmaps = [pointmap_generate(c, pointmap_grid, pointmap_grid, view_index=v)
                         for v, c in enumerate(rig.cameras)]
        pm_feats = np.stack([pointmap_features(p) for p in pointmaps])
    return Conditioning(m0=m0_norm, m0_rows=m0_rows, cameras=cams, pointmaps=pm_feats)
