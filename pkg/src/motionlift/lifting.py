"""Reverse diffusion with per-step multi-view consistency projection.

Each denoising step predicts a clean multi-view motion tensor, decodes it
to per-view global 2D, triangulates one world motion, reprojects it into
every view, and re-encodes — replacing the prediction with the nearest
geometrically consistent one before the posterior update. The final output
is therefore consistent by construction: its per-view 2D equals the
projection of its 3D motion.

Denoisers are duck-typed: they expose ``predict_x0(x, step, cond)`` plus
``decouple``, ``wants_pointmaps``, and ``pointmap_grid`` attributes (see
:class:`~motionlift.diffusion.TorchDenoiser` and
:class:`~motionlift.diffusion.OracleDenoiser`).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .diffusion.encoding import build_conditioning, make_codec
from .diffusion.schedule import DiffusionSchedule, posterior_step
from .errors import NonFiniteState
from .geometry import CameraRig, project, triangulate
from .motion import Motion3D
from .representation import DisentangledMotion, GlobalMotion2D, decode, encode
from .skeleton import Skeleton


@dataclass(frozen=True)
class LiftResult:
    """Absolute 3D motion plus the consistent per-view 2D it projects to."""

    motion3d: Motion3D
    per_view_2d: tuple[GlobalMotion2D, ...]
    per_step_residuals: np.ndarray  # (N,) mean cross-view residual in px
    seed: int


def _consistent_coords(rig: CameraRig, coords: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Triangulate (V, T, J, 2) pixel coords and reproject into every view."""
    points = triangulate(rig, coords)
    reprojected = np.stack([project(cam, points) for cam in rig.cameras])
    return points, reprojected


def consistency_project(rig: CameraRig, per_view, fps: float = 30.0,
                        skeleton: Skeleton | None = None,
                        ) -> tuple[Motion3D, list[DisentangledMotion]]:
    """Make per-view disentangled motions agree with one 3D motion.

    Decodes each view to global 2D, triangulates, reprojects, and
    re-encodes. Idempotent: a second application reproduces the first's
    output to float precision, since reprojections of a triangulated motion
    triangulate back to it.

    Parameters
    ----------
    rig : CameraRig
    per_view : sequence of DisentangledMotion, one per rig camera

    Returns
    -------
    (Motion3D, list of DisentangledMotion)
        The triangulated world motion and the consistent re-encodings.
    """
    if len(per_view) != len(rig):
        raise ValueError(f"got {len(per_view)} views for a {len(rig)}-camera rig")
    coords = np.stack([decode(d).coords for d in per_view])
    points, reprojected = _consistent_coords(rig, coords)
    consistent = [
        encode(GlobalMotion2D(coords=reprojected[v], view_index=d.view_index), d.root_joint)
        for v, d in enumerate(per_view)
    ]
    return Motion3D(coords=points, fps=fps, skeleton=skeleton), consistent


def lift(m0: GlobalMotion2D, rig: CameraRig, denoiser, schedule: DiffusionSchedule,
         seed: int = 0, root_joint: int = 0, fps: float = 30.0,
         skeleton: Skeleton | None = None) -> LiftResult:
    """Lift a primary-view 2D motion to absolute 3D world motion.

    Runs the reverse diffusion chain from seeded Gaussian noise; at every
    step the x0 prediction is replaced by its consistency projection before
    the posterior update. Pointmap conditioning is generated internally
    from the rig when the denoiser asks for it.

    Returns a :class:`LiftResult` whose ``per_view_2d`` equals the
    projection of ``motion3d`` into each view to float precision.
    """
    T, J = m0.coords.shape[:2]
    V = len(rig)
    codec = make_codec(rig.cameras, J, root_joint, decouple=denoiser.decouple)
    cond = build_conditioning(
        m0, rig, use_pointmaps=denoiser.wants_pointmaps,
        pointmap_grid=getattr(denoiser, "pointmap_grid", 16),
        decouple=denoiser.decouple, root_joint=root_joint)

    rng = np.random.default_rng(seed)
    x = rng.standard_normal((V, T, codec.rows, 2))
    residuals = np.zeros(schedule.steps)
    points = reprojected = None
    for step in range(schedule.steps - 1, -1, -1):
        x0_hat = denoiser.predict_x0(x, step, cond)
        if not np.all(np.isfinite(x0_hat)):
            raise NonFiniteState(f"denoiser output non-finite at step {step}")
        decoded = codec.global_from_tensor(x0_hat)
        points, reprojected = _consistent_coords(rig, decoded)
        residuals[step] = float(
            np.mean(np.linalg.norm(decoded - reprojected, axis=-1)))
        x0_proj = codec.tensor_from_global(reprojected)
        if step > 0:
            noise = rng.standard_normal(x.shape)
            x = posterior_step(x, x0_proj, step, schedule, noise)
            if not np.all(np.isfinite(x)):
                raise NonFiniteState(f"posterior sample non-finite at step {step}")

    per_view = tuple(
        GlobalMotion2D(coords=reprojected[v], view_index=v) for v in range(V))
    motion = Motion3D(coords=points, fps=fps, skeleton=skeleton)
    return LiftResult(motion3d=motion, per_view_2d=per_view,
                      per_step_residuals=residuals, seed=seed)
