"""Bone-length-constrained refinement of triangulated 3D motion.

Minimizes, over joint positions X (T, J, 3),

    sum ||X - w||^2
    + bone_weight   * sum_t sum_j (||X_tj - X_t,parent(j)|| - L_j)^2
    + smooth_weight * sum_t ||X_{t+1} - X_t||^2

with Levenberg-Marquardt damped Gauss-Newton. The data term anchors the
fit to the input ``w``, so with all weights zero the solve is the identity.
Steps are only accepted when they reduce the cost, so the recorded cost
sequence is non-increasing.

When ``smooth_weight`` is zero the frames decouple and are solved as a
batch of independent 3J x 3J systems; otherwise the normal equations are
block tridiagonal and solved in banded form.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import solveh_banded

from .errors import NonFiniteCost
from .motion import Motion3D
from .skeleton import Skeleton

_MAX_REJECTS = 16  # damping increases tried per iteration before giving up


@dataclass(frozen=True)
class FitConfig:
    bone_weight: float = 100.0
    smooth_weight: float = 1.0
    max_iters: int = 50
    tol: float = 1e-8
    damping: float = 1e-3

    def __post_init__(self):
        if self.bone_weight < 0 or self.smooth_weight < 0:
            raise ValueError("weights must be non-negative")
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if self.tol <= 0:
            raise ValueError("tol must be positive")


@dataclass
class FitInfo:
    """Diagnostics from :func:`fit_skeleton` (accepted-step costs)."""

    costs: list[float] = field(default_factory=list)
    iterations: int = 0
    converged: bool = False


def bone_lengths(frame, skeleton: Skeleton) -> np.ndarray:
    """Per-joint distance to the parent; the root entry is 0."""
    frame = np.asarray(frame, dtype=np.float64)
    if frame.shape != (skeleton.joint_count, 3):
        raise ValueError(f"frame must be ({skeleton.joint_count}, 3), got {frame.shape}")
    lengths = np.linalg.norm(frame - frame[skeleton.parent], axis=-1)
    lengths[skeleton.root] = 0.0
    return lengths


def _nonroot(skeleton: Skeleton) -> np.ndarray:
    return np.flatnonzero(np.arange(skeleton.joint_count) != skeleton.root)


def bone_residual(frame: np.ndarray, skeleton: Skeleton) -> np.ndarray:
    """Unweighted bone residuals ||X_j - X_parent|| - L_j for non-root joints."""
    joints = _nonroot(skeleton)
    diffs = frame[joints] - frame[skeleton.parent[joints]]
    return np.linalg.norm(diffs, axis=-1) - skeleton.rest_bone_lengths[joints]


def bone_residual_jacobian(frame: np.ndarray, skeleton: Skeleton) -> np.ndarray:
    """Analytic Jacobian of :func:`bone_residual`, shape (J-1, 3J).

    Row for bone j holds the unit bone direction at joint j's coordinates
    and its negative at the parent's.
    """
    J = skeleton.joint_count
    joints = _nonroot(skeleton)
    jac = np.zeros((len(joints), 3 * J))
    for row, j in enumerate(joints):
        p = int(skeleton.parent[j])
        diff = frame[j] - frame[p]
        unit = diff / max(np.linalg.norm(diff), 1e-12)
        jac[row, 3 * j:3 * j + 3] = unit
        jac[row, 3 * p:3 * p + 3] = -unit
    return jac


def _cost(X: np.ndarray, w: np.ndarray, skeleton: Skeleton, cfg: FitConfig) -> float:
    joints = _nonroot(skeleton)
    diffs = X[:, joints] - X[:, skeleton.parent[joints]]
    norms = np.linalg.norm(diffs, axis=-1)
    cost = float(((X - w) ** 2).sum())
    cost += cfg.bone_weight * float(
        ((norms - skeleton.rest_bone_lengths[joints]) ** 2).sum())
    if cfg.smooth_weight > 0 and X.shape[0] > 1:
        cost += cfg.smooth_weight * float(((X[1:] - X[:-1]) ** 2).sum())
    if not np.isfinite(cost):
        raise NonFiniteCost(f"refinement cost is {cost}")
    return cost


def _normal_equations(X: np.ndarray, w: np.ndarray, skeleton: Skeleton,
                      cfg: FitConfig) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Newton blocks: per-frame (T, 3J, 3J) diagonal blocks and gradient.

    The smoothness cross-frame coupling is the constant -smooth_weight * I
    and is handled separately by the banded solver.
    """
    T, J = X.shape[:2]
    n = 3 * J
    blocks = np.zeros((T, n, n))
    idx = np.arange(n)
    blocks[:, idx, idx] = 1.0  # data term
    grad = (X - w).reshape(T, n).copy()

    lam_b = cfg.bone_weight
    if lam_b > 0:
        joints = _nonroot(skeleton)
        diffs = X[:, joints] - X[:, skeleton.parent[joints]]  # (T, B, 3)
        norms = np.maximum(np.linalg.norm(diffs, axis=-1), 1e-12)
        units = diffs / norms[..., None]
        resid = norms - skeleton.rest_bone_lengths[joints]
        outer = lam_b * np.einsum("tbi,tbj->tbij", units, units)  # (T, B, 3, 3)
        for b, j in enumerate(joints):
            p = int(skeleton.parent[j])
            sj, sp = slice(3 * j, 3 * j + 3), slice(3 * p, 3 * p + 3)
            blocks[:, sj, sj] += outer[:, b]
            blocks[:, sp, sp] += outer[:, b]
            blocks[:, sj, sp] -= outer[:, b]
            blocks[:, sp, sj] -= outer[:, b]
            g = lam_b * resid[:, b, None] * units[:, b]
            grad[:, 3 * j:3 * j + 3] += g
            grad[:, 3 * p:3 * p + 3] -= g

    lam_s = cfg.smooth_weight
    if lam_s > 0 and T > 1:
        vel = lam_s * (X[1:] - X[:-1]).reshape(T - 1, n)
        grad[:-1] -= vel
        grad[1:] += vel
        neighbors = np.full(T, 2.0)
        neighbors[[0, -1]] = 1.0
        blocks[:, idx, idx] += lam_s * neighbors[:, None]
    return blocks, grad


def _solve_step(blocks: np.ndarray, grad: np.ndarray, mu: float,
                smooth_weight: float) -> np.ndarray:
    """Solve (H + mu I) delta = -grad; returns delta with grad's shape."""
    T, n = grad.shape
    idx = np.arange(n)
    damped = blocks.copy()
    damped[:, idx, idx] += mu
    if smooth_weight == 0 or T == 1:
        return np.linalg.solve(damped, -grad[..., None])[..., 0]
    # Banded lower form: within-frame blocks plus the -smooth_weight * I
    # coupling exactly n entries below the diagonal.
    ab = np.zeros((n + 1, T * n))
    for off in range(n):
        vals = damped[:, idx[off:], idx[:n - off]]  # (T, n-off)
        ab[off].reshape(T, n)[:, :n - off] = vals
    ab[n, :-n] = -smooth_weight
    delta = solveh_banded(ab, -grad.ravel(), lower=True)
    return delta.reshape(T, n)


def fit_skeleton(motion: Motion3D, skeleton: Skeleton | None = None,
                 config: FitConfig | None = None, return_info: bool = False):
    """Refine a motion toward its skeleton's rest bone lengths.

    Parameters
    ----------
    motion : Motion3D
    skeleton : Skeleton, optional
        Defaults to ``motion.skeleton``.
    config : FitConfig, optional
    return_info : bool
        When True, also return a :class:`FitInfo` with the accepted-step
        cost history.

    Returns
    -------
    Motion3D or (Motion3D, FitInfo)
    """
    skeleton = skeleton or motion.skeleton
    if skeleton is None:
        raise ValueError("fit_skeleton needs a skeleton (argument or motion.skeleton)")
    if skeleton.joint_count != motion.joint_count:
        raise ValueError("skeleton joint count does not match motion")
    cfg = config or FitConfig()
    w = motion.coords
    X = w.copy()
    cost = _cost(X, w, skeleton, cfg)
    info = FitInfo(costs=[cost])
    mu = cfg.damping

    for _ in range(cfg.max_iters):
        blocks, grad = _normal_equations(X, w, skeleton, cfg)
        if np.linalg.norm(grad) < 1e-14:
            info.converged = True
            break
        new_cost = None
        for _ in range(_MAX_REJECTS):
            delta = _solve_step(blocks, grad, mu, cfg.smooth_weight)
            candidate = X + delta.reshape(X.shape)
            candidate_cost = _cost(candidate, w, skeleton, cfg)
            if candidate_cost < cost:
                X, new_cost = candidate, candidate_cost
                mu = max(mu / 3.0, 1e-12)
                break
            mu *= 3.0
        if new_cost is None:
            info.converged = True  # no descent direction left at any damping
            break
        info.iterations += 1
        info.costs.append(new_cost)
        rel = (cost - new_cost) / max(cost, 1e-300)
        cost = new_cost
        if rel < cfg.tol:
            info.converged = True
            break

    fitted = Motion3D(coords=X, fps=motion.fps, skeleton=skeleton)
    return (fitted, info) if return_info else fitted
