"""Sklearn-style estimator facade over the functional pipeline.

These wrappers follow the scikit-learn conventions (constructor params
stored verbatim, ``fit`` returns ``self``, fitted state in trailing-
underscore attributes, ``get_params``/``set_params`` from
:class:`~sklearn.base.BaseEstimator`) so the pipeline composes with the
wider ecosystem's tooling.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.exceptions import NotFittedError

from .diffusion import (
    DenoiserConfig,
    TorchDenoiser,
    TrainingSet,
    build_model,
    init_from_single_view,
    load_checkpoint,
    make_schedule,
    save_checkpoint,
    train,
)
from .geometry import CameraRig
from .lifting import LiftResult, lift
from .motion import Motion3D
from .refine import FitConfig, fit_skeleton
from .representation import DisentangledMotion, GlobalMotion2D, decode, encode
from .skeleton import Skeleton


class MotionDisentangler(TransformerMixin, BaseEstimator):
    """Stateless transformer between global 2D motion and its disentangled form."""

    def __init__(self, root_joint: int = 0):
        self.root_joint = root_joint

    def fit(self, X=None, y=None):
        return self

    def transform(self, X: GlobalMotion2D) -> DisentangledMotion:
        return encode(X, root_joint=self.root_joint)

    def inverse_transform(self, X: DisentangledMotion) -> GlobalMotion2D:
        return decode(X)


class SkeletonRefiner(TransformerMixin, BaseEstimator):
    """Bone-length-constrained motion refiner; transform maps Motion3D -> Motion3D."""

    def __init__(self, skeleton: Skeleton | None = None, bone_weight: float = 100.0,
                 smooth_weight: float = 1.0, max_iters: int = 50, tol: float = 1e-8,
                 damping: float = 1e-3):
        self.skeleton = skeleton
        self.bone_weight = bone_weight
        self.smooth_weight = smooth_weight
        self.max_iters = max_iters
        self.tol = tol
        self.damping = damping

    def _config(self) -> FitConfig:
        return FitConfig(bone_weight=self.bone_weight, smooth_weight=self.smooth_weight,
                         max_iters=self.max_iters, tol=self.tol, damping=self.damping)

    def fit(self, X=None, y=None):
        return self

    def transform(self, X: Motion3D) -> Motion3D:
        return fit_skeleton(X, skeleton=self.skeleton, config=self._config())


class MotionLifter(BaseEstimator):
    """End-to-end lifter: fit on multi-view samples, predict 3D from 2D.

    ``fit`` optionally pretrains a single-view model (``pretrain_epochs``),
    then fine-tunes the multi-view denoiser on the given samples.
    ``predict`` runs the reverse-diffusion lifting loop and returns a
    :class:`Motion3D`; ``lift`` returns the full :class:`LiftResult`.
    """

    def __init__(self, n_steps: int = 100, schedule: str = "cosine", width: int = 64,
                 blocks: int = 4, heads: int = 4, use_pointmaps: bool = True,
                 decouple: bool = True, epochs: int = 100, pretrain_epochs: int = 0,
                 lr: float = 0.02, batch_size: int = 64, seed: int = 0,
                 early_stop_ratio: float | None = None):
        self.n_steps = n_steps
        self.schedule = schedule
        self.width = width
        self.blocks = blocks
        self.heads = heads
        self.use_pointmaps = use_pointmaps
        self.decouple = decouple
        self.epochs = epochs
        self.pretrain_epochs = pretrain_epochs
        self.lr = lr
        self.batch_size = batch_size
        self.seed = seed
        self.early_stop_ratio = early_stop_ratio

    def _config(self, samples, mode: str) -> DenoiserConfig:
        first = samples[0]
        return DenoiserConfig(
            joint_count=first.motion.joint_count, mode=mode, decouple=self.decouple,
            width=self.width, blocks=self.blocks, heads=self.heads,
            use_pointmaps=self.use_pointmaps and mode == "multi_view",
            pointmap_grid=first.pointmaps[0].grid_w,
            n_steps=self.n_steps, schedule=self.schedule,
        )

    def fit(self, X, y=None):
        """Train on a list of :class:`~motionlift.synth.MotionSample`."""
        samples = list(X)
        data = TrainingSet.from_samples(samples, decouple=self.decouple,
                                        use_pointmaps=self.use_pointmaps)
        self.schedule_ = make_schedule(self.n_steps, self.schedule)
        self.pretrain_log_ = None
        model = build_model(self._config(samples, "multi_view"), seed=self.seed)
        if self.pretrain_epochs > 0:
            sv_model = build_model(self._config(samples, "single_view"), seed=self.seed)
            self.pretrain_log_ = train(
                sv_model, data, self.schedule_, "pretrain_2d", self.pretrain_epochs,
                lr=self.lr, seed=self.seed, batch_size=self.batch_size)
            init_from_single_view(model, sv_model)
        self.train_log_ = train(
            model, data, self.schedule_, "finetune_mv", self.epochs, lr=self.lr,
            seed=self.seed, batch_size=self.batch_size,
            early_stop_ratio=self.early_stop_ratio)
        self.model_ = model
        self.root_joint_ = samples[0].motion.skeleton.root if samples[0].motion.skeleton else 0
        self.skeleton_ = samples[0].motion.skeleton
        return self

    def _check_fitted(self):
        if not hasattr(self, "model_"):
            raise NotFittedError("MotionLifter is not fitted; call fit or load a checkpoint")

    def lift(self, m0: GlobalMotion2D, rig: CameraRig, seed: int | None = None,
             fps: float = 30.0) -> LiftResult:
        self._check_fitted()
        denoiser = TorchDenoiser(self.model_, primary_index=rig.primary_index)
        return lift(m0, rig, denoiser, self.schedule_,
                    seed=self.seed if seed is None else seed,
                    root_joint=self.root_joint_, fps=fps, skeleton=self.skeleton_)

    def predict(self, m0: GlobalMotion2D, rig: CameraRig, seed: int | None = None,
                fps: float = 30.0) -> Motion3D:
        return self.lift(m0, rig, seed=seed, fps=fps).motion3d

    def save(self, path) -> None:
        self._check_fitted()
        extra = {
            "root_joint": self.root_joint_,
            "train_log": self.train_log_.to_dict() if self.train_log_ else None,
        }
        save_checkpoint(self.model_, path, extra=extra)

    @classmethod
    def from_checkpoint(cls, path, skeleton: Skeleton | None = None) -> "MotionLifter":
        model, extra = load_checkpoint(path)
        cfg = model.config
        est = cls(n_steps=cfg.n_steps,
                  schedule=cfg.schedule, width=cfg.width,
                  blocks=cfg.blocks, heads=cfg.heads, use_pointmaps=cfg.use_pointmaps,
                  decouple=cfg.decouple)
        est.model_ = model
        est.schedule_ = make_schedule(est.n_steps, est.schedule)
        est.train_log_ = None
        est.pretrain_log_ = None
        est.root_joint_ = int(extra.get("root_joint", 0))
        est.skeleton_ = skeleton
        return est
