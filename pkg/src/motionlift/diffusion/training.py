"""Training loops for single-view pretraining and multi-view fine-tuning.

The objective is plain mean squared error between the model's x0 prediction
and the clean motion tensor, with noised inputs drawn from the forward
process at a uniformly random level per sample. Optimization is SGD with
momentum 0.9 and gradient-norm clipping at 1.0.

Determinism contract: all randomness (batch order, view choice, noise
levels, noise) comes from one numpy generator seeded by the caller, model
initialization is seeded separately, and the loop pins torch to one thread
while running, so identical (seed, data, config) reproduce the loss curve
bit for bit.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import torch

from ..errors import DatasetModeMismatch
from .encoding import disentangled_to_tensor, pointmap_features
from .model import MotionDenoiser
from .schedule import DiffusionSchedule

STAGES = ("pretrain_2d", "finetune_mv")

DEFAULT_LR = 0.02
DEFAULT_BATCH = 64


@dataclass
class TrainingSet:
    """Dataset tensors precomputed for the training loop."""

    x0: torch.Tensor  # (S, V, T, rows, 2)
    m0: torch.Tensor  # (S, T, J, 2)
    cam: torch.Tensor  # (S, V, 16)
    pmap: torch.Tensor | None  # (S, V, gh, gw, 3)
    joint_count: int
    decouple: bool
    primary_index: int = 0

    @property
    def size(self) -> int:
        return self.x0.shape[0]

    @property
    def views(self) -> int:
        return self.x0.shape[1]

    @classmethod
    def from_samples(cls, samples, decouple: bool = True,
                     use_pointmaps: bool = True) -> "TrainingSet":
        from ..diffusion.encoding import camera_features  # local to avoid cycle

        first = samples[0]
        J = first.motion.joint_count
        primary = first.rig.primary_index
        x0s, m0s, cams, pmaps = [], [], [], []
        for s in samples:
            cameras = s.rig.cameras
            if decouple:
                x0s.append(disentangled_to_tensor(s.disentangled, cameras))
            else:
                dims = np.array([[c.image_w, c.image_h] for c in cameras], dtype=np.float64)
                coords = np.stack([v.coords for v in s.views_2d])
                x0s.append(coords / dims[:, None, None, :])
            pc = cameras[s.rig.primary_index]
            m0s.append(s.views_2d[s.rig.primary_index].coords
                       / np.array([pc.image_w, pc.image_h]))
            cams.append(np.stack([camera_features(c) for c in cameras]))
            if use_pointmaps:
                pmaps.append(np.stack([pointmap_features(p) for p in s.pointmaps]))
        to32 = lambda arrs: torch.from_numpy(np.stack(arrs).astype(np.float32))
        return cls(
            x0=to32(x0s), m0=to32(m0s), cam=to32(cams),
            pmap=to32(pmaps) if use_pointmaps else None,
            joint_count=J, decouple=decouple, primary_index=primary,
        )


@dataclass
class TrainingLog:
    """Per-epoch mean losses plus the pre-training baseline loss."""

    stage: str
    seed: int
    lr: float
    initial_loss: float
    epoch_losses: list[float] = field(default_factory=list)
    reached_ratio: float | None = None

    @property
    def final_loss(self) -> float:
        return self.epoch_losses[-1] if self.epoch_losses else self.initial_loss

    def epochs_to_target(self, target: float) -> int | None:
        """1-based index of the first epoch at or below ``target``."""
        for i, loss in enumerate(self.epoch_losses):
            if loss <= target:
                return i + 1
        return None

    def to_dict(self) -> dict:
        return {
            "stage": self.stage, "seed": self.seed, "lr": self.lr,
            "initial_loss": self.initial_loss, "epoch_losses": self.epoch_losses,
            "reached_ratio": self.reached_ratio,
        }


def _batch_inputs(data: TrainingSet, idx: np.ndarray, stage: str,
                  rng: np.random.Generator):
    """Assemble one batch; pretraining slices a random view per sample."""
    sel = torch.from_numpy(idx)
    if stage == "pretrain_2d":
        views = rng.integers(0, data.views, len(idx))
        x0 = data.x0[sel, torch.from_numpy(views)][:, None]  # (B, 1, T, rows, 2)
        return x0, {}
    x0 = data.x0[sel]
    kwargs = {"m0": data.m0[sel], "m0_rows": x0[:, data.primary_index],
              "cam": data.cam[sel], "primary_index": data.primary_index}
    if data.pmap is not None:
        kwargs["pmap"] = data.pmap[sel]
    return x0, kwargs


def _check_stage(model: MotionDenoiser, data: TrainingSet, stage: str) -> None:
    if stage not in STAGES:
        raise ValueError(f"stage must be one of {STAGES}")
    cfg = model.config
    if stage == "pretrain_2d" and cfg.mode != "single_view":
        raise DatasetModeMismatch("pretrain_2d requires a single_view model")
    if stage == "finetune_mv":
        if cfg.mode != "multi_view":
            raise DatasetModeMismatch("finetune_mv requires a multi_view model")
        if data.views < 2:
            raise DatasetModeMismatch("finetune_mv needs multi-view samples")
        if cfg.use_pointmaps and data.pmap is None:
            raise DatasetModeMismatch(
                "model expects pointmap conditioning; dataset built without it")
    if cfg.decouple != data.decouple or cfg.rows != data.x0.shape[-2]:
        raise DatasetModeMismatch(
            f"model layout (decouple={cfg.decouple}, rows={cfg.rows}) does not match "
            f"dataset (decouple={data.decouple}, rows={data.x0.shape[-2]})")


def _check_schedule(model: MotionDenoiser, schedule: DiffusionSchedule) -> None:
    cfg = model.config
    if schedule.steps != cfg.n_steps or schedule.kind != cfg.schedule:
        raise DatasetModeMismatch(
            f"model was built for a {cfg.n_steps}-step {cfg.schedule} schedule, "
            f"got a {schedule.steps}-step {schedule.kind} schedule")


def _noised(x0: torch.Tensor, schedule: DiffusionSchedule,
            rng: np.random.Generator) -> tuple[torch.Tensor, torch.Tensor]:
    steps = rng.integers(0, schedule.steps, x0.shape[0])
    noise = torch.from_numpy(
        rng.standard_normal(tuple(x0.shape)).astype(np.float32))
    ab = torch.from_numpy(
        schedule.alpha_bars[steps].astype(np.float32))[:, None, None, None, None]
    x_n = torch.sqrt(ab) * x0 + torch.sqrt(1 - ab) * noise
    return x_n, torch.from_numpy(steps)


def evaluate_loss(model: MotionDenoiser, data: TrainingSet, schedule: DiffusionSchedule,
                  stage: str, seed: int, batch_size: int = DEFAULT_BATCH) -> float:
    """Mean x0-prediction MSE over the dataset with seeded noise draws."""
    _check_schedule(model, schedule)
    rng = np.random.default_rng(seed)
    total, count = 0.0, 0
    model.eval()
    with torch.no_grad():
        for start in range(0, data.size, batch_size):
            idx = np.arange(start, min(start + batch_size, data.size))
            x0, kwargs = _batch_inputs(data, idx, stage, rng)
            x_n, steps = _noised(x0, schedule, rng)
            pred = model(x_n, steps, **kwargs)
            total += float(torch.mean((pred - x0) ** 2)) * len(idx)
            count += len(idx)
    return total / count


def train(model: MotionDenoiser, data: TrainingSet, schedule: DiffusionSchedule,
          stage: str, epochs: int, lr: float = DEFAULT_LR, seed: int = 0,
          batch_size: int = DEFAULT_BATCH, momentum: float = 0.9,
          clip_norm: float = 1.0, early_stop_ratio: float | None = None,
          verbose: bool = False) -> TrainingLog:
    """Train in place and return the loss log.

    ``early_stop_ratio`` stops once an epoch's mean loss falls to that
    fraction of the pre-training baseline loss.
    """
    _check_stage(model, data, stage)
    _check_schedule(model, schedule)
    n_threads = torch.get_num_threads()
    torch.set_num_threads(1)  # single-threaded reduction order: bitwise reproducible
    try:
        rng = np.random.default_rng(seed)
        initial = evaluate_loss(model, data, schedule, stage, seed=seed)
        log = TrainingLog(stage=stage, seed=seed, lr=lr, initial_loss=initial)
        opt = torch.optim.SGD(model.parameters(), lr=lr, momentum=momentum)
        model.train()
        for epoch in range(epochs):
            order = rng.permutation(data.size)
            total = 0.0
            for start in range(0, data.size, batch_size):
                idx = order[start:start + batch_size]
                x0, kwargs = _batch_inputs(data, idx, stage, rng)
                x_n, steps = _noised(x0, schedule, rng)
                pred = model(x_n, steps, **kwargs)
                loss = torch.mean((pred - x0) ** 2)
                opt.zero_grad()
                loss.backward()
                torch.nn.utils.clip_grad_norm_(model.parameters(), clip_norm)
                opt.step()
                total += float(loss.detach()) * len(idx)
            epoch_loss = total / data.size
            log.epoch_losses.append(epoch_loss)
            if verbose:
                print(f"[{stage}] epoch {epoch + 1}/{epochs} loss {epoch_loss:.6f}")
            if early_stop_ratio is not None and epoch_loss <= early_stop_ratio * initial:
                log.reached_ratio = epoch_loss / initial
                break
        model.eval()
        return log
    finally:
        torch.set_num_threads(n_threads)
