"""Diffusion machinery: schedules, the denoiser network, training, oracles."""

from .checkpoint import load_checkpoint, load_checkpoint_into, read_checkpoint, save_checkpoint
from .encoding import (
    Conditioning,
    DecoupledCodec,
    DirectCodec,
    build_conditioning,
    camera_features,
    disentangled_to_tensor,
    make_codec,
    pointmap_features,
    tensor_to_disentangled,
)
from .model import (
    DenoiserConfig,
    MotionDenoiser,
    TorchDenoiser,
    build_model,
    denoise,
    init_from_single_view,
)
from .oracle import OracleDenoiser, oracle_denoiser
from .schedule import SCHEDULE_KINDS, DiffusionSchedule, make_schedule, posterior_step, q_sample
from .training import TrainingLog, TrainingSet, evaluate_loss, train

__all__ = [
    "Conditioning", "DecoupledCodec", "DenoiserConfig", "DiffusionSchedule",
    "DirectCodec", "MotionDenoiser", "OracleDenoiser", "SCHEDULE_KINDS",
    "TorchDenoiser", "TrainingLog", "TrainingSet", "build_conditioning",
    "build_model", "camera_features", "denoise", "disentangled_to_tensor",
    "evaluate_loss", "init_from_single_view", "load_checkpoint",
    "load_checkpoint_into", "make_codec", "make_schedule", "oracle_denoiser",
    "pointmap_features", "posterior_step", "q_sample", "read_checkpoint",
    "save_checkpoint", "tensor_to_disentangled", "train",
]
