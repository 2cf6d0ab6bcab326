"""Checkpoints: named parameter arrays plus config in one .npz container.

The file holds every state-dict entry as a float array under its parameter
name, and a JSON-encoded header under ``__config__`` with the model config,
schedule settings, and a format version. Loading into an existing model
with a different config is an error.
"""

from __future__ import annotations

import json
import os
from pathlib import Path

import numpy as np
import torch

from ..errors import IoFailure
from .model import DenoiserConfig, MotionDenoiser, build_model

CHECKPOINT_VERSION = 1


def save_checkpoint(model: MotionDenoiser, path, extra: dict | None = None) -> None:
    """Write the model atomically (temp file + rename)."""
    path = Path(path)
    header = {
        "checkpoint_version": CHECKPOINT_VERSION,
        "config": model.config.to_dict(),
        "extra": extra or {},
    }
    arrays = {name: tensor.detach().cpu().numpy()
              for name, tensor in model.state_dict().items()}
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        tmp = path.with_name(path.name + ".tmp")
        with open(tmp, "wb") as f:
            np.savez(f, __config__=np.frombuffer(
                json.dumps(header).encode(), dtype=np.uint8), **arrays)
        os.replace(tmp, path)
    except OSError as e:
        raise IoFailure(f"cannot write checkpoint {path}: {e}") from e


def read_checkpoint(path) -> tuple[dict, dict]:
    """Return (header, arrays) without building a model."""
    path = Path(path)
    try:
        with np.load(path) as data:
            header = json.loads(bytes(data["__config__"]).decode())
            arrays = {k: data[k] for k in data.files if k != "__config__"}
    except (OSError, KeyError, ValueError, json.JSONDecodeError) as e:
        raise IoFailure(f"cannot read checkpoint {path}: {e}") from e
    if header.get("checkpoint_version") != CHECKPOINT_VERSION:
        raise IoFailure(
            f"{path}: unsupported checkpoint version {header.get('checkpoint_version')!r}")
    return header, arrays


def load_checkpoint(path) -> tuple[MotionDenoiser, dict]:
    """Rebuild the model stored at ``path``; returns (model, extra)."""
    header, arrays = read_checkpoint(path)
    config = DenoiserConfig.from_dict(header["config"])
    model = build_model(config)
    model.load_state_dict({k: torch.from_numpy(v) for k, v in arrays.items()})
    model.eval()
    return model, header.get("extra", {})


def load_checkpoint_into(model: MotionDenoiser, path) -> dict:
    """Load weights into ``model``; its config must match the stored one."""
    header, arrays = read_checkpoint(path)
    if header["config"] != model.config.to_dict():
        raise IoFailure(
            f"{path}: checkpoint config {header['config']} does not match "
            f"model config {model.config.to_dict()}")
    model.load_state_dict({k: torch.from_numpy(v) for k, v in arrays.items()})
    return header.get("extra", {})
