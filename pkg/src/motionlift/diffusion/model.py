"""Transformer denoiser with temporal, view, and pointmap cross attention.

One token per (view, frame). Each block applies, in order: temporal
self-attention within a view, view attention across views at the same time
index (multi-view mode), cross-attention from a view's tokens to that
view's pointmap tokens (when enabled), and a feedforward. Conditioning:

* timestep -- sinusoidal embedding through an MLP, added to every token;
* primary-view motion -- embedded per frame and concatenated onto the
  primary view's tokens (other views receive zeros), then projected back;
* camera intrinsics + extrinsics -- a two-layer perceptron compresses the
  16-dim camera descriptor into one extra token per view;
* pointmaps -- per-cell linear embedding of (x_w, y_w, valid), average
  pooled to a coarse token grid per view.

The final projection and every new-branch output projection start at zero,
so a fine-tuned model initialized from single-view weights begins as the
pretrained model applied per view.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np
import torch
import torch.nn as nn

from ..errors import ModeMismatch

MODES = ("single_view", "multi_view")


@dataclass(frozen=True)
class DenoiserConfig:
    joint_count: int
    mode: str = "multi_view"
    decouple: bool = True
    width: int = 64
    blocks: int = 4
    heads: int = 4
    ff_mult: int = 2
    use_pointmaps: bool = True
    pointmap_grid: int = 16
    pointmap_pool: int = 4  # pooling factor applied to the token grid
    n_steps: int = 100  # diffusion schedule the model is trained against
    schedule: str = "cosine"

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")
        if self.width % self.heads:
            raise ValueError("width must be divisible by heads")
        if self.pointmap_grid % self.pointmap_pool:
            raise ValueError("pointmap_grid must be divisible by pointmap_pool")

    @property
    def rows(self) -> int:
        """Tensor rows per frame: J+1 decoupled (local+traj+scale), J direct."""
        return self.joint_count + 1 if self.decouple else self.joint_count

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "DenoiserConfig":
        return cls(**d)


def sinusoidal_embedding(positions: torch.Tensor, dim: int) -> torch.Tensor:
    """Standard sin/cos embedding of integer positions, shape (..., dim)."""
    half = dim // 2
    freqs = torch.exp(
        -math.log(10000.0) * torch.arange(half, dtype=torch.float32) / max(half - 1, 1)
    )
    args = positions.float()[..., None] * freqs
    emb = torch.cat([torch.sin(args), torch.cos(args)], dim=-1)
    if dim % 2:
        emb = torch.cat([emb, torch.zeros_like(emb[..., :1])], dim=-1)
    return emb


def _zero_init(module: nn.Module) -> nn.Module:
    for p in module.parameters():
        nn.init.zeros_(p)
    return module


class DenoiserBlock(nn.Module):
    def __init__(self, cfg: DenoiserConfig):
        super().__init__()
        w = cfg.width
        self.multi_view = cfg.mode == "multi_view"
        self.use_pointmaps = cfg.use_pointmaps and self.multi_view
        self.norm_t = nn.LayerNorm(w)
        self.attn_t = nn.MultiheadAttention(w, cfg.heads, batch_first=True)
        if self.multi_view:
            self.norm_v = nn.LayerNorm(w)
            self.attn_v = nn.MultiheadAttention(w, cfg.heads, batch_first=True)
            _zero_init(self.attn_v.out_proj)
        if self.use_pointmaps:
            self.norm_c = nn.LayerNorm(w)
            self.norm_pm = nn.LayerNorm(w)
            self.attn_c = nn.MultiheadAttention(w, cfg.heads, batch_first=True)
            _zero_init(self.attn_c.out_proj)
        self.norm_ff = nn.LayerNorm(w)
        self.ff = nn.Sequential(
            nn.Linear(w, cfg.ff_mult * w), nn.GELU(), nn.Linear(cfg.ff_mult * w, w)
        )

    def forward(self, tokens: torch.Tensor, pmap_tokens: torch.Tensor | None) -> torch.Tensor:
        B, V, S, w = tokens.shape
        h = tokens.reshape(B * V, S, w)
        n = self.norm_t(h)
        h = h + self.attn_t(n, n, n, need_weights=False)[0]
        if self.multi_view:
            hv = h.reshape(B, V, S, w).transpose(1, 2).reshape(B * S, V, w)
            n = self.norm_v(hv)
            hv = hv + self.attn_v(n, n, n, need_weights=False)[0]
            h = hv.reshape(B, S, V, w).transpose(1, 2).reshape(B * V, S, w)
        if self.use_pointmaps:
            kv = self.norm_pm(pmap_tokens)  # (B*V, P, w)
            q = self.norm_c(h)
            h = h + self.attn_c(q, kv, kv, need_weights=False)[0]
        n = self.norm_ff(h)
        h = h + self.ff(n)
        return h.reshape(B, V, S, w)


class MotionDenoiser(nn.Module):
    """Predicts the clean sample x0 from a noised motion tensor.

    The prediction is ``sqrt(alpha_bar_n) * x_n`` plus a learned correction;
    the skip term makes the near-clean identity free at low noise levels,
    so training spends capacity on actual denoising. The output is still a
    clean-sample (x0) prediction.
    """

    def __init__(self, config: DenoiserConfig):
        super().__init__()
        from .schedule import make_schedule  # deferred: schedule has no torch dep

        self.config = config
        w = config.width
        skip = np.sqrt(make_schedule(config.n_steps, config.schedule).alpha_bars)
        self.register_buffer("skip_scale", torch.from_numpy(skip.astype(np.float32)))
        if config.decouple:
            # Separate token streams so local pose and global movement get
            # independent capacity; this is the point of the decoupling.
            self.pose_proj = nn.Linear((config.joint_count - 1) * 2, w)
            self.move_proj = nn.Linear(4, w)
            self.stream_embed = nn.Parameter(0.02 * torch.randn(2, w))
            self.pose_head = _zero_init(nn.Linear(w, (config.joint_count - 1) * 2))
            self.move_head = _zero_init(nn.Linear(w, 4))
        else:
            self.in_proj = nn.Linear(config.rows * 2, w)
            self.out_proj = _zero_init(nn.Linear(w, config.rows * 2))
        self.time_mlp = nn.Sequential(nn.Linear(w, w), nn.SiLU(), nn.Linear(w, w))
        if config.mode == "multi_view":
            self.m0_proj = nn.Linear(config.joint_count * 2, w)
            self.cond_merge = nn.Linear(2 * w, w)
            with torch.no_grad():
                # Identity on the token half, zero on the conditioning half,
                # so conditioning is invisible until trained.
                self.cond_merge.weight.zero_()
                self.cond_merge.weight[:, :w] = torch.eye(w)
                self.cond_merge.bias.zero_()
            self.cam_mlp = nn.Sequential(nn.Linear(16, w), nn.SiLU(),
                                         _zero_init(nn.Linear(w, w)))
        if config.use_pointmaps and config.mode == "multi_view":
            self.pmap_embed = nn.Linear(3, w)
            self.pmap_pool = nn.AvgPool2d(config.pointmap_pool)
        self.blocks = nn.ModuleList(DenoiserBlock(config) for _ in range(config.blocks))
        self.out_norm = nn.LayerNorm(w)

    def _check_inputs(self, x, m0, m0_rows, cam, pmap):
        cfg = self.config
        if x.dim() != 5 or x.shape[-2] != cfg.rows or x.shape[-1] != 2:
            raise ModeMismatch(
                f"expected x of shape (B, V, T, {cfg.rows}, 2), got {tuple(x.shape)}")
        if cfg.mode == "single_view":
            if x.shape[1] != 1:
                raise ModeMismatch("single_view model takes exactly one view")
            if m0 is not None or m0_rows is not None or cam is not None or pmap is not None:
                raise ModeMismatch("single_view model takes no conditioning")
        else:
            if m0 is None or m0_rows is None or cam is None:
                raise ModeMismatch(
                    "multi_view model requires m0, m0_rows, and camera conditioning")
            if cfg.use_pointmaps and pmap is None:
                raise ModeMismatch("model was built with pointmap conditioning; none given")
            if not cfg.use_pointmaps and pmap is not None:
                raise ModeMismatch("model was built without pointmap conditioning")

    def forward(self, x: torch.Tensor, steps: torch.Tensor,
                m0: torch.Tensor | None = None, m0_rows: torch.Tensor | None = None,
                cam: torch.Tensor | None = None, pmap: torch.Tensor | None = None,
                primary_index: int = 0) -> torch.Tensor:
        """x: (B, V, T, rows, 2); steps: (B,) integer noise levels.

        ``m0_rows`` (B, T, rows, 2) is the primary view's observed motion in
        tensor layout; the primary view's prediction is anchored on it.
        """
        self._check_inputs(x, m0, m0_rows, cam, pmap)
        cfg = self.config
        B, V, T = x.shape[:3]
        w = cfg.width
        J = cfg.joint_count

        pe = sinusoidal_embedding(torch.arange(T, device=x.device), w)[None, None]
        if cfg.decouple:
            pose_tok = self.pose_proj(x[..., :J - 1, :].reshape(B, V, T, (J - 1) * 2))
            move_tok = self.move_proj(x[..., J - 1:, :].reshape(B, V, T, 4))
            tokens = torch.cat([pose_tok + pe + self.stream_embed[0],
                                move_tok + pe + self.stream_embed[1]], dim=2)
        else:
            tokens = self.in_proj(x.reshape(B, V, T, cfg.rows * 2)) + pe
        frames = tokens.shape[2]  # T direct, 2T decoupled

        if cfg.mode == "multi_view":
            m0_emb = self.m0_proj(m0.reshape(B, T, -1))  # (B, T, w)
            if cfg.decouple:
                m0_emb = m0_emb.repeat(1, 2, 1)  # both streams see the input view
            cond = torch.zeros(B, V, frames, w, dtype=tokens.dtype, device=x.device)
            cond[:, primary_index] = m0_emb
            tokens = self.cond_merge(torch.cat([tokens, cond], dim=-1))
            cam_tok = self.cam_mlp(cam)[:, :, None, :]  # (B, V, 1, w)
            tokens = torch.cat([cam_tok, tokens], dim=2)  # cam token at slot 0

        tokens = tokens + self.time_mlp(sinusoidal_embedding(steps, w))[:, None, None, :]

        pmap_tokens = None
        if cfg.use_pointmaps and cfg.mode == "multi_view":
            g = cfg.pointmap_grid
            emb = self.pmap_embed(pmap.reshape(B * V, g, g, 3))
            emb = self.pmap_pool(emb.permute(0, 3, 1, 2))  # (B*V, w, g/p, g/p)
            pmap_tokens = emb.flatten(2).transpose(1, 2)  # (B*V, P, w)

        for block in self.blocks:
            tokens = block(tokens, pmap_tokens)

        if cfg.mode == "multi_view":
            tokens = tokens[:, :, 1:, :]  # drop the camera token
        tokens = self.out_norm(tokens)
        if cfg.decouple:
            pose = self.pose_head(tokens[:, :, :T]).reshape(B, V, T, J - 1, 2)
            move = self.move_head(tokens[:, :, T:]).reshape(B, V, T, 2, 2)
            out = torch.cat([pose, move], dim=3)
        else:
            out = self.out_proj(tokens).reshape(B, V, T, cfg.rows, 2)
        # Virtual views start at the scaled noisy state; the primary view
        # starts at its observed motion (its clean rows are known).
        skip = self.skip_scale[steps].reshape(B, 1, 1, 1, 1)
        base = skip * x
        if cfg.mode == "multi_view":
            base = base.clone()
            base[:, primary_index] = m0_rows
        return base + out


def build_model(config: DenoiserConfig, seed: int = 0) -> MotionDenoiser:
    """Construct a denoiser with seeded, reproducible initialization."""
    torch.manual_seed(seed)
    return MotionDenoiser(config)


def init_from_single_view(mv_model: MotionDenoiser, sv_model: MotionDenoiser) -> None:
    """Load the shared (temporal/feedforward/projection) weights in place.

    The two configs must agree on width, blocks, heads, joint count, and
    tensor layout; view attention, pointmap attention, and conditioning
    branches keep their fresh (zero-output) initialization.
    """
    mv, sv = mv_model.config, sv_model.config
    if sv.mode != "single_view" or mv.mode != "multi_view":
        raise ValueError("expected a single_view source and a multi_view target")
    shared = ("width", "blocks", "heads", "ff_mult", "joint_count", "decouple")
    for name in shared:
        if getattr(mv, name) != getattr(sv, name):
            raise ValueError(f"config field {name!r} differs; cannot transfer weights")
    target = mv_model.state_dict()
    for name, value in sv_model.state_dict().items():
        if name in target and target[name].shape == value.shape:
            target[name] = value.clone()
    mv_model.load_state_dict(target)


class TorchDenoiser:
    """Inference adapter: numpy in/out around a trained torch model."""

    def __init__(self, model: MotionDenoiser, primary_index: int = 0):
        self.model = model.eval()
        self.config = model.config
        self.primary_index = primary_index

    @property
    def decouple(self) -> bool:
        return self.config.decouple

    @property
    def wants_pointmaps(self) -> bool:
        return self.config.use_pointmaps and self.config.mode == "multi_view"

    @property
    def pointmap_grid(self) -> int:
        return self.config.pointmap_grid

    def predict_x0(self, x: np.ndarray, step: int, cond) -> np.ndarray:
        """x: (V, T, rows, 2) numpy; returns the x0 prediction as float64."""
        with torch.no_grad():
            xt = torch.from_numpy(np.ascontiguousarray(x, dtype=np.float32))[None]
            steps = torch.tensor([step], dtype=torch.long)
            kwargs = {}
            if self.config.mode == "multi_view":
                kwargs["m0"] = torch.from_numpy(
                    np.ascontiguousarray(cond.m0, dtype=np.float32))[None]
                kwargs["m0_rows"] = torch.from_numpy(
                    np.ascontiguousarray(cond.m0_rows, dtype=np.float32))[None]
                kwargs["cam"] = torch.from_numpy(
                    np.ascontiguousarray(cond.cameras, dtype=np.float32))[None]
                if self.wants_pointmaps:
                    kwargs["pmap"] = torch.from_numpy(
                        np.ascontiguousarray(cond.pointmaps, dtype=np.float32))[None]
                kwargs["primary_index"] = self.primary_index
            out = self.model(xt, steps, **kwargs)
        return out[0].double().numpy()


def denoise(model: MotionDenoiser, x_n: np.ndarray, step: int, cond,
            primary_index: int = 0) -> np.ndarray:
    """One x0 prediction for a single sequence; see :class:`TorchDenoiser`."""
    return TorchDenoiser(model, primary_index).predict_x0(x_n, step, cond)
