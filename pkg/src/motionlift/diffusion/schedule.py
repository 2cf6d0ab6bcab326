"""DDPM noise schedules, the forward process, and the reverse posterior step.

Arrays are indexed by noise level n in [0, N): ``alpha_bars[n]`` is the
cumulative product of ``1 - betas[:n+1]``, so level 0 is nearly clean
(``alpha_bars[0] > 0.99``) and level N-1 is nearly pure noise. These
functions are array-library agnostic: coefficients enter as Python floats,
so numpy and torch inputs both work.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..errors import BadStepCount, ShapeMismatch

SCHEDULE_KINDS = ("linear", "cosine")

_LINEAR_BETA_START = 1e-4
_LINEAR_BETA_END = 0.02
_COSINE_OFFSET = 0.008
_BETA_CLIP = 0.999


@dataclass(frozen=True)
class DiffusionSchedule:
    steps: int
    betas: np.ndarray
    alphas: np.ndarray
    alpha_bars: np.ndarray
    kind: str

    def __post_init__(self):
        for arr in (self.betas, self.alphas, self.alpha_bars):
            arr.setflags(write=False)


def make_schedule(steps: int, kind: str = "cosine") -> DiffusionSchedule:
    """Build a noise schedule of ``steps`` levels.

    The cosine kind uses the squared-cosine alpha-bar profile with betas
    clipped at 0.999. Raises :class:`BadStepCount` when ``steps < 2`` or
    when the cosine profile cannot keep ``alpha_bars[0] > 0.99`` (which
    needs roughly 18 or more steps).
    """
    if steps < 2:
        raise BadStepCount(f"need at least 2 steps, got {steps}")
    if kind == "linear":
        betas = np.linspace(_LINEAR_BETA_START, _LINEAR_BETA_END, steps)
    elif kind == "cosine":
        def profile(u: float) -> float:
            return math.cos((u + _COSINE_OFFSET) / (1 + _COSINE_OFFSET) * math.pi / 2) ** 2

        targets = np.array([profile((n + 1) / steps) / profile(0.0) for n in range(steps)])
        prev = np.concatenate([[1.0], targets[:-1]])
        betas = np.clip(1.0 - targets / prev, 0.0, _BETA_CLIP)
    else:
        raise ValueError(f"unknown schedule kind {kind!r}; choose from {SCHEDULE_KINDS}")
    alphas = 1.0 - betas
    alpha_bars = np.cumprod(alphas)
    if alpha_bars[0] <= 0.99:
        raise BadStepCount(
            f"{kind} schedule with {steps} steps gives alpha_bars[0] = "
            f"{alpha_bars[0]:.4f} <= 0.99; use more steps"
        )
    if np.any(betas <= 0) or np.any(betas >= 1) or np.any(np.diff(alpha_bars) >= 0):
        raise BadStepCount(f"{kind} schedule with {steps} steps violates invariants")
    return DiffusionSchedule(steps=steps, betas=betas, alphas=alphas,
                             alpha_bars=alpha_bars, kind=kind)


def q_sample(x0, step: int, noise, schedule: DiffusionSchedule):
    """Forward process: sqrt(ab_n) * x0 + sqrt(1 - ab_n) * noise."""
    if not 0 <= step < schedule.steps:
        raise ValueError(f"step {step} out of range [0, {schedule.steps})")
    if x0.shape != noise.shape:
        raise ShapeMismatch(f"x0 shape {x0.shape} != noise shape {noise.shape}")
    ab = float(schedule.alpha_bars[step])
    return math.sqrt(ab) * x0 + math.sqrt(1.0 - ab) * noise


def posterior_step(x_n, x0_hat, step: int, schedule: DiffusionSchedule, noise):
    """Sample level ``step - 1`` from the DDPM posterior q(x_{n-1} | x_n, x0).

    Uses the fixed-small-variance convention
    ``sigma_n^2 = (1 - ab_{n-1}) / (1 - ab_n) * beta_n``, which tends to
    zero as the first betas shrink.
    """
    if not 1 <= step < schedule.steps:
        raise ValueError(f"step {step} out of range [1, {schedule.steps})")
    if x_n.shape != x0_hat.shape or x_n.shape != noise.shape:
        raise ShapeMismatch(
            f"shapes disagree: x_n {x_n.shape}, x0_hat {x0_hat.shape}, noise {noise.shape}"
        )
    beta = float(schedule.betas[step])
    alpha = float(schedule.alphas[step])
    ab_n = float(schedule.alpha_bars[step])
    ab_prev = float(schedule.alpha_bars[step - 1])
    coef_x0 = math.sqrt(ab_prev) * beta / (1.0 - ab_n)
    coef_xn = math.sqrt(alpha) * (1.0 - ab_prev) / (1.0 - ab_n)
    sigma = math.sqrt((1.0 - ab_prev) / (1.0 - ab_n) * beta)
    return coef_x0 * x0_hat + coef_xn * x_n + sigma * noise
