"""Oracle denoiser: a test double that always returns a fixed clean sample.

Plugging it into the lifting loop validates the reverse-diffusion and
consistency machinery independently of any learning.
"""

from __future__ import annotations

import numpy as np


class OracleDenoiser:
    """Ignores the noised input and returns ``gt`` as the x0 prediction."""

    wants_pointmaps = False
    pointmap_grid = 16

    def __init__(self, gt: np.ndarray, decouple: bool = True):
        self.gt = np.asarray(gt, dtype=np.float64).copy()
        self.decouple = decouple

    def predict_x0(self, x: np.ndarray, step: int, cond) -> np.ndarray:
        if x.shape != self.gt.shape:
            raise ValueError(f"x shape {x.shape} != oracle target shape {self.gt.shape}")
        return self.gt.copy()


def oracle_denoiser(gt: np.ndarray, decouple: bool = True) -> OracleDenoiser:
    return OracleDenoiser(gt, decouple=decouple)
