"""Input validation helpers used by the public entry points."""

from __future__ import annotations

import numpy as np

from .errors import ShapeMismatch


def as_float_array(a, name: str, shape: tuple | None = None) -> np.ndarray:
    """Coerce to a float64 ndarray, optionally checking the shape.

    ``shape`` entries of ``None`` match any extent, e.g. ``(None, 3)`` accepts
    any K x 3 array.
    """
    arr = np.asarray(a, dtype=np.float64)
    if shape is not None:
        if arr.ndim != len(shape) or any(
            want is not None and got != want for got, want in zip(arr.shape, shape)
        ):
            raise ShapeMismatch(f"{name} has shape {arr.shape}, expected {shape}")
    return arr


def check_finite(arr: np.ndarray, name: str) -> np.ndarray:
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains NaN or infinite values")
    return arr


def check_same_shape(a: np.ndarray, b: np.ndarray, name_a: str, name_b: str) -> None:
    if a.shape != b.shape:
        raise ShapeMismatch(f"{name_a} shape {a.shape} != {name_b} shape {b.shape}")
