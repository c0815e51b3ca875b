"""Input checks shared by strategies, problems and the harness."""

from __future__ import annotations

import numpy as np


def check_losses(losses, n_losses=None, *, positive=False, name="losses"):
    """Return ``losses`` as a finite, non-negative 1-D float array."""
    arr = np.asarray(losses, dtype=float)
    if arr.ndim != 1 or arr.size == 0:
        raise ValueError(f"{name} must be a non-empty 1-D sequence, got shape {arr.shape}")
    if n_losses is not None and arr.size != n_losses:
        raise ValueError(f"expected {n_losses} {name}, got {arr.size}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} must be finite, got {arr}")
    if positive:
        if np.any(arr <= 0):
            raise ValueError(f"{name} must be strictly positive, got {arr}")
    elif np.any(arr < 0):
        raise ValueError(f"{name} must be non-negative, got {arr}")
    return arr


def check_gradients(gradients, n_losses=None):
    """Return per-loss gradients as a finite ``(n_losses, dim)`` array."""
    try:
        arr = np.asarray(gradients, dtype=float)
    except ValueError:
        raise ValueError("gradient vectors must all have the same dimension") from None
    if arr.ndim == 1:
        arr = arr[None, :]
    if arr.ndim != 2 or arr.shape[0] == 0 or arr.shape[1] == 0:
        raise ValueError(f"gradients must be a (n_losses, dim) array, got shape {arr.shape}")
    if n_losses is not None and arr.shape[0] != n_losses:
        raise ValueError(f"expected {n_losses} gradient vectors, got {arr.shape[0]}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("gradients must be finite")
    return arr


def check_vector(x, dim=None, name="params"):
    arr = np.asarray(x, dtype=float)
    if arr.ndim != 1:
        raise ValueError(f"{name} must be 1-D, got shape {arr.shape}")
    if dim is not None and arr.size != dim:
        raise ValueError(f"{name} must have length {dim}, got {arr.size}")
    return arr
