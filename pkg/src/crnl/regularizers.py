"""Anisotropic total variation and the quadratic energy penalty."""

from __future__ import annotations

import numpy as np

__all__ = ["tv_norm", "energy_norm"]


def tv_norm(x: np.ndarray) -> tuple[float, np.ndarray]:
    """l1 TV along modes 1 and 2 of a 3-way tensor.

    value = sum_i |X[i+1,:,:] - X[i,:,:]| + sum_j |X[:,j+1,:] - X[:,j,:]|
    with entrywise absolute values summed over all remaining indices.
    Returns (value, subgradient); the subgradient uses sign(0) = 0, so it is
    a valid element of the subdifferential everywhere and the exact gradient
    away from kinks.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 3:
        raise ValueError(f"tv_norm expects a 3-way tensor, got {x.ndim} modes")
    if x.shape[0] < 2 or x.shape[1] < 2:
        raise ValueError("tv_norm needs at least 2 samples along modes 1 and 2")
    g = np.zeros_like(x)
    d0 = x[1:, :, :] - x[:-1, :, :]
    s0 = np.sign(d0)
    g[1:, :, :] += s0
    g[:-1, :, :] -= s0
    d1 = x[:, 1:, :] - x[:, :-1, :]
    s1 = np.sign(d1)
    g[:, 1:, :] += s1
    g[:, :-1, :] -= s1
    return float(np.abs(d0).sum() + np.abs(d1).sum()), g


def energy_norm(params: list[np.ndarray]) -> float:
    """Squared Frobenius norm summed over a parameter list. In training this
    term is realized through Adam's weight_decay rather than added to the
    loss explicitly; the function exists for reporting and tests."""
    return float(sum(np.sum(np.square(np.asarray(p, dtype=np.float64))) for p in params))
