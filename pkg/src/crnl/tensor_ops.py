"""Dense tensor algebra: unfoldings, mode products, norms, numerical Tucker rank.

Conventions, fixed across the package:

* A dense tensor is a plain numpy ndarray in C (row-major) order. Mode d,
  1-based as in the multilinear algebra literature, is axis d-1.
* The mode-d unfolding X^(d) is the (n_d, prod(other dims)) matrix obtained by
  moving axis d-1 to the front and reshaping in C order. Columns are therefore
  ordered by the remaining axes in their original ascending order, with the
  last axis varying fastest. fold() is the exact inverse for a given shape.
* mode_product(x, A, d) contracts A (m, n_d) against mode d and satisfies
  unfold(result, d) == A @ unfold(x, d).

These choices make rank(X^(d)) independent of the column convention, so any
consistent unfolding gives the same Tucker rank vector.
"""

from __future__ import annotations

import numpy as np

__all__ = [
    "unfold",
    "fold",
    "mode_product",
    "frobenius_norm",
    "l1_norm",
    "numerical_tucker_rank",
]


def _check_mode(x: np.ndarray, mode: int) -> None:
    if not 1 <= mode <= x.ndim:
        raise ValueError(f"mode {mode} out of range for a {x.ndim}-way tensor")


def unfold(x: np.ndarray, mode: int) -> np.ndarray:
    """Mode-d unfolding of x, d 1-based. Shape (n_d, prod of the rest)."""
    x = np.asarray(x)
    _check_mode(x, mode)
    return np.moveaxis(x, mode - 1, 0).reshape(x.shape[mode - 1], -1)


def fold(mat: np.ndarray, mode: int, shape: tuple[int, ...]) -> np.ndarray:
    """Inverse of unfold: rebuild a tensor of `shape` from its mode-d unfolding."""
    mat = np.asarray(mat)
    if not 1 <= mode <= len(shape):
        raise ValueError(f"mode {mode} out of range for shape {shape}")
    lead = shape[mode - 1]
    rest = [s for i, s in enumerate(shape) if i != mode - 1]
    if mat.shape != (lead, int(np.prod(rest, dtype=np.int64))):
        raise ValueError(f"matrix shape {mat.shape} does not match shape {shape} at mode {mode}")
    return np.moveaxis(mat.reshape([lead] + rest), 0, mode - 1)


def mode_product(x: np.ndarray, a: np.ndarray, mode: int) -> np.ndarray:
    """Contract matrix a (m, n_d) against mode d of x; result has n_d -> m."""
    x = np.asarray(x)
    a = np.asarray(a)
    _check_mode(x, mode)
    if a.ndim != 2:
        raise ValueError("mode_product expects a matrix")
    if a.shape[1] != x.shape[mode - 1]:
        raise ValueError(
            f"matrix has {a.shape[1]} columns but tensor mode {mode} has size {x.shape[mode - 1]}"
        )
    new_shape = list(x.shape)
    new_shape[mode - 1] = a.shape[0]
    return fold(a @ unfold(x, mode), mode, tuple(new_shape))


def frobenius_norm(x: np.ndarray) -> float:
    return float(np.sqrt(np.sum(np.square(np.asarray(x, dtype=np.float64)))))


def l1_norm(x: np.ndarray) -> float:
    return float(np.sum(np.abs(np.asarray(x, dtype=np.float64))))


def numerical_tucker_rank(x: np.ndarray, tol: float = 1e-8) -> tuple[int, ...]:
    """Per-mode numerical ranks of the unfoldings.

    Singular values below tol * (largest singular value of that unfolding)
    are treated as zero. The all-zero tensor has rank 0 in every mode.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.size == 0:
        raise ValueError("empty tensor has no rank")
    ranks = []
    for mode in range(1, x.ndim + 1):
        sv = np.linalg.svd(unfold(x, mode), compute_uv=False)
        top = sv[0] if sv.size else 0.0
        ranks.append(int(np.count_nonzero(sv > tol * top)) if top > 0 else 0)
    return tuple(ranks)
