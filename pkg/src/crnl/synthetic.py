"""Synthetic benchmark functions, masks, noise, and generated test data."""

from __future__ import annotations

import numpy as np

from .seeding import rng_stream

__all__ = [
    "SYNTHETIC_FUNCTIONS",
    "synthetic_function",
    "sample_function",
    "make_mask",
    "add_noise",
    "make_multiband_image",
    "make_point_cloud",
]


def _f1(x, y):
    return (1.0 / 3.0) * np.exp(-(81.0 / 4.0) * ((x - 0.5) ** 2 + (y - 0.5) ** 2))


def _f2(x, y):
    return (1.25 + np.cos(5.4 * y)) / (6.0 + 6.0 * (3.0 * x - 1.0) ** 2)


def _f3(x, y):
    return (1.0 / 9.0) * (np.tanh(9.0 - 9.0 * x - 9.0 * y) + 1.0)


def _f4(x, y):
    return (2.0 * np.exp(-30.0 * ((x - 1.0 / 3.0) ** 2 + (y - 1.0 / 3.0) ** 2))
            - np.exp(-20.0 * ((x - 2.0 / 3.0) ** 2 + (y - 2.0 / 3.0) ** 2)))


SYNTHETIC_FUNCTIONS = {"f1": _f1, "f2": _f2, "f3": _f3, "f4": _f4}


def synthetic_function(name: str):
    if name not in SYNTHETIC_FUNCTIONS:
        raise ValueError(f"unknown function {name!r}, expected one of "
                         f"{sorted(SYNTHETIC_FUNCTIONS)}")
    return SYNTHETIC_FUNCTIONS[name]


def sample_function(name: str, n_samples: int, seed: int,
                    train_fraction: float = 0.2):
    """n_samples uniform points on [0,1]^2, split into train/test by the
    given fraction (2/8 split = 0.2). Returns (train_pts, train_vals,
    test_pts, test_vals). Uses the 'split' stream of the seed."""
    if n_samples < 2:
        raise ValueError("need at least 2 samples")
    if not 0.0 < train_fraction < 1.0:
        raise ValueError("train_fraction must be in (0, 1)")
    f = synthetic_function(name)
    rng = rng_stream(seed, "split")
    pts = rng.uniform(0.0, 1.0, size=(n_samples, 2))
    vals = f(pts[:, 0], pts[:, 1])
    n_train = int(round(train_fraction * n_samples))
    n_train = min(max(n_train, 1), n_samples - 1)
    perm = rng.permutation(n_samples)
    tr, te = perm[:n_train], perm[n_train:]
    return pts[tr], vals[tr], pts[te], vals[te]


def make_mask(shape: tuple[int, ...], rate: float, seed: int) -> np.ndarray:
    """Boolean mask with exactly round(rate * count) True entries, chosen
    uniformly without replacement from the 'mask' stream."""
    if not 0.0 < rate <= 1.0:
        raise ValueError("sampling rate must be in (0, 1]")
    count = int(np.prod(shape))
    n_obs = int(round(rate * count))
    rng = rng_stream(seed, "mask")
    chosen = rng.choice(count, size=n_obs, replace=False)
    mask = np.zeros(count, dtype=bool)
    mask[chosen] = True
    return mask.reshape(shape)


def add_noise(x: np.ndarray, sigma: float, seed: int) -> np.ndarray:
    """x plus iid N(0, sigma^2) from the 'noise' stream."""
    if sigma < 0:
        raise ValueError("sigma must be >= 0")
    x = np.asarray(x, dtype=np.float64)
    if sigma == 0.0:
        return x.copy()
    rng = rng_stream(seed, "noise")
    return x + rng.normal(0.0, sigma, size=x.shape)


def make_multiband_image(height: int = 64, width: int = 64, bands: int = 8,
                         seed: int = 7) -> np.ndarray:
    """Smooth multiband test image in [0, 1]: a few spatial Gaussian bumps
    and a ridge, each modulated by its own band signature. Deterministic."""
    rng = np.random.default_rng(seed)
    yy, xx = np.meshgrid(np.linspace(0, 1, height), np.linspace(0, 1, width),
                         indexing="ij")
    comps = []
    for _ in range(4):
        cx, cy = rng.uniform(0.15, 0.85, size=2)
        s = rng.uniform(0.08, 0.25)
        comps.append(np.exp(-((xx - cx) ** 2 + (yy - cy) ** 2) / (2 * s * s)))
    comps.append(0.5 * (np.tanh(8.0 * (xx + yy - 1.0)) + 1.0))
    img = np.zeros((height, width, bands))
    for c in comps:
        sig = rng.uniform(0.2, 1.0, size=bands)
        img += c[:, :, None] * sig[None, None, :]
    img -= img.min()
    img /= img.max()
    return img


def make_point_cloud(n_points: int = 1500, seed: int = 11):
    """Colored synthetic point cloud: points on a bumpy torus-like surface,
    colors a smooth periodic function of position (so distant patches repeat,
    which nonlocal grouping can exploit). Returns (xyz (n,3), rgb (n,3) in
    [0,1])."""
    rng = np.random.default_rng(seed)
    u = rng.uniform(0.0, 2 * np.pi, size=n_points)
    v = rng.uniform(0.0, 2 * np.pi, size=n_points)
    r_minor = 0.35 + 0.05 * np.sin(3 * u)
    x = (1.0 + r_minor * np.cos(v)) * np.cos(u)
    y = (1.0 + r_minor * np.cos(v)) * np.sin(u)
    z = r_minor * np.sin(v)
    xyz = np.stack([x, y, z], axis=1)
    rgb = np.stack([
        0.5 + 0.5 * np.sin(2 * u) * np.cos(v),
        0.5 + 0.5 * np.cos(2 * u),
        0.5 + 0.5 * np.sin(v + u),
    ], axis=1)
    return xyz, np.clip(rgb, 0.0, 1.0)
