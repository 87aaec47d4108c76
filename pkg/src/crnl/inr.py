"""Fitting a continuous representation to observed samples.

An ObservedSet is a bag of (coordinate, value) samples, possibly carrying the
native meshgrid it came from. Coordinates are kept raw; every consumer maps
them through the set's CoordinateMap, an invertible per-dimension affine onto
[-1, 1], before a network sees them. The channel/band index of an image is an
ordinary coordinate dimension here.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .nets import Adam, SineMLP, TrainingDiverged
from .regularizers import tv_norm

__all__ = ["CoordinateMap", "ObservedSet", "FitConfig", "fit_inr", "evaluate_grid"]


class CoordinateMap:
    """Invertible affine [lo_d, hi_d] -> [-1, 1] per dimension. A degenerate
    dimension (hi == lo, e.g. the band index of a grayscale image) maps to 0."""

    def __init__(self, lo, hi):
        self.lo = np.atleast_1d(np.asarray(lo, dtype=np.float64))
        self.hi = np.atleast_1d(np.asarray(hi, dtype=np.float64))
        if self.lo.shape != self.hi.shape or self.lo.ndim != 1:
            raise ValueError("lo/hi must be 1-d arrays of equal length")
        if np.any(self.hi < self.lo):
            raise ValueError("hi < lo")
        self.span = self.hi - self.lo

    @property
    def n_dims(self) -> int:
        return self.lo.size

    def normalize(self, points: np.ndarray) -> np.ndarray:
        pts = np.asarray(points, dtype=np.float64)
        out = np.zeros_like(pts)
        ok = self.span > 0
        out[..., ok] = 2.0 * (pts[..., ok] - self.lo[ok]) / self.span[ok] - 1.0
        return out

    def denormalize(self, normed: np.ndarray) -> np.ndarray:
        q = np.asarray(normed, dtype=np.float64)
        out = np.broadcast_to(self.lo, q.shape).copy()
        ok = self.span > 0
        out[..., ok] = self.lo[ok] + (q[..., ok] + 1.0) * 0.5 * self.span[ok]
        return out

    def clamp(self, points: np.ndarray) -> np.ndarray:
        return np.clip(np.asarray(points, dtype=np.float64), self.lo, self.hi)


class ObservedSet:
    """Observed samples of an unknown function on R^N.

    points: (n, N) raw coordinates; values: (n,). grid_axes, when present,
    are the native per-axis coordinates of the meshgrid the samples live on
    (all samples must sit on it); scattered data has grid_axes None.
    """

    def __init__(self, points: np.ndarray, values: np.ndarray,
                 grid_axes: list[np.ndarray] | None = None):
        self.points = np.atleast_2d(np.asarray(points, dtype=np.float64))
        self.values = np.asarray(values, dtype=np.float64).ravel()
        if self.points.shape[0] != self.values.shape[0]:
            raise ValueError(f"{self.points.shape[0]} points but {self.values.shape[0]} values")
        if self.points.shape[0] == 0:
            raise ValueError("empty observed set")
        if not (np.all(np.isfinite(self.points)) and np.all(np.isfinite(self.values))):
            raise ValueError("non-finite coordinates or values")
        self.grid_axes = None
        if grid_axes is not None:
            if len(grid_axes) != self.n_dims:
                raise ValueError("grid_axes dimensionality mismatch")
            self.grid_axes = [np.asarray(a, dtype=np.float64).ravel() for a in grid_axes]
            lo = np.array([a[0] for a in self.grid_axes])
            hi = np.array([a[-1] for a in self.grid_axes])
        else:
            lo = self.points.min(axis=0)
            hi = self.points.max(axis=0)
        # grid data normalizes over the full native extent, not just the
        # observed subset: every grid position must stay a valid query
        self.coord_map = CoordinateMap(lo, hi)

    @property
    def n_dims(self) -> int:
        return self.points.shape[1]

    @property
    def n_points(self) -> int:
        return self.points.shape[0]

    @property
    def grid_shape(self) -> tuple[int, ...] | None:
        if self.grid_axes is None:
            return None
        return tuple(len(a) for a in self.grid_axes)

    @classmethod
    def from_grid(cls, tensor: np.ndarray, mask: np.ndarray | None = None) -> "ObservedSet":
        """Samples from a dense tensor on its integer meshgrid; mask (same
        shape, boolean) selects the observed entries."""
        tensor = np.asarray(tensor, dtype=np.float64)
        if mask is None:
            mask = np.ones(tensor.shape, dtype=bool)
        mask = np.asarray(mask, dtype=bool)
        if mask.shape != tensor.shape:
            raise ValueError(f"mask shape {mask.shape} != tensor shape {tensor.shape}")
        idx = np.argwhere(mask)
        axes = [np.arange(n, dtype=np.float64) for n in tensor.shape]
        return cls(idx.astype(np.float64), tensor[mask], grid_axes=axes)

    @classmethod
    def from_points(cls, points: np.ndarray, values: np.ndarray) -> "ObservedSet":
        return cls(points, values, grid_axes=None)


@dataclass
class FitConfig:
    """Knobs for fit_inr. gamma > 0 adds the image TV term, evaluated on the
    native grid every tv_interval iterations."""

    iterations: int = 2000
    hidden_width: int = 256
    n_layers: int = 3
    omega: float = 30.0
    lr: float = 1e-3
    weight_decay: float = 1e-6
    gamma: float = 0.0
    tv_interval: int = 10
    seed: int = 0
    log_every: int = 50
    max_batch: int = 65536

    def widths(self, in_dim: int) -> list[int]:
        return [in_dim] + [self.hidden_width] * (self.n_layers - 1) + [1]


def fit_inr(obs: ObservedSet, config: FitConfig, callback=None) -> SineMLP:
    """Fit a sine MLP to the observed samples.

    Loss is the plain sum of squared residuals; the energy term runs through
    Adam's weight decay and the TV term (images, gamma > 0) backpropagates
    through a full-grid evaluation every tv_interval iterations. Full batch,
    fixed order, deterministic given config.seed. callback(iteration, net,
    loss) fires every log_every iterations and on the last one.
    """
    if config.iterations < 1:
        raise ValueError("iterations must be >= 1")
    net = SineMLP(config.widths(obs.n_dims), omega=config.omega, seed=config.seed)
    opt = Adam(net.parameters(), lr=config.lr, weight_decay=config.weight_decay)
    x = obs.coord_map.normalize(obs.points)
    y = obs.values

    use_tv = config.gamma > 0.0 and obs.grid_axes is not None
    if use_tv:
        if len(obs.grid_axes) != 3:
            raise ValueError("TV regularization needs 3-way grid data")
        mesh = np.meshgrid(*obs.grid_axes, indexing="ij")
        grid_pts = obs.coord_map.normalize(np.stack([m.ravel() for m in mesh], axis=-1))
        grid_shape = obs.grid_shape

    for it in range(config.iterations):
        pred, cache = net.forward_cached(x)
        resid = pred[:, 0] - y
        loss = float(np.dot(resid, resid))
        if not np.isfinite(loss):
            raise TrainingDiverged(f"INR loss became non-finite at iteration {it}")
        dws, dbs = net.backward(cache, (2.0 * resid)[:, None])

        if use_tv and it % config.tv_interval == 0:
            gpred, gcache = net.forward_cached(grid_pts)
            tv_val, tv_sub = tv_norm(gpred[:, 0].reshape(grid_shape))
            loss += config.gamma * tv_val
            tws, tbs = net.backward(gcache, config.gamma * tv_sub.reshape(-1, 1))
            for a, b in zip(dws, tws):
                a += b
            for a, b in zip(dbs, tbs):
                a += b

        grads = []
        for w, b in zip(dws, dbs):
            grads.append(w)
            grads.append(b)
        opt.step(grads)
        if callback is not None and (it % config.log_every == 0 or it == config.iterations - 1):
            callback(it, net, loss)
    return net


def evaluate_grid(net: SineMLP, axes: list[np.ndarray], coord_map: CoordinateMap,
                  max_batch: int = 65536) -> np.ndarray:
    """Evaluate the net on the cartesian meshgrid of the given raw axes.
    Returns a tensor shaped (len(axes[0]), len(axes[1]), ...)."""
    axes = [np.asarray(a, dtype=np.float64).ravel() for a in axes]
    if len(axes) != net.in_dim:
        raise ValueError(f"net expects {net.in_dim} dims, got {len(axes)} axes")
    if any(a.size == 0 for a in axes):
        raise ValueError("empty grid axis")
    shape = tuple(a.size for a in axes)
    mesh = np.meshgrid(*axes, indexing="ij")
    pts = coord_map.normalize(np.stack([m.ravel() for m in mesh], axis=-1))
    out = np.empty(pts.shape[0], dtype=np.float64)
    for lo in range(0, pts.shape[0], max_batch):
        hi = min(lo + max_batch, pts.shape[0])
        out[lo:hi] = net.forward(pts[lo:hi])[:, 0]
    return out.reshape(shape)
