"""Sine-activated MLPs with hand-written reverse-mode gradients, plus Adam.

The networks here are small fully-connected stacks
    z_k = a_{k-1} W_k^T + b_k,   a_k = sin(omega * z_k)   (hidden layers)
with an affine final layer (no activation). Gradients are computed exactly by
backpropagation in float64; the finite-difference oracles in the test suite
hold them to ~1e-6 relative error. Everything is deterministic given a seed:
same init, same data order, bit-identical parameters after K identical steps.
"""

from __future__ import annotations

import json
import logging
import numpy as np

log = logging.getLogger(__name__)

__all__ = [
    "SineMLP",
    "siren_init",
    "param_l1_bound",
    "Adam",
    "TrainingDiverged",
    "save_net_checkpoint",
    "load_net_checkpoint",
    "net_to_dict",
    "net_from_dict",
]


class TrainingDiverged(RuntimeError):
    """Raised when a training loss stops being finite."""


class SineMLP:
    """Fully-connected net, sin(omega * z) hidden activations, affine output.

    widths is the full layer-size list [d_in, h_1, ..., h_{M-1}, d_out];
    there are M = len(widths) - 1 weight layers.
    """

    def __init__(self, widths: list[int], omega: float = 30.0, seed: int | None = 0,
                 bias: bool = True):
        if len(widths) < 2 or any(w < 1 for w in widths):
            raise ValueError(f"bad layer widths {widths}")
        self.widths = list(int(w) for w in widths)
        self.omega = float(omega)
        self.has_bias = bool(bias)
        self.weights = [np.zeros((o, i)) for i, o in zip(self.widths[:-1], self.widths[1:])]
        self.biases = [np.zeros(o) for o in self.widths[1:]]
        if seed is not None:
            siren_init(self, seed)

    @property
    def in_dim(self) -> int:
        return self.widths[0]

    @property
    def out_dim(self) -> int:
        return self.widths[-1]

    @property
    def n_layers(self) -> int:
        return len(self.weights)

    def parameters(self) -> list[np.ndarray]:
        """Flat parameter list, fixed order: W_1, b_1, W_2, b_2, ..."""
        out = []
        for w, b in zip(self.weights, self.biases):
            out.append(w)
            out.append(b)
        return out

    def n_parameters(self) -> int:
        return sum(p.size for p in self.parameters())

    def forward(self, x: np.ndarray) -> np.ndarray:
        y, _ = self.forward_cached(x, keep=False)
        return y

    def forward_cached(self, x: np.ndarray, keep: bool = True):
        """Forward pass; with keep=True also returns the activation cache
        needed by backward(). x has shape (n, d_in)."""
        x = np.asarray(x, dtype=np.float64)
        if x.ndim != 2 or x.shape[1] != self.in_dim:
            raise ValueError(f"expected input of shape (n, {self.in_dim}), got {x.shape}")
        acts = [x] if keep else None
        pre = [] if keep else None
        a = x
        last = self.n_layers - 1
        for k, (w, b) in enumerate(zip(self.weights, self.biases)):
            z = a @ w.T + b
            if k < last:
                a = np.sin(self.omega * z)
                if keep:
                    pre.append(z)
                    acts.append(a)
            else:
                a = z
        return a, (acts, pre)

    def backward(self, cache, dout: np.ndarray, need_dx: bool = False):
        """Exact reverse-mode gradients.

        cache comes from forward_cached(keep=True); dout is dL/d(output),
        shape (n, d_out). Returns (dweights, dbiases) or, with need_dx,
        (dweights, dbiases, dx).
        """
        acts, pre = cache
        if acts is None:
            raise ValueError("backward needs a cache from forward_cached(keep=True)")
        dws = [None] * self.n_layers
        dbs = [None] * self.n_layers
        dz = np.asarray(dout, dtype=np.float64)
        for k in range(self.n_layers - 1, -1, -1):
            a_prev = acts[k]
            dws[k] = dz.T @ a_prev
            dbs[k] = dz.sum(axis=0)
            if k > 0 or need_dx:
                da_prev = dz @ self.weights[k]
                if k > 0:
                    # chain through a_{k-1} = sin(omega * z_{k-1})
                    dz = da_prev * (self.omega * np.cos(self.omega * pre[k - 1]))
                else:
                    dx = da_prev
        if need_dx:
            return dws, dbs, dx
        return dws, dbs


def siren_init(net: SineMLP, seed: int) -> SineMLP:
    """In-place layer init: first layer U(+-1/fan_in), later layers
    U(+-sqrt(6/fan_in)/omega). Biases use the same per-layer ranges so no two
    seeds collapse onto f(0) == const (all-zero biases pin every sine path to
    zero at the origin). Deterministic given seed."""
    rng = np.random.default_rng(seed)
    for k, w in enumerate(net.weights):
        fan_in = w.shape[1]
        bound = 1.0 / fan_in if k == 0 else np.sqrt(6.0 / fan_in) / net.omega
        net.weights[k] = rng.uniform(-bound, bound, size=w.shape)
        if net.has_bias:
            net.biases[k] = rng.uniform(-bound, bound, size=w.shape[0])
        else:
            net.biases[k] = np.zeros(w.shape[0])
    return net


def param_l1_bound(net: SineMLP) -> float:
    """Max over layers of the entrywise l1 norm of the weight matrix.
    Upper-bounds every layer's operator norm, hence the net's Lipschitz
    factor per layer."""
    return max(float(np.abs(w).sum()) for w in net.weights)


class Adam:
    """Adam over a list of parameter arrays, updated in place.

    weight_decay adds wd * param to the gradient before the moment updates
    (coupled L2, the classic Adam variant). A step whose gradients contain
    non-finite values is reported and skipped entirely; the step counter
    does not advance.
    """

    def __init__(self, params: list[np.ndarray], lr: float = 1e-3,
                 betas: tuple[float, float] = (0.9, 0.999), eps: float = 1e-8,
                 weight_decay: float = 0.0):
        self.params = list(params)
        self.lr = float(lr)
        self.beta1, self.beta2 = float(betas[0]), float(betas[1])
        self.eps = float(eps)
        self.weight_decay = float(weight_decay)
        self.m = [np.zeros_like(p) for p in self.params]
        self.v = [np.zeros_like(p) for p in self.params]
        self.t = 0
        self.skipped = 0

    def step(self, grads: list[np.ndarray]) -> bool:
        """Apply one update. Returns False (and changes nothing) if any
        gradient entry is non-finite."""
        if len(grads) != len(self.params):
            raise ValueError(f"got {len(grads)} gradients for {len(self.params)} parameters")
        for g in grads:
            if not np.all(np.isfinite(g)):
                self.skipped += 1
                log.warning("non-finite gradient, skipping step (skipped=%d)", self.skipped)
                return False
        self.t += 1
        b1t = 1.0 - self.beta1 ** self.t
        b2t = 1.0 - self.beta2 ** self.t
        for p, g, m, v in zip(self.params, grads, self.m, self.v):
            if self.weight_decay:
                g = g + self.weight_decay * p
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * np.square(g)
            p -= self.lr * (m / b1t) / (np.sqrt(v / b2t) + self.eps)
        return True


# -- checkpoints --------------------------------------------------------------
# JSON layout (field order fixed): widths, omega, layers; each layer a dict
# with "weight" (nested lists, row = output unit) then "bias".

def net_to_dict(net: SineMLP) -> dict:
    return {
        "widths": net.widths,
        "omega": net.omega,
        "layers": [
            {"weight": w.tolist(), "bias": b.tolist()}
            for w, b in zip(net.weights, net.biases)
        ],
    }


def net_from_dict(doc: dict) -> SineMLP:
    net = SineMLP(doc["widths"], omega=doc["omega"], seed=None)
    layers = doc["layers"]
    if len(layers) != net.n_layers:
        raise ValueError("checkpoint layer count does not match widths")
    for k, layer in enumerate(layers):
        w = np.asarray(layer["weight"], dtype=np.float64)
        b = np.asarray(layer["bias"], dtype=np.float64)
        if w.shape != net.weights[k].shape or b.shape != net.biases[k].shape:
            raise ValueError(f"checkpoint layer {k} has shape {w.shape}, expected "
                             f"{net.weights[k].shape}")
        net.weights[k] = w
        net.biases[k] = b
    return net


def save_net_checkpoint(net: SineMLP, path: str) -> None:
    with open(path, "w") as fh:
        json.dump(net_to_dict(net), fh)


def load_net_checkpoint(path: str) -> SineMLP:
    with open(path) as fh:
        return net_from_dict(json.load(fh))
