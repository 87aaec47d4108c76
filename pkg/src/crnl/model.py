"""Coupled low-rank function factorization over similarity groups.

Each group l gets its own core tensor C_l; one bank of per-dimension factor
networks is shared by every group (coupled) or replicated per group
(uncoupled ablation). A group's function value at v in R^(N+1) is the core
contracted with the factor outputs f_d(v_d) along every dimension.

Training minimizes the fixed-group-order sum of squared residuals over the
group observed sets, plus the optional image TV term on the reassembled
key-cube prediction; the quadratic energy term runs through Adam's weight
decay. Gradients are exact; the heavy lifting is organized so that factor
networks are only ever evaluated on the unique coordinate values of each
input dimension:

* dims >= 3 with few unique values (channel/band indices, the similarity
  coordinate s) are "level" dims: their factor rows are pre-contracted with
  the cores into per-(group, level-combination) slices once per iteration;
* the remaining "dense" dims are contracted point by point, either on
  gathered slices (small slice sizes) or segment-by-segment via matmul
  (large slices, e.g. point-cloud ranks 15x15x15).

Both routes produce identical losses and gradients up to float roundoff of
the same summation order; the finite-difference oracle in the tests pins
them down.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .inr import CoordinateMap
from .grouping import CubeGrid, GroupObservedSet, assign_key_cubes
from .nets import Adam, SineMLP, TrainingDiverged, net_from_dict, net_to_dict
from .regularizers import tv_norm
from .tensor_ops import l1_norm, numerical_tucker_rank

__all__ = [
    "CRNLModel",
    "TrainConfig",
    "train",
    "evaluate",
    "evaluate_batch",
    "infer",
    "predict_points",
    "random_model",
    "lipschitz_bound_check",
    "frank_bound_check",
    "save_model_checkpoint",
    "load_model_checkpoint",
]


class CRNLModel:
    """Cores + factor banks + the coordinate map onto [-1, 1]^(N+1).

    factors is a list of banks: one bank (shared) when coupled, L banks when
    uncoupled. Each bank holds one SineMLP per input dimension, mapping the
    normalized scalar coordinate to r_d outputs.
    """

    def __init__(self, ranks: tuple[int, ...], cores: list[np.ndarray],
                 factors: list[list[SineMLP]], coupled: bool, coord_map: CoordinateMap):
        self.ranks = tuple(int(r) for r in ranks)
        self.cores = cores
        self.factors = factors
        self.coupled = bool(coupled)
        self.coord_map = coord_map
        k = len(self.ranks)
        if coord_map.n_dims != k:
            raise ValueError("coordinate map dimensionality != rank order")
        for c in cores:
            if c.shape != self.ranks:
                raise ValueError(f"core shape {c.shape} != ranks {self.ranks}")
        if coupled and len(factors) != 1:
            raise ValueError("coupled model must have exactly one factor bank")
        if not coupled and len(factors) != len(cores):
            raise ValueError("uncoupled model needs one factor bank per group")
        for bank in factors:
            if len(bank) != k:
                raise ValueError("each factor bank needs one net per dimension")
            for d, net in enumerate(bank):
                if net.in_dim != 1 or net.out_dim != self.ranks[d]:
                    raise ValueError(f"factor net {d} maps 1 -> {net.out_dim}, "
                                     f"expected 1 -> {self.ranks[d]}")

    @property
    def n_groups(self) -> int:
        return len(self.cores)

    @property
    def n_dims(self) -> int:
        return len(self.ranks)

    def bank(self, l: int) -> list[SineMLP]:
        return self.factors[0] if self.coupled else self.factors[l]

    def parameters(self) -> list[np.ndarray]:
        """Fixed order: cores (group-major), then factor nets (bank-major,
        dimension-minor, each net W_1, b_1, W_2, b_2, ...)."""
        params = list(self.cores)
        for bank in self.factors:
            for net in bank:
                params.extend(net.parameters())
        return params

    def n_parameters(self) -> int:
        return sum(p.size for p in self.parameters())

    def factor_parameter_count(self) -> int:
        return sum(net.n_parameters() for bank in self.factors for net in bank)


@dataclass
class TrainConfig:
    iterations: int = 3000
    lr: float = 1e-3
    weight_decay: float = 1e-6
    gamma: float = 0.0
    tv_interval: int = 1
    hidden_width: int = 128
    n_layers: int = 3
    omega: float = 30.0
    coupled: bool = True
    seed: int = 0
    log_every: int = 50
    level_max: int = 64
    segment_threshold: int = 256
    chunk_floats: int = 4_000_000


# ---------------------------------------------------------------------------
# engine: flattened multilinear forward/backward over all groups at once
# ---------------------------------------------------------------------------

class _Dataset:
    """Preprocessed point set for the engine.

    Points are normalized, then sorted by (group, level-combo). Every factor
    input dimension gets a table of unique values (per bank in uncoupled
    mode) and per-point indices into it, so nets only run on unique scalars.
    """

    def __init__(self, points_raw: np.ndarray, gid: np.ndarray, model: CRNLModel,
                 cfg: TrainConfig):
        k = model.n_dims
        pts = model.coord_map.normalize(np.asarray(points_raw, dtype=np.float64))
        if pts.ndim != 2 or pts.shape[1] != k:
            raise ValueError(f"points must be (n, {k})")
        gid = np.asarray(gid, dtype=np.int64)
        self.n = pts.shape[0]
        self.L = model.n_groups
        if gid.shape != (self.n,) or (self.n and (gid.min() < 0 or gid.max() >= self.L)):
            raise ValueError("bad group id array")
        self.k = k
        self.n_banks = 1 if model.coupled else self.L

        # classify dims: 0,1 always dense; later dims level when few uniques
        self.level_dims: list[int] = []
        self.dense_dims: list[int] = []
        uniques = [np.unique(pts[:, d]) for d in range(k)]
        for d in range(k):
            if d >= 2 and uniques[d].size <= cfg.level_max:
                self.level_dims.append(d)
            else:
                self.dense_dims.append(d)
        self.lvals = {d: uniques[d] for d in self.level_dims}
        self.dense_ranks = [model.ranks[d] for d in self.dense_dims]
        self.dense_size = int(np.prod(self.dense_ranks)) if self.dense_dims else 1
        self.strategy = "segment" if self.dense_size > cfg.segment_threshold else "flat"

        # level combo per point, mixed radix in ascending dim order
        combo = np.zeros(self.n, dtype=np.int64)
        self.n_combos = 1
        for d in self.level_dims:
            idx = np.searchsorted(self.lvals[d], pts[:, d])
            combo = combo * self.lvals[d].size + idx
            self.n_combos *= self.lvals[d].size

        order = np.lexsort((combo, gid))
        self.perm = order
        self.inv_perm = np.argsort(order)
        self.pts_s = pts[order]
        self.gid_s = gid[order]
        self.segkey_s = self.gid_s * self.n_combos + combo[order]
        self.seg_keys, self.seg_starts = np.unique(self.segkey_s, return_index=True)

        # dense tables: global uniques when coupled, per-group otherwise
        self.table_inputs: dict[int, np.ndarray] = {}
        self.table_ids_s: dict[int, np.ndarray] = {}
        self.bank_slices: dict[int, list[tuple[int, int]]] = {}
        grp_bounds = np.searchsorted(self.gid_s, np.arange(self.L + 1))
        for d in self.dense_dims:
            col = self.pts_s[:, d]
            if model.coupled:
                vals, ids = np.unique(col, return_inverse=True)
                self.table_inputs[d] = vals
                self.table_ids_s[d] = ids.astype(np.int64)
                self.bank_slices[d] = [(0, vals.size)]
            else:
                parts, ids, slices, off = [], np.empty(self.n, dtype=np.int64), [], 0
                for l in range(self.L):
                    lo, hi = grp_bounds[l], grp_bounds[l + 1]
                    vals, loc = np.unique(col[lo:hi], return_inverse=True)
                    # empty groups keep a 1-entry dummy table so every bank
                    # net still participates in the pass with zero gradient
                    if vals.size == 0:
                        vals = np.zeros(1)
                    parts.append(vals)
                    ids[lo:hi] = off + loc
                    slices.append((off, off + vals.size))
                    off += vals.size
                self.table_inputs[d] = np.concatenate(parts)
                self.table_ids_s[d] = ids
                self.bank_slices[d] = slices

        self.chunk = max(256, cfg.chunk_floats // max(self.dense_size, 1))


def _chain_forward(x0: np.ndarray, rows: list[np.ndarray]):
    """Contract x0 (n, r_0*r_1*...) with per-point row vectors, one dim at a
    time. Returns (pred (n,), stages) where stages[k] is the input to step k."""
    stages = [x0]
    x = x0
    for u in rows:
        n, r = u.shape
        x = np.matmul(u[:, None, :], x.reshape(n, r, -1))[:, 0]
        stages.append(x)
    return x[:, 0], stages


def _chain_backward(stages, rows, dpred):
    """Gradients of the chain: per-point row grads and d(x0)."""
    dx = dpred[:, None]
    drows = [None] * len(rows)
    for k in range(len(rows) - 1, -1, -1):
        u = rows[k]
        n, r = u.shape
        xin = stages[k].reshape(n, r, -1)
        drows[k] = np.matmul(xin, dx[:, :, None])[:, :, 0]
        dx = (u[:, :, None] * dx[:, None, :]).reshape(n, -1)
    return drows, dx


def _rank_letters(k: int) -> list[str]:
    return [chr(ord("a") + d) for d in range(k)]


def _precontract(model: CRNLModel, ds: _Dataset, ltabs: dict[int, np.ndarray]):
    """M[bank -> group, combo, dense ranks] = core x_level (factor rows)."""
    rl = _rank_letters(ds.k)
    lv = [chr(ord("A") + i) for i in range(len(ds.level_dims))]
    core_sub = "".join(rl)
    lev_subs = [f"{lv[i]}{rl[d]}" for i, d in enumerate(ds.level_dims)]
    out_sub = "".join(lv) + "".join(rl[d] for d in ds.dense_dims)
    if not ds.level_dims:
        m = np.stack(model.cores).reshape(ds.L, ds.dense_size)
        return m, None
    if model.coupled:
        expr = f"z{core_sub}," + ",".join(lev_subs) + f"->z{out_sub}"
        args = [np.stack(model.cores)] + [ltabs[d][0] for d in ds.level_dims]
        m = np.einsum(expr, *args, optimize=True)
    else:
        expr = f"{core_sub}," + ",".join(lev_subs) + f"->{out_sub}"
        m = np.stack([
            np.einsum(expr, model.cores[l], *[ltabs[d][l] for d in ds.level_dims],
                      optimize=True)
            for l in range(ds.L)
        ])
    return m.reshape(ds.L * ds.n_combos, ds.dense_size), expr


def _precontract_backward(model: CRNLModel, ds: _Dataset, ltabs, dm2d):
    """dM -> (dcores list, dltabs dict)."""
    rl = _rank_letters(ds.k)
    lv = [chr(ord("A") + i) for i in range(len(ds.level_dims))]
    core_sub = "".join(rl)
    out_sub = "".join(lv) + "".join(rl[d] for d in ds.dense_dims)
    lev_shape = [ds.lvals[d].size for d in ds.level_dims]
    dm = dm2d.reshape([ds.L] + lev_shape + ds.dense_ranks)
    if not ds.level_dims:
        dcores = [dm[l].reshape(model.ranks) for l in range(ds.L)]
        return dcores, {}
    dltabs = {d: np.zeros_like(ltabs[d]) for d in ds.level_dims}
    if model.coupled:
        cores = np.stack(model.cores)
        lev_subs = [f"{lv[i]}{rl[d]}" for i, d in enumerate(ds.level_dims)]
        expr = f"z{out_sub}," + ",".join(lev_subs) + f"->z{core_sub}"
        dcores_arr = np.einsum(expr, dm, *[ltabs[d][0] for d in ds.level_dims],
                               optimize=True)
        dcores = [dcores_arr[l] for l in range(ds.L)]
        for i, d in enumerate(ds.level_dims):
            others = [f"{lv[j]}{rl[e]}" for j, e in enumerate(ds.level_dims) if j != i]
            expr = f"z{out_sub},z{core_sub}" + ("," if others else "") + \
                ",".join(others) + f"->{lv[i]}{rl[d]}"
            args = [dm, cores] + [ltabs[e][0] for j, e in enumerate(ds.level_dims) if j != i]
            dltabs[d][0] = np.einsum(expr, *args, optimize=True)
    else:
        dcores = []
        lev_subs = [f"{lv[i]}{rl[d]}" for i, d in enumerate(ds.level_dims)]
        for l in range(ds.L):
            expr = f"{out_sub}," + ",".join(lev_subs) + f"->{core_sub}"
            dcores.append(np.einsum(expr, dm[l], *[ltabs[d][l] for d in ds.level_dims],
                                    optimize=True))
            for i, d in enumerate(ds.level_dims):
                others = [f"{lv[j]}{rl[e]}" for j, e in enumerate(ds.level_dims) if j != i]
                expr = f"{out_sub},{core_sub}" + ("," if others else "") + \
                    ",".join(others) + f"->{lv[i]}{rl[d]}"
                args = [dm[l], model.cores[l]] + \
                    [ltabs[e][l] for j, e in enumerate(ds.level_dims) if j != i]
                dltabs[d][l] = np.einsum(expr, *args, optimize=True)
    return dcores, dltabs


def _forward_tables(model: CRNLModel, ds: _Dataset, keep: bool):
    """Factor tables for every (dim, bank); caches kept for backward."""
    tabs, caches = {}, {}
    for d in range(ds.k):
        banks_t, banks_c = [], []
        if d in ds.lvals:
            inputs = [ds.lvals[d][:, None]] * ds.n_banks
        else:
            inputs = [ds.table_inputs[d][lo:hi, None] for lo, hi in ds.bank_slices[d]]
        for b in range(ds.n_banks):
            net = model.factors[b][d]
            out, cache = net.forward_cached(inputs[b], keep=keep)
            banks_t.append(out)
            banks_c.append(cache)
        if d in ds.lvals:
            tabs[d] = np.stack(banks_t)  # (n_banks, n_lev, r_d)
        else:
            tabs[d] = np.concatenate(banks_t, axis=0)  # (M_d, r_d)
        caches[d] = banks_c
    return tabs, caches


def _engine_pass(model: CRNLModel, ds: _Dataset, target: np.ndarray | None = None,
                 dpred_in: np.ndarray | None = None, need_grads: bool = True):
    """One full forward (and optional backward) over a dataset.

    target (original point order) -> squared-residual loss and its gradient;
    dpred_in (original point order) -> externally supplied output gradients.
    Returns (loss, preds in original order, grads aligned with
    model.parameters() or None).
    """
    tabs, caches = _forward_tables(model, ds, keep=need_grads)
    ltabs = {d: tabs[d] for d in ds.level_dims}
    m2d, _ = _precontract(model, ds, ltabs)

    preds_s = np.empty(ds.n)
    if need_grads:
        dm2d = np.zeros_like(m2d)
        drows_full = {d: np.empty((ds.n, model.ranks[d])) for d in ds.dense_dims}
    tgt_s = target[ds.perm] if target is not None else None
    dpred_s = dpred_in[ds.perm] if dpred_in is not None else None
    loss = 0.0

    def block_dpred(sl, pred_blk):
        nonlocal loss
        if tgt_s is not None:
            r = pred_blk - tgt_s[sl]
            loss += float(np.dot(r, r))
            return 2.0 * r
        if dpred_s is not None:
            return dpred_s[sl]
        return None

    if ds.strategy == "flat":
        for lo in range(0, ds.n, ds.chunk):
            hi = min(lo + ds.chunk, ds.n)
            sl = slice(lo, hi)
            x0 = m2d[ds.segkey_s[sl]]
            rows = [tabs[d][ds.table_ids_s[d][sl]] for d in ds.dense_dims]
            pred, stages = _chain_forward(x0, rows)
            preds_s[sl] = pred
            dp = block_dpred(sl, pred)
            if not need_grads or dp is None:
                continue
            drows, dx0 = _chain_backward(stages, rows, dp)
            for d, dr in zip(ds.dense_dims, drows):
                drows_full[d][sl] = dr
            # segkey_s is sorted, so keys are unique here and fancy += is safe
            keys, starts = np.unique(ds.segkey_s[sl], return_index=True)
            dm2d[keys] += np.add.reduceat(dx0, starts, axis=0)
    else:
        bounds = np.append(ds.seg_starts, ds.n)
        d0 = ds.dense_dims[0]
        rest_dims = ds.dense_dims[1:]
        r0 = model.ranks[d0]
        for si, key in enumerate(ds.seg_keys):
            lo, hi = bounds[si], bounds[si + 1]
            sl = slice(lo, hi)
            mslice = m2d[key].reshape(r0, -1)
            u0 = tabs[d0][ds.table_ids_s[d0][sl]]
            t1 = u0 @ mslice
            rows = [tabs[d][ds.table_ids_s[d][sl]] for d in rest_dims]
            pred, stages = _chain_forward(t1, rows)
            preds_s[sl] = pred
            dp = block_dpred(sl, pred)
            if not need_grads or dp is None:
                continue
            drows, dt1 = _chain_backward(stages, rows, dp)
            for d, dr in zip(rest_dims, drows):
                drows_full[d][sl] = dr
            drows_full[d0][sl] = dt1 @ mslice.T
            dm2d[key] += (u0.T @ dt1).reshape(-1)

    preds = preds_s[ds.inv_perm]
    if not need_grads:
        return loss if target is not None else None, preds, None

    # tables -> nets
    dcores, dltabs = _precontract_backward(model, ds, ltabs, dm2d)
    grads = list(dcores)
    net_grads: dict[tuple[int, int], list[np.ndarray]] = {}
    for d in range(ds.k):
        if d in ds.lvals:
            dtab = dltabs.get(d)
            if dtab is None:
                dtab = np.zeros_like(tabs[d])
            for b in range(ds.n_banks):
                dws, dbs = model.factors[b][d].backward(caches[d][b], dtab[b])
                net_grads[(b, d)] = [v for pair in zip(dws, dbs) for v in pair]
        else:
            dtab = np.zeros((ds.table_inputs[d].size, model.ranks[d]))
            ids = ds.table_ids_s[d]
            for r in range(model.ranks[d]):
                dtab[:, r] = np.bincount(ids, weights=drows_full[d][:, r],
                                         minlength=dtab.shape[0])
            for b, (blo, bhi) in enumerate(ds.bank_slices[d]):
                dws, dbs = model.factors[b][d].backward(caches[d][b], dtab[blo:bhi])
                net_grads[(b, d)] = [v for pair in zip(dws, dbs) for v in pair]
    for b in range(ds.n_banks):
        for d in range(ds.k):
            grads.extend(net_grads[(b, d)])
    return (loss if target is not None else None), preds, grads


# ---------------------------------------------------------------------------
# training / inference
# ---------------------------------------------------------------------------

def _model_coord_map(groups: list[GroupObservedSet], s_count: int,
                     grid: CubeGrid | None) -> CoordinateMap:
    """Input box of the factorized model: padded split extents when the cube
    grid is known, otherwise the bounding box of the group points; the s axis
    always spans [1, S]."""
    if grid is not None:
        lo = grid.domain.lo.copy()
        hi = grid.domain.hi.copy()
        end = grid.extent_end()
        lo[0], lo[1] = grid.origins
        hi[0], hi[1] = end
    else:
        pts = np.concatenate([g.points for g in groups if g.n_points], axis=0)
        if pts.size == 0:
            raise ValueError("all groups are empty")
        lo = pts[:, :-1].min(axis=0)
        hi = pts[:, :-1].max(axis=0)
    return CoordinateMap(np.append(lo, 1.0), np.append(hi, float(s_count)))


def _init_model(ranks, n_groups, coupled, coord_map, cfg: TrainConfig) -> CRNLModel:
    from .seeding import stream_seed
    rng = np.random.default_rng(np.random.SeedSequence(cfg.seed, spawn_key=(2, 0)))
    bound = float(np.prod(ranks)) ** -0.5
    cores = [rng.uniform(-bound, bound, size=tuple(ranks)) for _ in range(n_groups)]
    widths = lambda r: [1] + [cfg.hidden_width] * (cfg.n_layers - 1) + [int(r)]
    n_banks = 1 if coupled else n_groups
    factors = [
        [SineMLP(widths(r), omega=cfg.omega,
                 seed=stream_seed(cfg.seed, "init", 1 + b * len(ranks) + d))
         for d, r in enumerate(ranks)]
        for b in range(n_banks)
    ]
    return CRNLModel(tuple(ranks), cores, factors, coupled, coord_map)


def train(groups: list[GroupObservedSet], config: TrainConfig, ranks: tuple[int, ...],
          grid: CubeGrid | None = None, tv_axes: list[np.ndarray] | None = None,
          callback=None) -> CRNLModel:
    """Fit cores and factor networks to the group observed sets.

    ranks has one entry per group-set dimension (N data dims + the s axis).
    With config.gamma > 0 and tv_axes (native image axes) given, the TV of
    the reassembled key-cube prediction joins the loss every tv_interval
    iterations; this needs `grid` for the query-to-cube assignment.
    Deterministic given config.seed.
    """
    if not groups:
        raise ValueError("no groups")
    k = groups[0].points.shape[1] if groups[0].points.size else len(ranks)
    if len(ranks) != k:
        raise ValueError(f"{len(ranks)} ranks for {k}-dim group points")
    if config.iterations < 1:
        raise ValueError("iterations must be >= 1")
    s_count = max(int(g.points[:, -1].max()) if g.n_points else 1 for g in groups)
    coord_map = _model_coord_map(groups, s_count, grid)
    model = _init_model(ranks, len(groups), config.coupled, coord_map, config)

    pts = np.concatenate([g.points for g in groups], axis=0)
    gid = np.concatenate([np.full(g.n_points, i, dtype=np.int64)
                          for i, g in enumerate(groups)])
    vals = np.concatenate([g.values for g in groups])
    ds = _Dataset(pts, gid, model, config)

    use_tv = config.gamma > 0.0 and tv_axes is not None
    if use_tv:
        if grid is None:
            raise ValueError("TV needs the cube grid for query assignment")
        if len(tv_axes) != 3:
            raise ValueError("TV reassembly expects 3-way image grids")
        mesh = np.meshgrid(*tv_axes, indexing="ij")
        qpts = np.stack([m.ravel() for m in mesh], axis=-1)
        tv_gid = assign_key_cubes(grid, qpts)
        tv_pts = np.concatenate([qpts, np.ones((qpts.shape[0], 1))], axis=1)
        tv_shape = tuple(len(a) for a in tv_axes)
        tv_ds = _Dataset(tv_pts, tv_gid, model, config)

    opt = Adam(model.parameters(), lr=config.lr, weight_decay=config.weight_decay)
    for it in range(config.iterations):
        loss, _, grads = _engine_pass(model, ds, target=vals)
        if use_tv and it % config.tv_interval == 0:
            _, tv_pred, _ = _engine_pass(model, tv_ds, need_grads=False)
            tv_val, tv_sub = tv_norm(tv_pred.reshape(tv_shape))
            loss += config.gamma * tv_val
            _, _, tv_grads = _engine_pass(model, tv_ds,
                                          dpred_in=config.gamma * tv_sub.ravel())
            for g, tg in zip(grads, tv_grads):
                g += tg
        if not np.isfinite(loss):
            raise TrainingDiverged(f"training loss became non-finite at iteration {it}")
        opt.step(grads)
        if callback is not None and (it % config.log_every == 0
                                     or it == config.iterations - 1):
            callback(it, model, loss)
    return model


def evaluate(model: CRNLModel, l: int, v) -> float:
    """Group l's function at one raw point v (N+1 coords, last one is s).
    Reference implementation by successive mode contractions."""
    v = np.asarray(v, dtype=np.float64).ravel()
    if v.size != model.n_dims:
        raise ValueError(f"expected {model.n_dims} coordinates, got {v.size}")
    if not 0 <= l < model.n_groups:
        raise ValueError(f"group {l} out of range")
    q = model.coord_map.normalize(v)
    t = model.cores[l]
    for d in range(model.n_dims):
        u = model.bank(l)[d].forward(np.array([[q[d]]]))[0]
        t = np.tensordot(u, t, axes=([0], [0]))
    return float(t)


def evaluate_batch(model: CRNLModel, l: int, pts: np.ndarray) -> np.ndarray:
    """evaluate() over many raw points of one group, vectorized."""
    pts = np.atleast_2d(np.asarray(pts, dtype=np.float64))
    q = model.coord_map.normalize(pts)
    rows = [model.bank(l)[d].forward(q[:, d:d + 1]) for d in range(model.n_dims)]
    rl = _rank_letters(model.n_dims)
    expr = "".join(rl) + "," + ",".join(f"i{c}" for c in rl) + "->i"
    return np.einsum(expr, model.cores[l], *rows, optimize=True)


def predict_points(model: CRNLModel, grid: CubeGrid, points: np.ndarray,
                   cfg: TrainConfig | None = None) -> np.ndarray:
    """Model prediction at raw query points (N coords, no s): each point is
    clamped into the data box, assigned to its key cube, and queried at s=1."""
    cfg = cfg or TrainConfig()
    pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
    pts = grid.obs.coord_map.clamp(pts)
    gid = assign_key_cubes(grid, pts)
    full = np.concatenate([pts, np.ones((pts.shape[0], 1))], axis=1)
    ds = _Dataset(full, gid, model, cfg)
    _, preds, _ = _engine_pass(model, ds, need_grads=False)
    return preds


def infer(model: CRNLModel, grid: CubeGrid, axes: list[np.ndarray] | None = None) -> np.ndarray:
    """Reassembled prediction tensor on a native meshgrid: every grid node is
    queried in its own key cube at s=1 and written back to its position."""
    if axes is None:
        if grid.obs.grid_axes is None:
            raise ValueError("scattered data: pass explicit axes or use predict_points")
        axes = grid.obs.grid_axes
    mesh = np.meshgrid(*axes, indexing="ij")
    qpts = np.stack([m.ravel() for m in mesh], axis=-1)
    preds = predict_points(model, grid, qpts)
    return preds.reshape([len(a) for a in axes])


def random_model(seed: int, ranks: tuple[int, ...], n_groups: int,
                 hidden_width: int = 6, n_layers: int = 2, omega: float = 1.5,
                 weight_scale: float | None = None, bias: bool = True,
                 coupled: bool = True) -> CRNLModel:
    """Small random model on the identity box [-1,1]^K, for oracle checks.
    weight_scale rescales every layer so l1 norms stay in a range where the
    continuity bounds are numerically meaningful; bias=False builds the
    bias-free family the Lipschitz lemma is stated for."""
    rng = np.random.default_rng(seed)
    k = len(ranks)
    cmap = CoordinateMap(-np.ones(k), np.ones(k))
    bound = float(np.prod(ranks)) ** -0.5
    cores = [rng.uniform(-bound, bound, size=tuple(ranks)) for _ in range(n_groups)]
    widths = lambda r: [1] + [hidden_width] * (n_layers - 1) + [int(r)]
    n_banks = 1 if coupled else n_groups
    factors = [[SineMLP(widths(r), omega=omega, seed=int(rng.integers(2**31)),
                        bias=bias) for r in ranks] for _ in range(n_banks)]
    if weight_scale is not None:
        for bank in factors:
            for net in bank:
                for w in net.weights:
                    w *= weight_scale / max(np.abs(w).sum(), 1e-12)
    return CRNLModel(tuple(ranks), cores, factors, coupled, cmap)


# ---------------------------------------------------------------------------
# lemma oracles
# ---------------------------------------------------------------------------

def lipschitz_bound_check(model: CRNLModel, n_trials: int = 1000, seed: int = 0,
                          coord_range: float = 1.5) -> dict:
    """Empirical check of the cross-group continuity bound.

    For points differing in one coordinate d,
        |s_l1(..v') - s_l2(..v'')| <= delta1 |v'-v''| + delta2
    with delta1 = eta^(MN+M+1) * omega^((M-1)(N+1)) * xi^N and
    delta2 = 2 * eta^(MN+M+1) * omega^((M-1)(N+1)) * xi^(N+1), where xi is
    the max absolute coordinate involved, eta upper-bounds every core and
    weight-matrix l1 norm, and M is the factor depth. Same-group pairs must
    satisfy the tighter delta1-only bound (no delta2 term).

    The bound holds for bias-free factor networks (f(0)=0 is used for the
    output bound; biases cancel in the difference chain), so this check
    refuses models with nonzero biases. Requires a coupled model.
    """
    if not model.coupled:
        raise ValueError("the continuity bound is stated for shared (coupled) factors")
    bank = model.factors[0]
    for net in bank:
        if any(np.any(b != 0.0) for b in net.biases):
            raise ValueError("bound requires bias-free factor networks")
    depths = {net.n_layers for net in bank}
    omegas = {net.omega for net in bank}
    if len(depths) != 1 or len(omegas) != 1:
        raise ValueError("factor networks must share depth and omega")
    m_depth = depths.pop()
    omega = omegas.pop()
    k = model.n_dims
    n = k - 1
    eta = max(max(l1_norm(c) for c in model.cores),
              max(np.abs(w).sum() for net in bank for w in net.weights))
    coef = eta ** (m_depth * n + m_depth + 1) * omega ** ((m_depth - 1) * k)

    rng = np.random.default_rng(seed)
    violations = 0
    max_ratio = 0.0
    intra = 0
    for _ in range(n_trials):
        d = int(rng.integers(k))
        l1, l2 = int(rng.integers(model.n_groups)), int(rng.integers(model.n_groups))
        base = rng.uniform(-coord_range, coord_range, size=k)
        va, vb = base.copy(), base.copy()
        va[d] = rng.uniform(-coord_range, coord_range)
        vb[d] = rng.uniform(-coord_range, coord_range)
        xi = max(float(np.max(np.abs(np.delete(base, d)))), abs(va[d]), abs(vb[d]))
        lhs = abs(evaluate(model, l1, va) - evaluate(model, l2, vb))
        rhs = coef * xi ** n * abs(va[d] - vb[d])
        if l1 != l2:
            rhs += 2.0 * coef * xi ** (n + 1)
        else:
            intra += 1
        ratio = lhs / rhs if rhs > 0 else (np.inf if lhs > 0 else 0.0)
        max_ratio = max(max_ratio, ratio)
        if lhs > rhs * (1 + 1e-12):
            violations += 1
    return {
        "trials": n_trials,
        "intra_group_trials": intra,
        "violations": violations,
        "max_ratio": max_ratio,
        "eta": eta,
        "depth": m_depth,
        "omega": omega,
    }


def frank_bound_check(model: CRNLModel, grid_sizes: tuple[int, ...] | None = None,
                      n_trials: int = 10, seed: int = 0, tol: float = 1e-8) -> dict:
    """Empirical check that any meshgrid sampling of a group's function has
    per-mode numerical rank at most the model ranks (functional low-rankness).
    Samples random strictly-increasing coordinates inside the model box."""
    k = model.n_dims
    sizes = grid_sizes or tuple(min(int(r) + 3, 9) for r in model.ranks)
    if len(sizes) != k:
        raise ValueError(f"need {k} grid sizes")
    rng = np.random.default_rng(seed)
    lo, hi = model.coord_map.lo, model.coord_map.hi
    violations = 0
    worst = None
    for _ in range(n_trials):
        l = int(rng.integers(model.n_groups))
        axes = [np.sort(rng.uniform(lo[d], hi[d] if hi[d] > lo[d] else lo[d] + 1.0,
                                    size=sizes[d])) for d in range(k)]
        mesh = np.meshgrid(*axes, indexing="ij")
        pts = np.stack([m.ravel() for m in mesh], axis=-1)
        tensor = evaluate_batch(model, l, pts).reshape(sizes)
        got = numerical_tucker_rank(tensor, tol=tol)
        if any(g > r for g, r in zip(got, model.ranks)):
            violations += 1
            worst = got
    return {"trials": n_trials, "violations": violations,
            "ranks": list(model.ranks), "worst_observed": list(worst) if worst else None}


# ---------------------------------------------------------------------------
# checkpoints
# ---------------------------------------------------------------------------
# JSON layout: ranks, coupled, normalization lo/hi, cores (nested lists,
# group-major), factors (bank-major list of net checkpoints).

def model_to_dict(model: CRNLModel) -> dict:
    return {
        "ranks": list(model.ranks),
        "coupled": model.coupled,
        "normalization": {"lo": model.coord_map.lo.tolist(),
                          "hi": model.coord_map.hi.tolist()},
        "cores": [c.tolist() for c in model.cores],
        "factors": [[net_to_dict(net) for net in bank] for bank in model.factors],
    }


def model_from_dict(doc: dict) -> CRNLModel:
    cmap = CoordinateMap(np.asarray(doc["normalization"]["lo"], dtype=np.float64),
                         np.asarray(doc["normalization"]["hi"], dtype=np.float64))
    cores = [np.asarray(c, dtype=np.float64) for c in doc["cores"]]
    factors = [[net_from_dict(d) for d in bank] for bank in doc["factors"]]
    return CRNLModel(tuple(doc["ranks"]), cores, factors, bool(doc["coupled"]), cmap)


def save_model_checkpoint(model: CRNLModel, path: str) -> None:
    with open(path, "w") as fh:
        json.dump(model_to_dict(model), fh)


def load_model_checkpoint(path: str) -> CRNLModel:
    with open(path) as fh:
        return model_from_dict(json.load(fh))
