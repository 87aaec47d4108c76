"""Built-in verification routines.

Each check here recomputes a property through an independent route: algebra
identities against einsum, analytic gradients against central differences,
the rank and continuity bounds of the factorized representation against
brute-force evaluation, and the similarity grouping against an exhaustive
pairwise sort. run_oracles() bundles them for the CLI; the test suite calls
the individual checks with its own budgets.
"""

from __future__ import annotations

import numpy as np

from .grouping import CubeGrid, cube_distance, split_domain, top_s_similar
from .inr import ObservedSet
from .model import (TrainConfig, _Dataset, _engine_pass, frank_bound_check,
                    lipschitz_bound_check, random_model)
from .nets import SineMLP
from .regularizers import tv_norm
from .tensor_ops import fold, mode_product, unfold

__all__ = [
    "finite_difference_check",
    "check_tensor_ops",
    "check_gradients",
    "check_rank_bound",
    "check_continuity_bound",
    "check_grouping",
    "run_oracles",
]


def finite_difference_check(loss_fn, params: list[np.ndarray],
                            n_probes: int = 20, eps: float = 1e-6,
                            seed: int = 0) -> float:
    """Max relative error between analytic and central-difference gradients.

    loss_fn() -> (loss, grads) must recompute from the current parameter
    values; grads aligned with params. Probes n_probes random entries."""
    rng = np.random.default_rng(seed)
    _, grads = loss_fn()
    sizes = np.array([p.size for p in params])
    if sizes.sum() == 0:
        raise ValueError("no parameters to probe")
    worst = 0.0
    for _ in range(n_probes):
        k = int(rng.integers(len(params)))
        if params[k].size == 0:
            continue
        i = int(rng.integers(params[k].size))
        orig = params[k].flat[i]
        params[k].flat[i] = orig + eps
        up, _ = loss_fn()
        params[k].flat[i] = orig - eps
        dn, _ = loss_fn()
        params[k].flat[i] = orig
        fd = (up - dn) / (2.0 * eps)
        an = grads[k].flat[i]
        rel = abs(fd - an) / max(abs(fd), abs(an), 1e-8)
        worst = max(worst, float(rel))
    return worst


def check_tensor_ops(n_trials: int = 20, seed: int = 0) -> dict:
    """fold/unfold round trips and mode products vs direct einsum."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n_trials):
        ndim = int(rng.integers(2, 5))
        shape = tuple(int(s) for s in rng.integers(2, 6, size=ndim))
        x = rng.standard_normal(shape)
        for mode in range(1, ndim + 1):
            back = fold(unfold(x, mode), mode, shape)
            worst = max(worst, float(np.abs(back - x).max()))
            r = int(rng.integers(1, 5))
            a = rng.standard_normal((r, shape[mode - 1]))
            got = mode_product(x, a, mode)
            want = np.tensordot(a, x, axes=([1], [mode - 1]))
            want = np.moveaxis(want, 0, mode - 1)
            worst = max(worst, float(np.abs(got - want).max()))
    return {"passed": worst < 1e-12, "max_abs_error": worst,
            "trials": n_trials}


def _net_loss_fn(net: SineMLP, x: np.ndarray, y: np.ndarray):
    def fn():
        pred, cache = net.forward_cached(x)
        resid = pred[:, 0] - y
        loss = float(np.dot(resid, resid))
        dws, dbs = net.backward(cache, (2.0 * resid)[:, None])
        grads = []
        for w, b in zip(dws, dbs):
            grads.append(w)
            grads.append(b)
        return loss, grads
    return fn


def _model_loss_fn(model, ds, target):
    def fn():
        loss, _, grads = _engine_pass(model, ds, target=target)
        return loss, grads
    return fn


def check_gradients(seed: int = 0, tol: float = 1e-4) -> dict:
    """Backprop vs central differences for the coordinate network and for
    the factorization training loss (both grouping strategies)."""
    rng = np.random.default_rng(seed)
    errors = {}

    net = SineMLP([2, 8, 8, 1], omega=2.0, seed=seed)
    x = rng.uniform(-1, 1, size=(12, 2))
    y = rng.standard_normal(12)
    errors["net"] = finite_difference_check(
        _net_loss_fn(net, x, y), net.parameters(), n_probes=30, seed=seed)

    for label, ranks, coupled, seg in (("model_flat", (2, 3, 2), True, 10 ** 9),
                                       ("model_segment", (2, 3, 2), True, 1),
                                       ("model_uncoupled", (2, 2, 2), False,
                                        10 ** 9)):
        model = random_model(seed + 1, ranks, n_groups=3, omega=1.5,
                             coupled=coupled)
        pts = rng.uniform(-0.9, 0.9, size=(30, len(ranks)))
        pts[:, -1] = rng.integers(1, 4, size=30)
        gid = rng.integers(0, 3, size=30).astype(np.int64)
        target = rng.standard_normal(30)
        cfg = TrainConfig(segment_threshold=seg)
        ds = _Dataset(pts, gid, model, cfg)
        errors[label] = finite_difference_check(
            _model_loss_fn(model, ds, target), model.parameters(),
            n_probes=30, seed=seed + 2)

    # subgradient of the TV term on a monotone ramp: adjacent differences
    # along both penalized modes stay > 0.4, so the eps stencil never
    # straddles a kink. Probes the boundary entries, whose subgradient is
    # structurally nonzero; interior entries cancel to exactly zero and
    # relative error is meaningless there (FD noise over a zero gradient).
    row = np.cumsum(rng.uniform(0.5, 1.5, size=5))
    col = np.cumsum(rng.uniform(0.5, 1.5, size=6))
    spread = (row[:, None, None] + col[None, :, None]
              + 0.01 * rng.standard_normal((5, 6, 3)))
    _, g_tv = tv_norm(spread)
    eps = 1e-6
    worst_tv = 0.0
    for i in np.flatnonzero(np.abs(g_tv) > 0.5):
        orig = spread.flat[i]
        spread.flat[i] = orig + eps
        up, _ = tv_norm(spread)
        spread.flat[i] = orig - eps
        dn, _ = tv_norm(spread)
        spread.flat[i] = orig
        fd = (up - dn) / (2.0 * eps)
        an = g_tv.flat[i]
        worst_tv = max(worst_tv, abs(fd - an) / max(abs(fd), abs(an)))
    errors["tv"] = float(worst_tv)

    worst = max(errors.values())
    return {"passed": bool(worst < tol), "max_rel_error": worst,
            "errors": errors, "tolerance": tol}


def check_rank_bound(n_models: int = 50, grids_per_model: int = 3,
                     seed: int = 0) -> dict:
    """Meshgrid samples of every group function must have numerical Tucker
    rank bounded by the prescribed ranks, model by model."""
    rng = np.random.default_rng(seed)
    rank_pool = [(2, 2, 2), (3, 2, 4), (2, 4, 3), (2, 2, 3, 2), (4, 3, 2)]
    violations = 0
    checked = 0
    for i in range(n_models):
        ranks = rank_pool[int(rng.integers(len(rank_pool)))]
        model = random_model(seed + 1000 + i, ranks,
                             n_groups=int(rng.integers(1, 4)),
                             coupled=bool(rng.integers(2)))
        rep = frank_bound_check(model, n_trials=grids_per_model,
                                seed=seed + i)
        violations += rep["violations"]
        checked += rep["trials"]
    return {"passed": violations == 0, "models": n_models,
            "grids": checked, "violations": violations}


def check_continuity_bound(n_trials: int = 10000, n_models: int = 25,
                           seed: int = 0) -> dict:
    """Random probes of the two continuity bounds (same group and across
    groups) on bias-free models; zero tolerance for violations."""
    rank_pool = [(2, 2, 2), (3, 2, 2), (2, 3, 4), (2, 2, 2, 2)]
    per_model = -(-n_trials // n_models)
    rng = np.random.default_rng(seed)
    total = {"trials": 0, "intra_group_trials": 0, "violations": 0,
             "max_ratio": 0.0}
    for i in range(n_models):
        ranks = rank_pool[int(rng.integers(len(rank_pool)))]
        model = random_model(seed + 500 + i, ranks, n_groups=3,
                             omega=float(rng.uniform(0.5, 2.5)),
                             weight_scale=float(rng.uniform(0.6, 1.2)),
                             bias=False)
        rep = lipschitz_bound_check(model, n_trials=per_model, seed=seed + i)
        total["trials"] += rep["trials"]
        total["intra_group_trials"] += rep["intra_group_trials"]
        total["violations"] += rep["violations"]
        total["max_ratio"] = max(total["max_ratio"], rep["max_ratio"])
    total["passed"] = (total["violations"] == 0
                       and total["intra_group_trials"] > 0)
    total["models"] = n_models
    return total


def _brute_force_groups(f: SineMLP, grid: CubeGrid, S: int):
    """Exhaustive reference for top_s_similar: pairwise distances through
    the public one-pair routine, full sort, key cube forced first."""
    expected = []
    for l in range(grid.n_keys):
        key_origin = grid.key_origin(l)
        dists = [cube_distance(f, grid, key_origin, grid.candidate_origin(t))
                 for t in range(grid.n_candidates)]
        order = sorted(range(grid.n_candidates), key=lambda t: (dists[t], t))
        i, j = key_origin
        in_range = i <= grid.n_units[0] - grid.p and j <= grid.n_units[1] - grid.p
        self_id = grid.candidate_id(i, j) if in_range else -1
        entries = [(self_id, key_origin, 0.0, (0.0, 0.0))]
        for t in order:
            if len(entries) == S:
                break
            if t == self_id:
                continue
            oi, oj = grid.candidate_origin(t)
            entries.append((t, (oi, oj), dists[t],
                            ((i - oi) * grid.deltas[0],
                             (j - oj) * grid.deltas[1])))
        expected.append(entries)
    return expected


def check_grouping(seed: int = 0) -> dict:
    """top_s_similar against the exhaustive pairwise sort on a 6x6 grid."""
    rng = np.random.default_rng(seed)
    tensor = rng.uniform(0.0, 1.0, size=(6, 6, 2))
    obs = ObservedSet.from_grid(tensor)
    _, grid = split_domain(obs, 6, 6, p=2)
    f = SineMLP([3, 8, 1], omega=2.0, seed=seed + 1)
    S = 7
    index = top_s_similar(f, grid, S)
    expected = _brute_force_groups(f, grid, S)

    mismatches = 0
    for got, want in zip(index.groups, expected):
        if len(got) != len(want):
            mismatches += 1
            continue
        for e, (cid, origin, dist, offset) in zip(got, want):
            same = (e.cand_id == cid
                    and tuple(e.unit_origin) == tuple(origin)
                    and tuple(e.offset) == tuple(offset)
                    and e.distance == dist)
            if not same:
                mismatches += 1
    return {"passed": mismatches == 0, "keys": grid.n_keys,
            "candidates": grid.n_candidates, "mismatches": mismatches}


def run_oracles(fast: bool = False, seed: int = 0) -> dict:
    """All checks; fast=True shrinks the random-probe budgets."""
    checks = {
        "tensor_ops": check_tensor_ops(seed=seed),
        "gradients": check_gradients(seed=seed),
        "rank_bound": check_rank_bound(
            n_models=10 if fast else 50, seed=seed),
        "continuity_bound": check_continuity_bound(
            n_trials=1000 if fast else 10000,
            n_models=5 if fast else 25, seed=seed),
        "grouping": check_grouping(seed=seed),
    }
    return {"passed": all(c["passed"] for c in checks.values()),
            "checks": checks}
