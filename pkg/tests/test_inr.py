import numpy as np
import pytest

from crnl.inr import (CoordinateMap, FitConfig, ObservedSet, evaluate_grid,
                      fit_inr)

FAST = FitConfig(iterations=120, hidden_width=32, omega=5.0, seed=0,
                 log_every=10)


def test_coordinate_map_round_trip():
    cmap = CoordinateMap(np.array([0.0, -2.0]), np.array([4.0, 2.0]))
    pts = np.array([[0.0, -2.0], [4.0, 2.0], [2.0, 0.0]])
    normed = cmap.normalize(pts)
    np.testing.assert_allclose(normed, [[-1, -1], [1, 1], [0, 0]], atol=1e-15)
    np.testing.assert_allclose(cmap.denormalize(normed), pts, atol=1e-12)


def test_coordinate_map_degenerate_dim():
    cmap = CoordinateMap(np.array([1.0, 0.0]), np.array([1.0, 2.0]))
    normed = cmap.normalize(np.array([[1.0, 1.0]]))
    assert normed[0, 0] == 0.0


def test_coordinate_map_clamp():
    cmap = CoordinateMap(np.array([0.0]), np.array([1.0]))
    np.testing.assert_allclose(cmap.clamp(np.array([[-3.0], [0.4], [9.0]])),
                               [[0.0], [0.4], [1.0]])


def test_observed_set_from_grid_full_and_masked():
    tensor = np.arange(24, dtype=np.float64).reshape(2, 3, 4)
    obs = ObservedSet.from_grid(tensor)
    assert obs.n_points == 24 and obs.n_dims == 3
    assert obs.grid_shape == (2, 3, 4)
    # coordinates span the native index grid
    np.testing.assert_array_equal(obs.coord_map.lo, [0, 0, 0])
    np.testing.assert_array_equal(obs.coord_map.hi, [1, 2, 3])

    mask = np.zeros_like(tensor, dtype=bool)
    mask[1, 2, 3] = True
    masked = ObservedSet.from_grid(tensor, mask)
    assert masked.n_points == 1
    np.testing.assert_array_equal(masked.points, [[1, 2, 3]])
    assert masked.values[0] == 23.0
    # the coordinate box still covers the full grid, not just observed entries
    np.testing.assert_array_equal(masked.coord_map.hi, [1, 2, 3])


def test_observed_set_rejects_empty_and_nonfinite():
    with pytest.raises(ValueError):
        ObservedSet.from_points(np.zeros((0, 2)), np.zeros(0))
    with pytest.raises(ValueError):
        ObservedSet.from_points(np.array([[0.0, np.nan]]), np.array([1.0]))
    with pytest.raises(ValueError):
        ObservedSet.from_grid(np.ones((2, 2)), np.zeros((2, 2), dtype=bool))


def test_fit_constant_function():
    rng = np.random.default_rng(0)
    pts = rng.uniform(size=(200, 2))
    vals = np.full(200, 0.7)
    obs = ObservedSet.from_points(pts, vals)
    net = fit_inr(obs, FitConfig(iterations=500, hidden_width=32, omega=5.0,
                                 seed=0))
    pred = net.forward(obs.coord_map.normalize(pts))[:, 0]
    assert np.sqrt(np.mean((pred - 0.7) ** 2)) < 1e-2


def test_fit_loss_trend_and_callback():
    rng = np.random.default_rng(1)
    pts = rng.uniform(size=(300, 2))
    vals = np.sin(3 * pts[:, 0]) + pts[:, 1]
    obs = ObservedSet.from_points(pts, vals)
    seen = []
    fit_inr(obs, FAST, callback=lambda it, net, loss: seen.append((it, loss)))
    iters = [it for it, _ in seen]
    losses = [l for _, l in seen]
    assert iters[0] == 0 and iters[-1] == FAST.iterations - 1
    assert all(np.isfinite(losses))
    assert losses[-1] < 0.5 * losses[0]


def test_fit_deterministic():
    rng = np.random.default_rng(2)
    pts = rng.uniform(size=(100, 2))
    vals = pts[:, 0] * pts[:, 1]
    obs = ObservedSet.from_points(pts, vals)
    n1 = fit_inr(obs, FAST)
    n2 = fit_inr(obs, FAST)
    for a, b in zip(n1.parameters(), n2.parameters()):
        np.testing.assert_array_equal(a, b)


def test_evaluate_grid_matches_pointwise():
    rng = np.random.default_rng(3)
    tensor = rng.uniform(size=(5, 6, 2))
    obs = ObservedSet.from_grid(tensor)
    net = fit_inr(obs, FitConfig(iterations=5, hidden_width=16, seed=1))
    out = evaluate_grid(net, obs.grid_axes, obs.coord_map, max_batch=7)
    assert out.shape == (5, 6, 2)
    mesh = np.meshgrid(*obs.grid_axes, indexing="ij")
    pts = np.stack([m.ravel() for m in mesh], axis=-1)
    direct = net.forward(obs.coord_map.normalize(pts))[:, 0].reshape(5, 6, 2)
    # chunked BLAS may round differently from one full-batch call
    np.testing.assert_allclose(out, direct, atol=1e-12)


def test_tv_term_changes_training():
    tensor = np.random.default_rng(4).uniform(size=(8, 8, 2))
    mask = np.ones_like(tensor, dtype=bool)
    obs = ObservedSet.from_grid(tensor, mask)
    plain = fit_inr(obs, FitConfig(iterations=40, hidden_width=16, seed=2))
    tv = fit_inr(obs, FitConfig(iterations=40, hidden_width=16, seed=2,
                                gamma=0.1, tv_interval=1))
    assert any(np.abs(a - b).max() > 0
               for a, b in zip(plain.parameters(), tv.parameters()))
