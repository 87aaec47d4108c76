import numpy as np
import pytest

from crnl.grouping import (GroupIndex, assign_key_cubes, build_group_sets,
                           cube_distance, split_domain, top_s_similar)
from crnl.inr import ObservedSet
from crnl.nets import SineMLP
from crnl.oracles import _brute_force_groups, check_grouping


def grid_obs(n1, n2, bands=2, seed=0):
    tensor = np.random.default_rng(seed).uniform(size=(n1, n2, bands))
    return ObservedSet.from_grid(tensor)


def scattered_obs(n=300, seed=0):
    rng = np.random.default_rng(seed)
    pts = rng.uniform(size=(n, 2))
    return ObservedSet.from_points(pts, rng.standard_normal(n))


def small_net(in_dim, seed=1):
    return SineMLP([in_dim, 8, 1], omega=2.0, seed=seed)


def test_candidate_and_key_counts_5x5_p2():
    """5x5 units with p=2: stride-1 candidates on the raw grid, stride-p keys
    on the padded (6x6) grid."""
    _, grid = split_domain(grid_obs(5, 5), 5, 5, p=2)
    assert grid.n_candidates == 16
    assert grid.n_keys == 9
    assert grid.n_padded == (6, 6)


def test_candidate_and_key_counts_4x4_p2():
    _, grid = split_domain(grid_obs(4, 4), 4, 4, p=2)
    assert grid.n_candidates == 9
    assert grid.n_keys == 4
    assert grid.n_padded == (4, 4)


def test_candidate_ids_row_major():
    _, grid = split_domain(grid_obs(5, 5), 5, 5, p=2)
    assert grid.candidate_origin(0) == (0, 0)
    assert grid.candidate_origin(1) == (0, 1)
    assert grid.candidate_origin(4) == (1, 0)
    assert grid.candidate_id(3, 2) == 3 * 4 + 2
    assert grid.key_origin(0) == (0, 0)
    assert grid.key_origin(1) == (0, 2)
    assert grid.key_origin(3) == (2, 0)


def test_grid_split_requires_native_units():
    with pytest.raises(ValueError):
        split_domain(grid_obs(5, 5), 4, 4, p=2)


def test_p_larger_than_units_rejected():
    with pytest.raises(ValueError):
        split_domain(scattered_obs(), 3, 3, p=4)


def test_distance_properties():
    obs = grid_obs(6, 6)
    _, grid = split_domain(obs, 6, 6, p=2)
    f = small_net(3)
    assert cube_distance(f, grid, (1, 2), (1, 2)) == 0.0
    d_ab = cube_distance(f, grid, (0, 0), (3, 2))
    assert d_ab == cube_distance(f, grid, (3, 2), (0, 0))
    assert d_ab > 0

    const = SineMLP([3, 4, 1], omega=1.0, seed=0)
    for w in const.weights:
        w[:] = 0.0
    const.biases[-1][:] = 0.4
    assert cube_distance(const, grid, (0, 0), (3, 2)) == 0.0


def test_top_s_matches_brute_force_meshgrid():
    report = check_grouping(seed=3)
    assert report["passed"], report


def test_top_s_matches_brute_force_scattered():
    obs = scattered_obs(400, seed=4)
    _, grid = split_domain(obs, 8, 8, p=2)
    f = small_net(2, seed=5)
    S = 5
    index = top_s_similar(f, grid, S)
    for got, want in zip(index.groups, _brute_force_groups(f, grid, S)):
        for e, (cid, origin, dist, offset) in zip(got, want):
            assert e.cand_id == cid
            assert tuple(e.unit_origin) == tuple(origin)
            assert e.distance == dist
            assert tuple(e.offset) == tuple(offset)


def test_top_s_is_one_keeps_only_key():
    obs = grid_obs(4, 4)
    _, grid = split_domain(obs, 4, 4, p=2)
    index = top_s_similar(small_net(3), grid, 1)
    for l, entries in enumerate(index.groups):
        assert len(entries) == 1
        assert entries[0].distance == 0.0
        assert tuple(entries[0].unit_origin) == grid.key_origin(l)


def test_tie_break_prefers_smaller_candidate_id():
    obs = grid_obs(4, 4)
    _, grid = split_domain(obs, 4, 4, p=2)
    const = SineMLP([3, 4, 1], omega=1.0, seed=0)
    for w in const.weights:
        w[:] = 0.0
    index = top_s_similar(const, grid, 4)
    # all distances tie at 0; after the key itself, lowest candidate ids win
    entries = index.groups[0]
    assert entries[0].cand_id == grid.candidate_id(0, 0)
    assert [e.cand_id for e in entries[1:]] == [1, 2, 3]


def test_s_out_of_range():
    obs = grid_obs(4, 4)
    _, grid = split_domain(obs, 4, 4, p=2)
    with pytest.raises(ValueError):
        top_s_similar(small_net(3), grid, 0)
    with pytest.raises(ValueError):
        top_s_similar(small_net(3), grid, 10)


def test_padded_key_cube_has_sentinel_candidate_id():
    obs = grid_obs(5, 5)
    _, grid = split_domain(obs, 5, 5, p=2)
    index = top_s_similar(small_net(3), grid, 3)
    # key 8 sits at padded origin (4, 4); a 2x2 cube there leaves the raw grid
    assert grid.key_origin(8) == (4, 4)
    assert index.groups[8][0].cand_id == -1
    assert index.groups[8][0].distance == 0.0


def test_group_sets_cover_each_cube_with_s_tags():
    tensor = np.random.default_rng(7).uniform(size=(4, 4, 2))
    obs = ObservedSet.from_grid(tensor)
    _, grid = split_domain(obs, 4, 4, p=2)
    S = 3
    index = top_s_similar(small_net(3, seed=8), grid, S)
    groups = build_group_sets(obs, index)
    assert len(groups) == grid.n_keys
    for l, g in enumerate(groups):
        # every selected cube contributes its full 2x2x2 block of samples
        assert g.n_points == S * 2 * 2 * 2
        np.testing.assert_array_equal(np.unique(g.points[:, -1]),
                                      np.arange(1, S + 1))
        # s = 1 rows are exactly the key cube's own samples, untranslated
        own = g.points[g.points[:, -1] == 1.0]
        ki, kj = grid.key_origin(l)
        assert own[:, 0].min() == ki and own[:, 0].max() == ki + 1
        assert own[:, 1].min() == kj and own[:, 1].max() == kj + 1


def test_group_sets_remap_values_not_coordinates():
    """A translated cube keeps its own values; coordinates shift onto the key
    cube's footprint."""
    tensor = np.random.default_rng(9).uniform(size=(4, 4, 1))
    obs = ObservedSet.from_grid(tensor)
    _, grid = split_domain(obs, 4, 4, p=2)
    index = top_s_similar(small_net(3, seed=10), grid, 2)
    groups = build_group_sets(obs, index)
    for l, g in enumerate(groups):
        entry = index.groups[l][1]  # the s=2 cube
        rows = g.points[g.points[:, -1] == 2.0]
        vals = g.values[g.points[:, -1] == 2.0]
        ci, cj = entry.unit_origin
        block = tensor[ci:ci + 2, cj:cj + 2, :]
        assert np.sort(vals).tolist() == np.sort(block.ravel()).tolist()
        ki, kj = grid.key_origin(l)
        assert rows[:, 0].min() == ki and rows[:, 1].min() == kj


def test_assign_key_cubes_units_and_edges():
    obs = grid_obs(4, 4)
    _, grid = split_domain(obs, 4, 4, p=2)
    pts = np.array([[0.0, 0.0, 0.0], [1.9, 1.9, 1.0], [2.0, 0.5, 0.0],
                    [3.0, 3.0, 1.0]])
    np.testing.assert_array_equal(assign_key_cubes(grid, pts), [0, 0, 2, 3])


def test_index_json_round_trip():
    obs = grid_obs(5, 5)
    _, grid = split_domain(obs, 5, 5, p=2)
    index = top_s_similar(small_net(3, seed=11), grid, 4)
    back = GroupIndex.from_json(index.to_json())
    assert back.p == index.p and back.S == index.S
    assert len(back.groups) == len(index.groups)
    for a, b in zip(index.groups, back.groups):
        for ea, eb in zip(a, b):
            assert ea.cand_id == eb.cand_id
            assert tuple(ea.unit_origin) == tuple(eb.unit_origin)
            assert ea.distance == eb.distance
            assert tuple(ea.offset) == tuple(eb.offset)
