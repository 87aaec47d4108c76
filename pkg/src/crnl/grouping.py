"""Continuous cube splitting and nonlocal similarity grouping.

The first two coordinate dimensions of the observed domain are split into
n_1 x n_2 half-open units of side delta_d; a cube is a p x p block of units
spanning the full extent of every remaining dimension. Candidate cubes slide
with stride 1 inside the original unit grid (T = (n_1-p+1)(n_2-p+1) of them);
key cubes tile the grid with stride p after the unit counts are padded up to
multiples of p (L = (n_1'/p)(n_2'/p)). Padding replicates the boundary: any
lattice position past the data extent is clamped onto it before the fitted
representation is evaluated, which on meshgrid data equals edge replication.

Cube similarity is the sum of squared differences of the representation at
one-to-one corresponding lattice positions. Each key cube collects itself
(s = 1, distance 0) plus its S-1 nearest candidates, ties broken by smaller
candidate id (row-major over origins). Observed points of a selected cube are
translated onto the key cube by the per-cube origin offset and tagged with
their similarity index s, giving the group's training set in R^(N+1).
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .inr import ObservedSet, SineMLP

__all__ = [
    "Domain",
    "CubeGrid",
    "GroupEntry",
    "GroupIndex",
    "GroupObservedSet",
    "split_domain",
    "cube_distance",
    "top_s_similar",
    "build_group_sets",
    "assign_key_cubes",
]


@dataclass
class Domain:
    """Per-dimension raw-coordinate bounds of the observed data."""

    lo: np.ndarray
    hi: np.ndarray

    @property
    def n_dims(self) -> int:
        return self.lo.size


class CubeGrid:
    """Geometry of the unit split plus the sampling spec for cube distances."""

    def __init__(self, obs: ObservedSet, n_units: tuple[int, int], p: int,
                 samples_per_unit: int = 1, distance_other_samples: int = 3,
                 distance_other_max: int = 8):
        n1, n2 = int(n_units[0]), int(n_units[1])
        if p < 1:
            raise ValueError("cube size p must be >= 1")
        if n1 < p or n2 < p:
            raise ValueError(f"cube size p={p} exceeds unit counts ({n1}, {n2})")
        if samples_per_unit < 1:
            raise ValueError("samples_per_unit must be >= 1")
        if obs.n_dims < 2:
            raise ValueError("cube splitting needs at least 2 coordinate dims")
        self.obs = obs
        self.p = int(p)
        self.n_units = (n1, n2)
        self.samples_per_unit = int(samples_per_unit)
        self.distance_other_samples = int(distance_other_samples)
        self.distance_other_max = int(distance_other_max)
        self.on_grid = obs.grid_axes is not None

        lo = obs.coord_map.lo.copy()
        hi = obs.coord_map.hi.copy()
        self.domain = Domain(lo=lo, hi=hi)
        if self.on_grid:
            if (n1, n2) != obs.grid_shape[:2]:
                raise ValueError("meshgrid data splits one unit per sample: "
                                 f"expected units {obs.grid_shape[:2]}, got {(n1, n2)}")
            self.deltas = np.array([
                obs.grid_axes[0][1] - obs.grid_axes[0][0] if n1 > 1 else 1.0,
                obs.grid_axes[1][1] - obs.grid_axes[1][0] if n2 > 1 else 1.0,
            ])
        else:
            span = hi[:2] - lo[:2]
            if np.any(span <= 0):
                raise ValueError("degenerate spatial extent, cannot split")
            self.deltas = span / np.array([n1, n2], dtype=np.float64)
        self.origins = lo[:2].copy()
        self.n_padded = (int(-(-n1 // p) * p), int(-(-n2 // p) * p))

    @property
    def n_candidates(self) -> int:
        n1, n2 = self.n_units
        return (n1 - self.p + 1) * (n2 - self.p + 1)

    @property
    def n_keys(self) -> int:
        return (self.n_padded[0] // self.p) * (self.n_padded[1] // self.p)

    def extent_end(self) -> np.ndarray:
        """End of the (padded) unit grid along the split dims."""
        return self.origins + np.array(self.n_padded) * self.deltas

    def candidate_origin(self, t: int) -> tuple[int, int]:
        w = self.n_units[1] - self.p + 1
        return (t // w, t % w)

    def candidate_id(self, i: int, j: int) -> int:
        w = self.n_units[1] - self.p + 1
        return i * w + j

    def key_origin(self, l: int) -> tuple[int, int]:
        w = self.n_padded[1] // self.p
        return ((l // w) * self.p, (l % w) * self.p)

    def unit_indices(self, points: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Clamped unit indices of raw points along the split dims. A point
        exactly on the far boundary belongs to the last unit."""
        pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
        u = np.floor((pts[:, :2] - self.origins) / self.deltas).astype(np.int64)
        u1 = np.clip(u[:, 0], 0, self.n_padded[0] - 1)
        u2 = np.clip(u[:, 1], 0, self.n_padded[1] - 1)
        return u1, u2

    # -- distance sampling lattice --------------------------------------

    def _split_offsets(self) -> tuple[np.ndarray, np.ndarray]:
        q = self.samples_per_unit
        k = np.arange(self.p * q, dtype=np.float64)
        # meshgrid: native sample positions (unit left edges); scattered:
        # unit (sub-)centers
        frac = k / q if self.on_grid else (k + 0.5) / q
        return frac * self.deltas[0], frac * self.deltas[1]

    def _other_positions(self) -> list[np.ndarray]:
        out = []
        for d in range(2, self.obs.n_dims):
            if self.on_grid:
                ax = self.obs.grid_axes[d]
                if ax.size > self.distance_other_max:
                    sel = np.unique(np.round(
                        np.linspace(0, ax.size - 1, self.distance_other_max)).astype(int))
                    ax = ax[sel]
                out.append(ax.astype(np.float64))
            else:
                lo, hi = self.domain.lo[d], self.domain.hi[d]
                if hi > lo:
                    out.append(np.linspace(lo, hi, self.distance_other_samples))
                else:
                    out.append(np.array([lo]))
        return out

    def cube_lattice(self, unit_origin: tuple[int, int]) -> np.ndarray:
        """Raw-coordinate sample lattice of one cube, clamped to the data
        extent (replication padding), flattened C-order over
        (split1, split2, other dims...). Shape (F, N)."""
        off1, off2 = self._split_offsets()
        x = self.origins[0] + unit_origin[0] * self.deltas[0] + off1
        y = self.origins[1] + unit_origin[1] * self.deltas[1] + off2
        axes = [x, y] + self._other_positions()
        mesh = np.meshgrid(*axes, indexing="ij")
        pts = np.stack([m.ravel() for m in mesh], axis=-1)
        return self.obs.coord_map.clamp(pts)

    def lattice_size(self) -> int:
        n = (self.p * self.samples_per_unit) ** 2
        for ax in self._other_positions():
            n *= ax.size
        return n


def split_domain(obs: ObservedSet, n_1: int, n_2: int, p: int,
                 samples_per_unit: int = 1, distance_other_samples: int = 3,
                 distance_other_max: int = 8) -> tuple[Domain, CubeGrid]:
    """Split the first two dims of the observed domain into n_1 x n_2 units."""
    grid = CubeGrid(obs, (n_1, n_2), p, samples_per_unit=samples_per_unit,
                    distance_other_samples=distance_other_samples,
                    distance_other_max=distance_other_max)
    return grid.domain, grid


def _features_one(f: SineMLP, grid: CubeGrid, unit_origin: tuple[int, int]) -> np.ndarray:
    pts = grid.cube_lattice(unit_origin)
    return f.forward(grid.obs.coord_map.normalize(pts))[:, 0]


def cube_distance(f: SineMLP, grid: CubeGrid, cube_a: tuple[int, int],
                  cube_b: tuple[int, int]) -> float:
    """Sum of squared representation differences at corresponding lattice
    positions of two cubes."""
    fa = _features_one(f, grid, tuple(cube_a))
    fb = _features_one(f, grid, tuple(cube_b))
    return float(np.sum(np.square(fa - fb)))


def _all_features(f: SineMLP, grid: CubeGrid, origins: list[tuple[int, int]]) -> np.ndarray:
    """Feature matrix (len(origins), F) for many cubes at once."""
    if grid.on_grid and grid.samples_per_unit == 1:
        # every lattice sits on the (padded) native grid: evaluate once, slice
        n1p, n2p = grid.n_padded
        x = grid.origins[0] + np.arange(n1p) * grid.deltas[0]
        y = grid.origins[1] + np.arange(n2p) * grid.deltas[1]
        x = np.clip(x, grid.domain.lo[0], grid.domain.hi[0])
        y = np.clip(y, grid.domain.lo[1], grid.domain.hi[1])
        axes = [x, y] + grid._other_positions()
        mesh = np.meshgrid(*axes, indexing="ij")
        pts = grid.obs.coord_map.normalize(np.stack([m.ravel() for m in mesh], axis=-1))
        vol = np.empty(pts.shape[0])
        for lo in range(0, pts.shape[0], 65536):
            hi = min(lo + 65536, pts.shape[0])
            vol[lo:hi] = f.forward(pts[lo:hi])[:, 0]
        vol = vol.reshape([a.size for a in axes])
        p = grid.p
        feats = np.empty((len(origins), grid.lattice_size()))
        for k, (i, j) in enumerate(origins):
            feats[k] = vol[i:i + p, j:j + p].reshape(-1)
        return feats
    pts = np.concatenate([grid.cube_lattice(o) for o in origins], axis=0)
    pts = grid.obs.coord_map.normalize(pts)
    out = np.empty(pts.shape[0])
    for lo in range(0, pts.shape[0], 65536):
        hi = min(lo + 65536, pts.shape[0])
        out[lo:hi] = f.forward(pts[lo:hi])[:, 0]
    return out.reshape(len(origins), -1)


@dataclass
class GroupEntry:
    """One selected cube of a group. cand_id is -1 when the key cube itself
    is not a candidate (it starts in the padded margin)."""

    cand_id: int
    unit_origin: tuple[int, int]
    distance: float
    offset: tuple[float, float]


@dataclass
class GroupIndex:
    """For every key cube, its S selected cubes in similarity order
    (entry 0 = the key cube itself: distance 0, offset (0, 0))."""

    p: int
    S: int
    groups: list[list[GroupEntry]]
    grid: CubeGrid | None = None

    def to_json(self) -> str:
        doc = {
            "p": self.p,
            "S": self.S,
            "groups": [
                [
                    {
                        "cand_id": e.cand_id,
                        "unit_origin": list(e.unit_origin),
                        "distance": e.distance,
                        "offset": list(e.offset),
                    }
                    for e in grp
                ]
                for grp in self.groups
            ],
        }
        return json.dumps(doc, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "GroupIndex":
        doc = json.loads(text)
        groups = [
            [
                GroupEntry(
                    cand_id=int(e["cand_id"]),
                    unit_origin=(int(e["unit_origin"][0]), int(e["unit_origin"][1])),
                    distance=float(e["distance"]),
                    offset=(float(e["offset"][0]), float(e["offset"][1])),
                )
                for e in grp
            ]
            for grp in doc["groups"]
        ]
        return cls(p=int(doc["p"]), S=int(doc["S"]), groups=groups)


def top_s_similar(f: SineMLP, grid: CubeGrid, S: int) -> GroupIndex:
    """Build the group index: each key cube first, then its S-1 most similar
    candidate cubes (ascending distance, ties by candidate id)."""
    T = grid.n_candidates
    if not 1 <= S <= T:
        raise ValueError(f"S={S} outside [1, T={T}]")
    cand_origins = [grid.candidate_origin(t) for t in range(T)]
    key_origins = [grid.key_origin(l) for l in range(grid.n_keys)]
    cand_feat = _all_features(f, grid, cand_origins)
    key_feat = _all_features(f, grid, key_origins)

    groups: list[list[GroupEntry]] = []
    for l, (ki, kj) in enumerate(key_origins):
        # same summation order as a per-pair oracle: sum over the feature axis
        d = np.sum(np.square(cand_feat - key_feat[l]), axis=1)
        order = np.lexsort((np.arange(T), d))
        entries = [GroupEntry(cand_id=-1, unit_origin=(ki, kj), distance=0.0,
                              offset=(0.0, 0.0))]
        self_id = None
        if ki <= grid.n_units[0] - grid.p and kj <= grid.n_units[1] - grid.p:
            self_id = grid.candidate_id(ki, kj)
            entries[0].cand_id = self_id
        for t in order:
            if len(entries) == S:
                break
            if self_id is not None and t == self_id:
                continue
            ci, cj = cand_origins[t]
            dx = (ki - ci) * grid.deltas[0]
            dy = (kj - cj) * grid.deltas[1]
            entries.append(GroupEntry(cand_id=int(t), unit_origin=(ci, cj),
                                      distance=float(d[t]), offset=(float(dx), float(dy))))
        groups.append(entries)
    return GroupIndex(p=grid.p, S=S, groups=groups, grid=grid)


@dataclass
class GroupObservedSet:
    """Training points of one group: observed samples of every selected cube,
    translated onto the key cube and tagged with the similarity coordinate s
    (1-based) as the last dimension."""

    key_id: int
    key_origin: tuple[int, int]
    points: np.ndarray  # (m, N+1)
    values: np.ndarray  # (m,)

    @property
    def n_points(self) -> int:
        return self.points.shape[0]


def build_group_sets(obs: ObservedSet, index: GroupIndex) -> list[GroupObservedSet]:
    """Collect and remap the observed points of every group."""
    grid = index.grid
    if grid is None:
        raise ValueError("group index lacks grid geometry (was it deserialized?)")
    u1, u2 = grid.unit_indices(obs.points)
    # points bucketed by unit cell for fast per-cube slicing
    n2p = grid.n_padded[1]
    cell = u1 * n2p + u2
    order = np.argsort(cell, kind="stable")
    cell_sorted = cell[order]
    p = grid.p

    def cube_point_ids(i: int, j: int) -> np.ndarray:
        rows = []
        for r in range(i, i + p):
            lo = np.searchsorted(cell_sorted, r * n2p + j, side="left")
            hi = np.searchsorted(cell_sorted, r * n2p + j + p - 1, side="right")
            if hi > lo:
                rows.append(order[lo:hi])
        if rows:
            return np.concatenate(rows)
        return np.empty(0, dtype=np.int64)

    out = []
    for l, entries in enumerate(index.groups):
        chunks_p = []
        chunks_v = []
        for s, e in enumerate(entries, start=1):
            ids = cube_point_ids(*e.unit_origin)
            if ids.size == 0:
                continue
            pts = obs.points[ids].copy()
            pts[:, 0] += e.offset[0]
            pts[:, 1] += e.offset[1]
            tagged = np.concatenate([pts, np.full((ids.size, 1), float(s))], axis=1)
            chunks_p.append(tagged)
            chunks_v.append(obs.values[ids])
        if chunks_p:
            points = np.concatenate(chunks_p, axis=0)
            values = np.concatenate(chunks_v)
        else:
            points = np.empty((0, obs.n_dims + 1))
            values = np.empty(0)
        out.append(GroupObservedSet(key_id=l, key_origin=index.groups[l][0].unit_origin,
                                    points=points, values=values))
    return out


def assign_key_cubes(grid: CubeGrid, points: np.ndarray) -> np.ndarray:
    """Key cube id of each raw query point (clamped into the domain first)."""
    pts = grid.obs.coord_map.clamp(points)
    u1, u2 = grid.unit_indices(pts)
    w = grid.n_padded[1] // grid.p
    return (u1 // grid.p) * w + (u2 // grid.p)
