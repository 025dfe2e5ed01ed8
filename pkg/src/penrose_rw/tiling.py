"""Rhombus tiles dual to pentagrid intersections, finite patches and ribbons.

A tile is stored combinatorially: its family pair ``(i, j)``, the two line
indices ``(p, q)`` and the integer 5-tuple ``K`` of its base vertex.  Real
coordinates are always derived from ``K`` via ``sum_k K[k] * e[k]``.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .errors import EmptyRibbon, NotOnRibbon, OnGridLine, SingularGrid
from .pentagrid import (
    COINCIDE_TOL,
    E,
    EPERP,
    FAMILY_PAIRS,
    GridLine,
    GridParams,
    Intersection,
    intersection_arrays,
    is_thick,
    triple_point_mask,
)

THICK_AREA = math.sin(2 * math.pi / 5)
THIN_AREA = math.sin(math.pi / 5)

# rotation class of an ordered pair (i, j), i < j
_PAIR_CLASS = np.zeros((5, 5), dtype=np.int64)
for _c, (_i, _j) in enumerate(FAMILY_PAIRS, start=1):
    _PAIR_CLASS[_i, _j] = _c

# |tile center - 2.5 * R(-90) z| for the dual intersection z is below this
_DUAL_OFFSET_BOUND = 10.0
_DUAL_SCALE = 2.5

TileKey = tuple[tuple[int, int], tuple[int, int]]


def rotation_class(i: int, j: int) -> int:
    return int(_PAIR_CLASS[min(i, j), max(i, j)])


def _rot_minus90(z):
    z = np.asarray(z, dtype=float)
    return np.stack([z[..., 1], -z[..., 0]], axis=-1)


def _rot_plus90(z):
    z = np.asarray(z, dtype=float)
    return np.stack([-z[..., 1], z[..., 0]], axis=-1)


@dataclass(frozen=True)
class Tile:
    key: TileKey
    base: tuple[int, int, int, int, int]
    center: tuple[float, float]

    @property
    def families(self) -> tuple[int, int]:
        return self.key[0]

    @property
    def shape(self) -> str:
        return "thick" if is_thick(*self.key[0]) else "thin"

    @property
    def rotation_class(self) -> int:
        return rotation_class(*self.key[0])

    def vertices5(self) -> list[tuple[int, ...]]:
        """Integer 5-tuples of the corners, counter-clockwise or clockwise in order."""
        (i, j), _ = self.key
        k = list(self.base)
        out = []
        for di, dj in ((0, 0), (1, 0), (1, 1), (0, 1)):
            v = k.copy()
            v[i] += di
            v[j] += dj
            out.append(tuple(v))
        return out


def strip_index(z, family: int, params: GridParams, side: int | None = None) -> int:
    """Index of the family-``family`` strip containing ``z``: ceil(z . eperp - gamma).

    ``side`` (+1 or -1) picks the strip above or below when ``z`` sits on a line.
    """
    val = float(np.dot(z, EPERP[family])) - params.gamma[family]
    nearest = round(val)
    if abs(val - nearest) <= COINCIDE_TOL:
        if side is None:
            raise OnGridLine(f"point lies on line {nearest} of family {family}")
        return int(nearest + 1 if side > 0 else nearest)
    return int(math.ceil(val))


def _base_vectors(points: np.ndarray, fi: np.ndarray, fj: np.ndarray, p: np.ndarray, q: np.ndarray,
                  params: GridParams) -> np.ndarray:
    K = np.ceil(points @ EPERP.T - params.gamma_array).astype(np.int64)
    rows = np.arange(len(K))
    K[rows, fi] = p
    K[rows, fj] = q
    return K


def _centers(K: np.ndarray, fi: np.ndarray, fj: np.ndarray) -> np.ndarray:
    return K @ E + 0.5 * (E[fi] + E[fj])


def dual_tile(x: Intersection, params: GridParams) -> Tile:
    """The rhombus dual to one regular intersection."""
    i, j = x.line_a.family, x.line_b.family
    if i > j:
        i, j = j, i
        p, q = x.line_b.index, x.line_a.index
    else:
        p, q = x.line_a.index, x.line_b.index
    base = []
    for k in range(5):
        if k == i:
            base.append(p)
        elif k == j:
            base.append(q)
        else:
            try:
                base.append(strip_index(x.point, k, params))
            except OnGridLine as exc:
                raise SingularGrid(f"intersection {x} lies on a third line") from exc
    Karr = np.array(base, dtype=np.int64)
    c = Karr @ E + 0.5 * (E[i] + E[j])
    return Tile(((i, j), (p, q)), tuple(int(b) for b in base), (float(c[0]), float(c[1])))


def rhombus_polygon(base, i: int, j: int) -> np.ndarray:
    """Corner coordinates (4, 2) of a tile from its base 5-tuple."""
    v0 = np.asarray(base, dtype=float) @ E
    return np.array([v0, v0 + E[i], v0 + E[i] + E[j], v0 + E[j]])


@dataclass(eq=False)
class Patch:
    """A finite disk of tiles, translated so that the origin tile's center is (0, 0).

    Tiles are held as parallel arrays sorted lexicographically by key
    ``(i, j, p, q)``; index ``t`` in every array refers to the same tile.
    """

    params: GridParams
    radius: float
    ij: np.ndarray       # (N, 2) family pair
    pq: np.ndarray       # (N, 2) line indices
    K: np.ndarray        # (N, 5) base vertex
    origin: int          # index of the origin tile
    _tiles: dict | None = field(default=None, repr=False)

    def __len__(self) -> int:
        return len(self.K)

    @cached_property
    def centers(self) -> np.ndarray:
        """Tile centers relative to the origin tile, from integer differences."""
        i, j = self.ij[:, 0], self.ij[:, 1]
        o = self.origin
        dK = self.K - self.K[o]
        half = 0.5 * (E[i] + E[j]) - 0.5 * (E[self.ij[o, 0]] + E[self.ij[o, 1]])
        c = dK @ E + half
        c[o] = 0.0
        return c

    @cached_property
    def absolute_centers(self) -> np.ndarray:
        return _centers(self.K, self.ij[:, 0], self.ij[:, 1])

    @cached_property
    def offset(self) -> np.ndarray:
        """Absolute coordinates of the origin tile's center."""
        return self.absolute_centers[self.origin]

    @cached_property
    def grid_points(self) -> np.ndarray:
        """The dual intersection point of every tile, in pentagrid coordinates."""
        i, j = self.ij[:, 0], self.ij[:, 1]
        g = self.params.gamma_array
        out = np.empty((len(self), 2))
        for a, b in FAMILY_PAIRS:
            m = (i == a) & (j == b)
            if m.any():
                rhs = np.column_stack([g[a] + self.pq[m, 0], g[b] + self.pq[m, 1]])
                out[m] = rhs @ np.linalg.inv(np.array([EPERP[a], EPERP[b]])).T
        return out

    @cached_property
    def thick(self) -> np.ndarray:
        return ((self.ij[:, 1] - self.ij[:, 0]) % 5 == 1) | ((self.ij[:, 1] - self.ij[:, 0]) % 5 == 4)

    @cached_property
    def rotation_classes(self) -> np.ndarray:
        return _PAIR_CLASS[self.ij[:, 0], self.ij[:, 1]]

    @cached_property
    def index(self) -> dict[TileKey, int]:
        return {self.key_of(t): t for t in range(len(self))}

    def key_of(self, t: int) -> TileKey:
        return ((int(self.ij[t, 0]), int(self.ij[t, 1])), (int(self.pq[t, 0]), int(self.pq[t, 1])))

    def tile(self, t: int) -> Tile:
        c = self.centers[t]
        return Tile(self.key_of(t), tuple(int(v) for v in self.K[t]), (float(c[0]), float(c[1])))

    @property
    def tiles(self) -> dict[TileKey, Tile]:
        if self._tiles is None:
            self._tiles = {self.key_of(t): self.tile(t) for t in range(len(self))}
        return self._tiles

    @property
    def origin_tile(self) -> TileKey:
        return self.key_of(self.origin)

    def polygons(self, rows=None) -> np.ndarray:
        """Corner coordinates (N, 4, 2) in the patch frame."""
        rows = np.arange(len(self)) if rows is None else np.asarray(rows)
        i, j = self.ij[rows, 0], self.ij[rows, 1]
        v0 = self.centers[rows] - 0.5 * (E[i] + E[j])
        return np.stack([v0, v0 + E[i], v0 + E[i] + E[j], v0 + E[j]], axis=1)

    def shape_counts(self) -> dict[str, int]:
        nthick = int(self.thick.sum())
        return {"thick": nthick, "thin": len(self) - nthick}

    def to_dict(self) -> dict:
        return {
            "params": self.params.to_dict(),
            "radius": self.radius,
            "origin": [list(self.origin_tile[0]), list(self.origin_tile[1])],
            "tiles": [
                {"ij": [int(a), int(b)], "pq": [int(c), int(d)], "K": [int(v) for v in k]}
                for (a, b), (c, d), k in zip(self.ij, self.pq, self.K)
            ],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), separators=(",", ":"))

    @classmethod
    def from_dict(cls, d: dict) -> "Patch":
        tiles = d["tiles"]
        ij = np.array([t["ij"] for t in tiles], dtype=np.int64).reshape(-1, 2)
        pq = np.array([t["pq"] for t in tiles], dtype=np.int64).reshape(-1, 2)
        K = np.array([t["K"] for t in tiles], dtype=np.int64).reshape(-1, 5)
        (a, b), (c, e) = d["origin"]
        hit = np.flatnonzero((ij[:, 0] == a) & (ij[:, 1] == b) & (pq[:, 0] == c) & (pq[:, 1] == e))
        if len(hit) != 1:
            raise ValueError("origin tile missing from patch data")
        return cls(GridParams.from_dict(d["params"]), float(d["radius"]), ij, pq, K, int(hit[0]))

    @classmethod
    def from_json(cls, s: str) -> "Patch":
        return cls.from_dict(json.loads(s))


def _nearest_to(points: np.ndarray, target: np.ndarray) -> int:
    d2 = ((points - target) ** 2).sum(axis=1)
    cand = np.flatnonzero(d2 <= d2.min() + 1e-12)
    if len(cand) == 1:
        return int(cand[0])
    # tie-break on (x, y)
    order = np.lexsort((points[cand, 1], points[cand, 0]))
    return int(cand[order[0]])


def build_patch(params: GridParams, radius: float, center=None) -> Patch:
    """Dualize the pentagrid and cut out the disk of tiles around the origin tile.

    ``center`` (absolute tiling coordinates, default the origin) selects which
    tile becomes the origin: the one whose center is nearest to it.
    """
    if radius <= 0:
        raise ValueError("radius must be positive")
    target = np.zeros(2) if center is None else np.asarray(center, dtype=float)
    # tile centers sit within _DUAL_OFFSET_BOUND of 2.5 * R(-90) z
    grid_center = _rot_plus90(target) / _DUAL_SCALE
    grid_radius = (radius + _DUAL_OFFSET_BOUND) / _DUAL_SCALE
    arr = intersection_arrays(params, grid_radius, grid_center)
    if triple_point_mask(params, arr).any():
        raise SingularGrid(f"triple point within grid radius {grid_radius:.3f}")
    fi, fj, p, q = arr["i"], arr["j"], arr["p"], arr["q"]
    K = _base_vectors(arr["points"], fi, fj, p, q, params)
    centers = _centers(K, fi, fj)
    o = _nearest_to(centers, target)
    keep = np.hypot(*(centers - centers[o]).T) <= radius
    order = np.lexsort((q[keep], p[keep], fj[keep], fi[keep]))
    ij = np.column_stack([fi[keep], fj[keep]])[order]
    pq = np.column_stack([p[keep], q[keep]])[order]
    Kk = K[keep][order]
    new_origin = int(np.flatnonzero(np.flatnonzero(keep)[order] == o)[0])
    return Patch(params, float(radius), ij, pq, Kk, new_origin)


def recenter(patch: Patch, v: int) -> Patch:
    """Same tiles, translated so that tile ``v``'s center is (0, 0)."""
    return Patch(patch.params, patch.radius, patch.ij, patch.pq, patch.K, int(v))


def shifted_patch(patch: Patch, v: int) -> Patch:
    """A fresh disk of the same radius around tile ``v`` of the same tiling."""
    return build_patch(patch.params, patch.radius, center=patch.absolute_centers[v])


def edge_matching_violations(patch: Patch) -> int:
    """Count corners whose real position is shared by differing integer 5-tuples,
    plus integer edges claimed by more than two tiles."""
    n = len(patch)
    i, j = patch.ij[:, 0], patch.ij[:, 1]
    corners5 = np.repeat(patch.K[:, None, :], 4, axis=1)
    rows = np.arange(n)
    corners5[rows, 1, i] += 1
    corners5[rows, 2, i] += 1
    corners5[rows, 2, j] += 1
    corners5[rows, 3, j] += 1
    c5 = corners5.reshape(-1, 5)
    xy = patch.polygons().reshape(-1, 2)
    cells = np.round(xy / 1e-6).astype(np.int64)
    _, cell_id = np.unique(cells, axis=0, return_inverse=True)
    _, vert_id = np.unique(c5, axis=0, return_inverse=True)
    pairs = np.unique(np.column_stack([cell_id.ravel(), vert_id.ravel()]), axis=0)
    # each real position must carry exactly one 5-tuple and vice versa
    bad = (len(pairs) - len(np.unique(pairs[:, 0]))) + (len(pairs) - len(np.unique(pairs[:, 1])))
    keys = _edge_keys(patch).ravel()
    _, counts = np.unique(keys, return_counts=True)
    bad += int((counts > 2).sum())
    return int(bad)


_PACK_BITS = 11
_PACK_OFFSET = 1 << (_PACK_BITS - 1)


def _pack(v5: np.ndarray, fam: np.ndarray) -> np.ndarray:
    if np.abs(v5).max(initial=0) >= _PACK_OFFSET - 1:
        raise OverflowError("vertex coordinates exceed packing range")
    key = np.zeros(len(v5), dtype=np.int64)
    for k in range(5):
        key = (key << _PACK_BITS) | (v5[:, k] + _PACK_OFFSET)
    return (key << 3) | fam


def _edge_keys(patch: Patch) -> np.ndarray:
    """(N, 4) integer codes of each tile's edges, as (start 5-tuple, direction).

    Slots: 0/1 are the e_i edges at K_j = q / q+1, 2/3 the e_j edges at K_i = p / p+1.
    """
    n = len(patch)
    rows = np.arange(n)
    i, j = patch.ij[:, 0], patch.ij[:, 1]
    K = patch.K
    Kj1 = K.copy()
    Kj1[rows, j] += 1
    Ki1 = K.copy()
    Ki1[rows, i] += 1
    return np.column_stack([_pack(K, i), _pack(Kj1, i), _pack(K, j), _pack(Ki1, j)])


def _circle_segment_area(a: np.ndarray, b: np.ndarray, r: float) -> np.ndarray:
    """Signed area of (triangle O, a, b) intersected with the disk of radius r."""
    d = b - a
    A = (d * d).sum(-1)
    B = 2 * (a * d).sum(-1)
    C = (a * a).sum(-1) - r * r
    disc = B * B - 4 * A * C
    sq = np.sqrt(np.maximum(disc, 0.0))
    t1 = np.clip((-B - sq) / (2 * A), 0.0, 1.0)
    t2 = np.clip((-B + sq) / (2 * A), 0.0, 1.0)
    miss = disc <= 0
    t1 = np.where(miss, 0.0, t1)
    t2 = np.where(miss, 0.0, t2)
    p1 = a + t1[:, None] * d
    p2 = a + t2[:, None] * d

    def sector(u, v):
        cross = u[:, 0] * v[:, 1] - u[:, 1] * v[:, 0]
        dot = (u * v).sum(-1)
        return 0.5 * r * r * np.arctan2(cross, dot)

    def tri(u, v):
        return 0.5 * (u[:, 0] * v[:, 1] - u[:, 1] * v[:, 0])

    return sector(a, p1) + tri(p1, p2) + sector(p2, b)


def covered_area(patch: Patch, r: float) -> float:
    """Sum over tiles of the exact area of tile intersected with the disk of radius r."""
    rows = np.flatnonzero(np.hypot(*patch.centers.T) <= r + 1.0)
    polys = patch.polygons(rows)
    inside = (np.hypot(polys[..., 0], polys[..., 1]) <= r).all(axis=1)
    full = rows[inside]
    area = np.where(patch.thick[full], THICK_AREA, THIN_AREA).sum()
    part = polys[~inside]
    if len(part):
        a = part.reshape(-1, 2)
        b = np.roll(part, -1, axis=1).reshape(-1, 2)
        area += np.abs(_circle_segment_area(a, b, r).reshape(-1, 4).sum(axis=1)).sum()
    return float(area)


@dataclass(frozen=True)
class Ribbon:
    line: GridLine
    tiles: list[TileKey]
    rows: np.ndarray = field(repr=False, compare=False)

    def position(self, key: TileKey) -> int:
        try:
            return self.tiles.index(key)
        except ValueError:
            raise NotOnRibbon(f"{key} is not on ribbon {self.line}") from None


def ribbon_through(patch: Patch, line: GridLine) -> Ribbon:
    """Tiles dual to the intersections on ``line``, ordered along ``e[line.family]``."""
    k, m = line.family, line.index
    on = ((patch.ij[:, 0] == k) & (patch.pq[:, 0] == m)) | ((patch.ij[:, 1] == k) & (patch.pq[:, 1] == m))
    rows = np.flatnonzero(on)
    if len(rows) == 0:
        raise EmptyRibbon(f"no tile of the patch lies on {line}")
    pos = patch.grid_points[rows] @ E[k]
    rows = rows[np.argsort(pos, kind="stable")]
    return Ribbon(line, [patch.key_of(t) for t in rows], rows)


def origin_ribbons(patch: Patch) -> tuple[Ribbon, Ribbon]:
    """The two ribbons through the origin tile (one per defining family)."""
    (i, j), (p, q) = patch.origin_tile
    return ribbon_through(patch, GridLine(i, p)), ribbon_through(patch, GridLine(j, q))


def ribbon_distance(r: Ribbon, a: TileKey, b: TileKey) -> int:
    return abs(r.position(a) - r.position(b))
