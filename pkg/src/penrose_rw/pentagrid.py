"""Five-family line grid (pentagrid), its random offsets and its intersections.

Family ``k`` consists of the parallel lines ``{z : z . eperp[k] = gamma[k] + m}``
for integer ``m``; the lines run along ``e[k]``.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .errors import SingularGrid

TAU = (1.0 + math.sqrt(5.0)) / 2.0

# coincidence tolerance for intersection points / point-on-line tests
COINCIDE_TOL = 1e-9

_ANGLES = 2.0 * np.pi * np.arange(5) / 5.0
E = np.column_stack([np.cos(_ANGLES), np.sin(_ANGLES)])
EPERP = np.column_stack([-np.sin(_ANGLES), np.cos(_ANGLES)])
E.setflags(write=False)
EPERP.setflags(write=False)

# unordered family pairs in lexicographic order; index + 1 is the rotation class
FAMILY_PAIRS = tuple((i, j) for i in range(5) for j in range(i + 1, 5))


@dataclass(frozen=True)
class StarVectors:
    e: np.ndarray
    eperp: np.ndarray


def star_vectors() -> StarVectors:
    """The five unit vectors ``e[k]`` at angles 2k*pi/5 and their +90 degree rotations."""
    return StarVectors(E.copy(), EPERP.copy())


def is_thick(i: int, j: int) -> bool:
    return (j - i) % 5 in (1, 4)


@dataclass(frozen=True)
class GridParams:
    """Offsets of the five line families plus the torus label and seed they came from."""

    gamma: tuple[float, float, float, float, float]
    torus: tuple[int, int] = (0, 1)
    seed: int = 0

    def __post_init__(self):
        g = tuple(float(x) for x in self.gamma)
        if len(g) != 5:
            raise ValueError("gamma must have five entries")
        object.__setattr__(self, "gamma", g)
        object.__setattr__(self, "torus", (int(self.torus[0]), int(self.torus[1])))
        object.__setattr__(self, "seed", int(self.seed))

    @property
    def gamma_array(self) -> np.ndarray:
        return np.asarray(self.gamma, dtype=float)

    def to_dict(self) -> dict:
        return {"gamma": list(self.gamma), "torus": list(self.torus), "seed": self.seed}

    @classmethod
    def from_dict(cls, d: dict) -> "GridParams":
        return cls(tuple(d["gamma"]), tuple(d["torus"]), int(d["seed"]))

    def to_json(self) -> str:
        # repr-based float formatting round-trips exactly
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, s: str) -> "GridParams":
        return cls.from_dict(json.loads(s))


@dataclass(frozen=True)
class GridLine:
    family: int
    index: int

    def offset(self, params: GridParams) -> float:
        return params.gamma[self.family] + self.index


@dataclass(frozen=True)
class Intersection:
    line_a: GridLine
    line_b: GridLine
    point: tuple[float, float]


def _torus_weights() -> tuple[list[tuple[int, int]], np.ndarray]:
    tori = [(i, (i + 1) % 5) for i in range(5)] + [(i, (i + 2) % 5) for i in range(5)]
    w = np.array([TAU] * 5 + [1.0] * 5)
    return tori, w / w.sum()


TORI, TORUS_PROBS = _torus_weights()


def params_on_torus(i: int, j: int, gamma_n: float, gamma_m: float, seed: int = 0) -> GridParams:
    """Pentagrid with lines of families ``i`` and ``j`` through the origin.

    The two free offsets go to the two lowest remaining families; the last
    family takes ``1 - gamma_n - gamma_m`` reduced into [0, 1).
    """
    if (j - i) % 5 not in (1, 2):
        raise ValueError(f"torus ({i}, {j}) needs j - i = 1 or 2 mod 5")
    n, m, l = sorted(set(range(5)) - {i, j})
    gamma = [0.0] * 5
    gamma[n] = float(gamma_n)
    gamma[m] = float(gamma_m)
    gl = (1.0 - gamma_n - gamma_m) % 1.0
    gamma[l] = 0.0 if gl >= 1.0 else gl
    return GridParams(tuple(gamma), (i, j), seed)


def sample_environment(rng_seed: int) -> GridParams:
    """Draw a pentagrid from the stationary measure on the ten tori.

    Tori with ``j - i = 1 (mod 5)`` put a thick rhombus at the origin and
    carry weight tau; the thin-origin tori carry weight 1.
    """
    rng = np.random.default_rng(rng_seed)
    t = rng.choice(len(TORI), p=TORUS_PROBS)
    i, j = TORI[t]
    gn, gm = rng.random(2)
    return params_on_torus(i, j, gn, gm, rng_seed)


def _pair_solve(i: int, j: int) -> np.ndarray:
    return np.linalg.inv(np.array([EPERP[i], EPERP[j]]))


def intersection_arrays(params: GridParams, radius: float, center=(0.0, 0.0)) -> dict[str, np.ndarray]:
    """All pairwise line intersections within ``radius`` of ``center``, as flat arrays.

    Keys: ``i, j`` (families, i < j), ``p, q`` (line indices) and ``points`` (N, 2).
    """
    gamma = params.gamma_array
    cx, cy = float(center[0]), float(center[1])
    c = np.array([cx, cy])
    out = {"i": [], "j": [], "p": [], "q": [], "points": []}
    for i, j in FAMILY_PAIRS:
        # line offsets of the disk's projection onto each normal
        ci, cj = c @ EPERP[i] - gamma[i], c @ EPERP[j] - gamma[j]
        ps = np.arange(math.floor(ci - radius) - 1, math.ceil(ci + radius) + 2)
        qs = np.arange(math.floor(cj - radius) - 1, math.ceil(cj + radius) + 2)
        P, Q = np.meshgrid(ps, qs, indexing="ij")
        P, Q = P.ravel(), Q.ravel()
        rhs = np.column_stack([gamma[i] + P, gamma[j] + Q])
        pts = rhs @ _pair_solve(i, j).T
        keep = np.hypot(pts[:, 0] - cx, pts[:, 1] - cy) <= radius
        n = int(keep.sum())
        out["i"].append(np.full(n, i, dtype=np.int64))
        out["j"].append(np.full(n, j, dtype=np.int64))
        out["p"].append(P[keep].astype(np.int64))
        out["q"].append(Q[keep].astype(np.int64))
        out["points"].append(pts[keep])
    return {k: np.concatenate(v) for k, v in out.items()}


def triple_point_mask(params: GridParams, arrays: dict[str, np.ndarray]) -> np.ndarray:
    """True where an intersection also lies on a line of a third family."""
    proj = arrays["points"] @ EPERP.T - params.gamma_array
    dist = np.abs(proj - np.round(proj))
    rows = np.arange(len(dist))
    dist[rows, arrays["i"]] = np.inf
    dist[rows, arrays["j"]] = np.inf
    return (dist < COINCIDE_TOL).any(axis=1)


def intersections_in_disk(params: GridParams, radius: float) -> list[Intersection]:
    """Every intersection of two grid lines within ``radius`` of the origin.

    Raises SingularGrid if three lines meet at a point inside the disk.
    """
    if radius < 0:
        raise ValueError("radius must be non-negative")
    arr = intersection_arrays(params, radius)
    if triple_point_mask(params, arr).any():
        raise SingularGrid(f"triple point within radius {radius}")
    return [
        Intersection(GridLine(int(i), int(p)), GridLine(int(j), int(q)), (float(x), float(y)))
        for i, j, p, q, (x, y) in zip(arr["i"], arr["j"], arr["p"], arr["q"], arr["points"])
    ]


def regularity_check(params: GridParams, radius: float, center=(0.0, 0.0)) -> bool:
    """True iff no three grid lines meet at a point inside the disk."""
    arr = intersection_arrays(params, radius, center)
    return not triple_point_mask(params, arr).any()
