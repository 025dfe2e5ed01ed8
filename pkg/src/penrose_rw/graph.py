"""Random-walk graph on tile centers: adjacency, step catalog, BFS metrics."""
from __future__ import annotations

import csv
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import Unreachable
from .pentagrid import E
from .tiling import Patch, _edge_keys

NO_NEIGHBOR = -1


@dataclass(eq=False)
class PenroseGraph:
    """Edge-sharing adjacency of a patch.

    ``nbr[v, s]`` is the neighbor across edge slot ``s`` (or -1 if that tile is
    outside the patch) and ``steps[v, s]`` the center-to-center vector.
    Vertex ids coincide with patch tile indices.
    """

    patch: Patch
    nbr: np.ndarray      # (N, 4) int64
    steps: np.ndarray    # (N, 4, 2)

    @property
    def centers(self) -> np.ndarray:
        return self.patch.centers

    @property
    def origin_id(self) -> int:
        return self.patch.origin

    def __len__(self) -> int:
        return len(self.nbr)

    @cached_property
    def degree(self) -> np.ndarray:
        return (self.nbr != NO_NEIGHBOR).sum(axis=1)

    @cached_property
    def interior_mask(self) -> np.ndarray:
        return self.degree == 4

    def adjacency(self, v: int) -> list[tuple[int, tuple[float, float]]]:
        return [(int(u), (float(s[0]), float(s[1])))
                for u, s in zip(self.nbr[v], self.steps[v]) if u != NO_NEIGHBOR]

    def edges(self) -> np.ndarray:
        """(M, 2) array of undirected edges with a < b."""
        src = np.repeat(np.arange(len(self)), 4)
        dst = self.nbr.ravel()
        m = (dst != NO_NEIGHBOR) & (src < dst)
        return np.column_stack([src[m], dst[m]])

    @cached_property
    def distances(self) -> np.ndarray:
        """BFS graph distance from the origin (-1 where unreachable)."""
        return bfs_distances(self.nbr, [self.origin_id])

    @cached_property
    def boundary_distance(self) -> np.ndarray:
        """Graph distance to the nearest degree-deficient vertex."""
        return bfs_distances(self.nbr, np.flatnonzero(~self.interior_mask))

    @cached_property
    def safe_radius(self) -> int:
        """Largest graph distance r such that the r-ball around the origin is all interior."""
        bd = self.distances[~self.interior_mask]
        bd = bd[bd >= 0]
        return int(bd.min()) - 1 if len(bd) else int(self.distances.max())


def bfs_distances(nbr: np.ndarray, sources) -> np.ndarray:
    dist = np.full(len(nbr), -1, dtype=np.int64)
    frontier = np.unique(np.asarray(sources, dtype=np.int64))
    dist[frontier] = 0
    level = 0
    while len(frontier):
        level += 1
        cand = nbr[frontier].ravel()
        cand = cand[cand != NO_NEIGHBOR]
        cand = np.unique(cand[dist[cand] < 0])
        dist[cand] = level
        frontier = cand
    return dist


def build_graph(patch: Patch) -> PenroseGraph:
    """Connect tiles that share a full edge (two common integer corners)."""
    keys = _edge_keys(patch)
    n = len(patch)
    flat = keys.ravel()
    order = np.argsort(flat, kind="stable")
    sk = flat[order]
    same = np.flatnonzero(sk[1:] == sk[:-1])
    if len(same) and (np.diff(same) == 1).any():
        raise ValueError("an edge is shared by more than two tiles")
    a, b = order[same], order[same + 1]
    nbr = np.full(4 * n, NO_NEIGHBOR, dtype=np.int64)
    nbr[a] = b // 4
    nbr[b] = a // 4
    nbr = nbr.reshape(n, 4)

    # steps from integer data: center = K.E + (e_i + e_j)/2
    i, j = patch.ij[:, 0], patch.ij[:, 1]
    half = 0.5 * (E[i] + E[j])
    steps = np.zeros((n, 4, 2))
    for s in range(4):
        u = nbr[:, s]
        ok = u != NO_NEIGHBOR
        dK = patch.K[u[ok]] - patch.K[ok]
        steps[ok, s] = dK @ E + half[u[ok]] - half[ok]
    return PenroseGraph(patch, nbr, steps)


@dataclass(frozen=True)
class StepCatalog:
    vectors: np.ndarray      # (m, 2)
    frequency: np.ndarray    # (m,) fraction of interior step slots

    def __len__(self) -> int:
        return len(self.vectors)

    def contains(self, v, tol: float = 1e-9) -> bool:
        return bool((np.abs(self.vectors - np.asarray(v)).max(axis=1) <= tol).any())


def step_catalog(g: PenroseGraph, decimals: int = 8) -> StepCatalog:
    """Distinct center-to-center steps seen at interior vertices."""
    s = g.steps[g.interior_mask].reshape(-1, 2)
    if len(s) == 0:
        raise ValueError("graph has no interior vertex")
    r = np.round(s, decimals) + 0.0  # folds -0.0 into 0.0
    vecs, counts = np.unique(r, axis=0, return_counts=True)
    return StepCatalog(vecs, counts / counts.sum())


def graph_distance(g: PenroseGraph, v: int) -> int:
    d = int(g.distances[v])
    if d < 0:
        raise Unreachable(f"vertex {v} is disconnected from the origin")
    return d


def write_vertex_csv(g: PenroseGraph, path) -> None:
    p = g.patch
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["id", "center_x", "center_y", "shape", "rotation_class", "interior"])
        for v in range(len(g)):
            w.writerow([v, repr(float(p.centers[v, 0])), repr(float(p.centers[v, 1])),
                        "thick" if p.thick[v] else "thin", int(p.rotation_classes[v]),
                        int(g.interior_mask[v])])


def write_edge_csv(g: PenroseGraph, path) -> None:
    e = g.edges()
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["vertex_id_a", "vertex_id_b", "step_x", "step_y"])
        for a, b in e:
            s = g.steps[a][g.nbr[a] == b][0]
            w.writerow([int(a), int(b), repr(float(s[0])), repr(float(s[1]))])
