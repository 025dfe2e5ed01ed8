"""Quenched simple random walk on a Penrose graph.

Walk ``i`` of a batch with master seed ``s`` draws its moves from its own
Philox stream keyed by ``SeedSequence(s, spawn_key=(i,))``, so any walk can
be regenerated on its own and batches are independent of chunking and
thread count.
"""
from __future__ import annotations

import csv
import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .corrector import DEFAULT_MARGIN, CorrectorField
from .errors import BoundaryHit, MarginViolation, PathTooShort
from .graph import PenroseGraph

SAFETY_FACTOR = 6.0


def walk_rng(master_seed: int, index: int) -> np.random.Generator:
    ss = np.random.SeedSequence(int(master_seed), spawn_key=(int(index),))
    return np.random.Generator(np.random.Philox(ss))


def _moves(master_seed: int, index: int, n: int) -> np.ndarray:
    return walk_rng(master_seed, index).integers(0, 4, size=n, dtype=np.uint8)


def forbidden_mask(g: PenroseGraph, margin: int = DEFAULT_MARGIN) -> np.ndarray:
    """Vertices within ``margin`` graph steps of the patch boundary."""
    bd = g.boundary_distance
    return (bd >= 0) & (bd < margin)


def check_patch_size(g: PenroseGraph, n: int, margin: int = DEFAULT_MARGIN,
                     safety_factor: float = SAFETY_FACTOR) -> None:
    need = safety_factor * math.sqrt(n) + margin
    if g.safe_radius < need:
        raise ValueError(f"patch graph radius {g.safe_radius} < required {need:.1f} for n={n}")


@dataclass
class WalkPath:
    vertices: np.ndarray
    seed: int
    index: int = 0
    patch_id: str = ""

    @property
    def n(self) -> int:
        return len(self.vertices) - 1


@dataclass
class ScaledPath:
    n: int
    times: np.ndarray
    samples: np.ndarray   # (grid + 1, 2)


@dataclass
class CorrectedPath:
    M: np.ndarray         # (n + 1, 2)


def simulate(g: PenroseGraph, n: int, seed: int, index: int = 0,
             margin: int = DEFAULT_MARGIN, start: int | None = None) -> WalkPath:
    """One walk of ``n`` steps from the origin (or ``start``); raises BoundaryHit on entering the margin."""
    bad = forbidden_mask(g, margin)
    moves = _moves(seed, index, n)
    path = np.empty(n + 1, dtype=np.int64)
    v = g.origin_id if start is None else int(start)
    path[0] = v
    for k in range(n):
        v = g.nbr[v, moves[k]]
        if bad[v]:
            raise BoundaryHit(f"walk {index} reached the boundary margin at step {k + 1}")
        path[k + 1] = v
    return WalkPath(path, int(seed), int(index), patch_id=str(g.patch.params.seed))


@dataclass
class WalkBatch:
    """Summary of many walks: endpoints, checkpoint positions, optional running maxima."""

    master_seed: int
    n: int
    count: int
    checkpoints: tuple[int, ...]
    positions: np.ndarray             # (count, len(checkpoints)) vertex ids
    aborted: np.ndarray               # (count,) bool
    running_max: np.ndarray | None = field(default=None, repr=False)   # (count, len(checkpoints))

    @property
    def endpoints(self) -> np.ndarray:
        return self.positions[:, -1]

    @property
    def abort_count(self) -> int:
        return int(self.aborted.sum())

    def valid(self) -> np.ndarray:
        return ~self.aborted

    def summary(self) -> dict:
        return {"master_seed": self.master_seed, "n": self.n, "walk_count": self.count,
                "abort_count": self.abort_count}


def _run_chunk(g, bad, idx, n, master_seed, checkpoints, track, start):
    b = len(idx)
    moves = np.empty((b, n), dtype=np.uint8)
    for r, i in enumerate(idx):
        moves[r] = _moves(master_seed, i, n)
    pos = np.full(b, start, dtype=np.int64)
    aborted = np.zeros(b, dtype=bool)
    out = np.empty((b, len(checkpoints)), dtype=np.int64)
    rmax = None
    if track is not None:
        rmax = np.empty((b, len(checkpoints)))
        cur = np.full(b, track[start], dtype=float)
    ci = 0
    while ci < len(checkpoints) and checkpoints[ci] == 0:
        out[:, ci] = pos
        if rmax is not None:
            rmax[:, ci] = cur
        ci += 1
    nbr = g.nbr
    for k in range(n):
        nxt = nbr[pos, moves[:, k]]
        hit = bad[nxt]
        if hit.any():
            aborted |= hit
            nxt = np.where(aborted, pos, nxt)
        pos = nxt
        if track is not None:
            np.maximum(cur, track[pos], out=cur)
        while ci < len(checkpoints) and checkpoints[ci] == k + 1:
            out[:, ci] = pos
            if rmax is not None:
                rmax[:, ci] = cur
            ci += 1
    return out, aborted, rmax


def simulate_batch(g: PenroseGraph, n: int, count: int, master_seed: int, *,
                   checkpoints=None, track: np.ndarray | None = None,
                   margin: int = DEFAULT_MARGIN, chunk: int = 4000,
                   threads: int | None = None, start: int | None = None) -> WalkBatch:
    """Run ``count`` independent walks; aborted walks are frozen and flagged, never reflected.

    ``track`` is an optional per-vertex scalar whose running maximum along
    each walk is recorded at every checkpoint.
    """
    cps = sorted({int(c) for c in (checkpoints or ())} | {int(n)})
    if cps[0] < 0 or cps[-1] > n:
        raise ValueError("checkpoints must lie in [0, n]")
    bad = forbidden_mask(g, margin)
    s0 = g.origin_id if start is None else int(start)
    if threads is None:
        threads = int(os.environ.get("PENROSE_RW_THREADS", "1"))
    chunks = [np.arange(s, min(s + chunk, count)) for s in range(0, count, chunk)]

    def job(idx):
        return _run_chunk(g, bad, idx, n, master_seed, cps, track, s0)

    if threads > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(threads) as ex:
            parts = list(ex.map(job, chunks))
    else:
        parts = [job(c) for c in chunks]
    positions = np.concatenate([p[0] for p in parts]) if parts else np.empty((0, len(cps)), dtype=np.int64)
    aborted = np.concatenate([p[1] for p in parts]) if parts else np.empty(0, dtype=bool)
    rmax = None
    if track is not None:
        rmax = np.concatenate([p[2] for p in parts]) if parts else np.empty((0, len(cps)))
    return WalkBatch(int(master_seed), int(n), int(count), tuple(cps), positions, aborted, rmax)


def scale_path(w: WalkPath, g: PenroseGraph, T: float, grid: int) -> ScaledPath:
    """Piecewise-linear diffusive rescaling t -> X_{tn}/sqrt(n) on ``grid + 1`` times in [0, T]."""
    n = w.n
    if n <= 0:
        raise PathTooShort("need at least one step")
    if math.floor(T * n) + 1 > len(w.vertices):
        raise PathTooShort(f"path of {n} steps too short for T={T}")
    X = g.centers[w.vertices]
    ts = np.linspace(0.0, T, grid + 1)
    tn = ts * n
    k = np.floor(tn).astype(np.int64)
    frac = tn - k
    k1 = np.minimum(k + 1, len(X) - 1)
    pts = X[k] + frac[:, None] * (X[k1] - X[k])
    return ScaledPath(n, ts, pts / math.sqrt(n))


def correct_path(w: WalkPath, c: CorrectorField, g: PenroseGraph,
                 margin: int | None = None) -> CorrectedPath:
    """M_k = X_k + chi(X_k)."""
    margin = c.boundary_margin if margin is None else margin
    if forbidden_mask(g, margin)[w.vertices].any():
        raise MarginViolation("path visits vertices inside the boundary margin")
    return CorrectedPath(g.centers[w.vertices] + c.chi[w.vertices])


def write_path_csv(w: WalkPath, g: PenroseGraph, path) -> None:
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["k", "vertex_id", "x", "y"])
        for k, v in enumerate(w.vertices):
            x, y = g.centers[v]
            wr.writerow([k, int(v), repr(float(x)), repr(float(y))])


def write_batch_summary(batch: WalkBatch, path) -> None:
    with open(path, "w") as fh:
        json.dump(batch.summary(), fh, indent=2)
