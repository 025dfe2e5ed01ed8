"""Finite-patch corrector: drift, resolvent and harmonic-coordinate solves, diagnostics.

Both solves work on the interior vertices (degree 4) with the corrector
pinned to zero on every degree-deficient vertex.  The operator
``(1 + eps) I - Q`` restricted to the interior is symmetric positive definite,
so conjugate gradients apply; an algebraic-multigrid preconditioner keeps
the iteration count flat in the patch size.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np
import pyamg
import scipy.sparse as sp
from scipy.sparse.linalg import cg

from .errors import NoConvergence, OutOfRange
from .graph import PenroseGraph, build_graph
from .tiling import origin_ribbons, shifted_patch

SOLVER_RTOL = 1e-10
DEFAULT_MARGIN = 10


def iteration_cap(n: int) -> int:
    return int(50 * np.sqrt(n)) + 1000


@dataclass(frozen=True)
class DriftField:
    V: np.ndarray        # (N, 2); NaN off the interior
    interior: np.ndarray

    def at(self, v: int) -> np.ndarray:
        return self.V[v]


@dataclass
class CorrectorField:
    chi: np.ndarray          # (N, 2), zero at the origin
    epsilon: float           # 0 for the harmonic route
    residual: float
    boundary_margin: int = DEFAULT_MARGIN
    iterations: tuple[int, int] = (0, 0)
    raw: np.ndarray | None = field(default=None, repr=False)   # solution before origin normalisation

    def norm(self) -> np.ndarray:
        return np.hypot(self.chi[:, 0], self.chi[:, 1])


@dataclass(frozen=True)
class SublinearityProfile:
    ns: list[int]
    max_ratio: list[float]
    ks: list[int]
    ribbon_ratio: list[list[float]]   # one list per origin ribbon


def drift_field(g: PenroseGraph) -> DriftField:
    """Mean step (1/4) sum of the four steps, at interior vertices."""
    V = np.full((len(g), 2), np.nan)
    m = g.interior_mask
    V[m] = g.steps[m].sum(axis=1) / 4.0
    return DriftField(V, m.copy())


def _interior_operator(g: PenroseGraph, epsilon: float):
    """Sparse (1 + eps) I - Q on interior vertices and the interior index map."""
    inter = np.flatnonzero(g.interior_mask)
    pos = np.full(len(g), -1, dtype=np.int64)
    pos[inter] = np.arange(len(inter))
    nb = g.nbr[inter]
    rows = np.repeat(np.arange(len(inter)), 4)
    cols = pos[nb.ravel()]
    keep = cols >= 0
    n = len(inter)
    A = sp.csr_matrix((np.full(keep.sum(), -0.25), (rows[keep], cols[keep])), shape=(n, n))
    A = A + sp.identity(n, format="csr") * (1.0 + epsilon)
    return A.tocsr(), inter, pos


def _solve(A, B: np.ndarray, precondition: bool) -> tuple[np.ndarray, tuple[int, ...]]:
    n = A.shape[0]
    M = None
    if precondition:
        # local Jacobi weighting avoids pyamg's randomized spectral-radius estimate,
        # which draws from numpy's global RNG and breaks bitwise reproducibility
        ml = pyamg.smoothed_aggregation_solver(A, symmetry="symmetric", smooth=("jacobi", {"weighting": "local"}))
        M = ml.aspreconditioner()
    cap = iteration_cap(n)
    X = np.zeros_like(B)
    its = []
    for c in range(B.shape[1]):
        count = [0]

        def tick(_):
            count[0] += 1

        x, info = cg(A, B[:, c], rtol=SOLVER_RTOL, atol=0.0, maxiter=cap, M=M, callback=tick)
        if info != 0:
            raise NoConvergence(f"CG stopped after {count[0]} iterations (info={info})")
        X[:, c] = x
        its.append(count[0])
    return X, tuple(its)


def _interior_residual(g: PenroseGraph, epsilon: float, psi: np.ndarray, V: np.ndarray) -> float:
    """max over interior x of |(1 + eps) psi(x) - (1/4) sum_y psi(y) - V(x)|."""
    m = g.interior_mask
    nb = g.nbr[m]
    avg = psi[nb].sum(axis=1) / 4.0
    r = (1.0 + epsilon) * psi[m] - avg - V[m]
    return float(np.abs(r).max()) if len(r) else 0.0


def _check_interior(g: PenroseGraph):
    if not g.interior_mask.any():
        raise ValueError("graph has no interior vertices")


def solve_resolvent(g: PenroseGraph, epsilon: float, drift: np.ndarray | None = None,
                    margin: int = DEFAULT_MARGIN, precondition: bool = True) -> CorrectorField:
    """Solve (1 + eps - Q) psi = V with psi = 0 off the interior; chi = psi - psi(origin)."""
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    _check_interior(g)
    V = drift_field(g).V if drift is None else np.asarray(drift, dtype=float)
    A, inter, _ = _interior_operator(g, epsilon)
    X, its = _solve(A, V[inter], precondition)
    psi = np.zeros((len(g), 2))
    psi[inter] = X
    res = _interior_residual(g, epsilon, psi, V)
    return CorrectorField(psi - psi[g.origin_id], float(epsilon), res, margin, its, psi)


def solve_harmonic(g: PenroseGraph, boundary_offset: np.ndarray | None = None,
                   drift: np.ndarray | None = None, margin: int = DEFAULT_MARGIN) -> CorrectorField:
    """Harmonic coordinates phi = x + chi with phi(x) = x (+ offset) on the boundary.

    ``boundary_offset`` (N, 2) gives chi on degree-deficient vertices (default 0).
    The residual is the max interior martingale defect
    ``|(1/4) sum_y (y + chi(y)) - (x + chi(x))|``.
    """
    _check_interior(g)
    V = drift_field(g).V if drift is None else np.asarray(drift, dtype=float)
    A, inter, _ = _interior_operator(g, 0.0)
    chi = np.zeros((len(g), 2))
    if boundary_offset is not None:
        bnd = ~g.interior_mask
        chi[bnd] = np.asarray(boundary_offset, dtype=float)[bnd]
    rhs = V[inter].copy()
    if boundary_offset is not None:
        # chi is still zero on the interior here
        rhs += 0.25 * chi[g.nbr[inter]].sum(axis=1)
    X, its = _solve(A, rhs, True)
    chi[inter] = X
    res = _interior_residual(g, 0.0, chi, V)
    return CorrectorField(chi - chi[g.origin_id], 0.0, res, margin, its, chi)


def martingale_residual(g: PenroseGraph, chi: np.ndarray) -> np.ndarray:
    """Per-interior-vertex defect |(1/4) sum_y (step + chi(y)) - chi(x)|."""
    m = g.interior_mask
    nb = g.nbr[m]
    d = (g.steps[m] + chi[nb]).sum(axis=1) / 4.0 - chi[m]
    return np.hypot(d[:, 0], d[:, 1])


def resolvent_scan(g: PenroseGraph, epsilons=(1.0, 1e-1, 1e-2, 1e-3)) -> list[tuple[float, float]]:
    """(eps, eps * patch-mean |psi_eps|^2) along the given epsilons."""
    out = []
    for eps in epsilons:
        c = solve_resolvent(g, eps)
        psi = c.raw[g.interior_mask]
        out.append((float(eps), float(eps * (psi ** 2).sum(axis=1).mean())))
    return out


def cocycle_check(c: CorrectorField, g: PenroseGraph, pairs, solver=solve_harmonic) -> float:
    """Max over (x, y) of |(chi(x) - chi(y)) - chi'(x - y)|.

    ``chi'`` is the corrector recomputed on the disk of the same radius centred
    at tile ``y``; ``x - y`` is the tile ``x`` seen from there.  The value is a
    finite-patch approximation error.
    """
    patch = g.patch
    by_y: dict[int, list[int]] = {}
    for x, y in pairs:
        by_y.setdefault(int(y), []).append(int(x))
    worst = 0.0
    for y, xs in by_y.items():
        sp_ = shifted_patch(patch, y)
        g2 = build_graph(sp_)
        c2 = solver(g2)
        for x in xs:
            k = sp_.index[patch.key_of(x)]
            d = (c.chi[x] - c.chi[y]) - c2.chi[k]
            worst = max(worst, float(np.hypot(*d)))
    return worst


def sublinearity_profile(c: CorrectorField, g: PenroseGraph, ns, ks=None) -> SublinearityProfile:
    """max_{|x| <= n} |chi(x)| / n over graph balls, and |chi(z_k)| / k along the origin ribbons."""
    ns = [int(n) for n in ns]
    limit = g.safe_radius - c.boundary_margin
    if max(ns) > limit:
        raise OutOfRange(f"n={max(ns)} exceeds safe interior radius {limit}")
    norm = c.norm()
    dist = g.distances
    max_ratio = []
    for n in ns:
        ball = (dist >= 0) & (dist <= n)
        max_ratio.append(float(norm[ball].max() / n))
    ks = ns if ks is None else [int(k) for k in ks]
    if ks and max(ks) > limit:
        raise OutOfRange(f"k={max(ks)} exceeds safe interior radius {limit}")
    ribbon_ratio = []
    for rib in origin_ribbons(g.patch):
        start = int(np.flatnonzero(rib.rows == g.origin_id)[0])
        ratios = []
        for k in ks:
            if start + k >= len(rib.rows):
                raise OutOfRange(f"ribbon too short for k={k}")
            ratios.append(float(norm[rib.rows[start + k]] / k))
        ribbon_ratio.append(ratios)
    return SublinearityProfile(ns, max_ratio, ks, ribbon_ratio)


def write_corrector_csv(c: CorrectorField, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["vertex_id", "chi_x", "chi_y"])
        for v, (x, y) in enumerate(c.chi):
            w.writerow([v, repr(float(x)), repr(float(y))])


def write_profile_csv(prof: SublinearityProfile, path_n, path_k) -> None:
    with open(path_n, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["n", "max_ratio"])
        for n, r in zip(prof.ns, prof.max_ratio):
            w.writerow([n, repr(r)])
    with open(path_k, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["ribbon", "k", "ribbon_ratio"])
        for r, ratios in enumerate(prof.ribbon_ratio):
            for k, v in zip(prof.ks, ratios):
                w.writerow([r, k, repr(v)])
