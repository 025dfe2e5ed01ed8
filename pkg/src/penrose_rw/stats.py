"""Diffusion-matrix estimators and the statistical tests built on them."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import stats as sst

from .corrector import CorrectorField
from .errors import InsufficientSamples
from .graph import PenroseGraph
from .walk import forbidden_mask

BOOTSTRAP_RESAMPLES = 1000
BOOTSTRAP_SEED = 20140704
BLOCK_SIZE = 16.0


@dataclass
class DiffusionEstimate:
    D: np.ndarray            # (2, 2)
    stderr: np.ndarray       # (2, 2) bootstrap standard errors
    halfwidth: np.ndarray    # (2, 2) 95% bootstrap half-widths
    source: str              # "generator" or "empirical"
    sample_count: int

    @property
    def trace(self) -> float:
        return float(np.trace(self.D))

    def eigenvalues(self) -> np.ndarray:
        return np.linalg.eigvalsh(self.D)

    def to_dict(self) -> dict:
        return {"D": self.D.tolist(), "stderr": self.stderr.tolist(), "halfwidth": self.halfwidth.tolist(),
                "source": self.source, "sample_count": self.sample_count}


@dataclass
class TestReport:
    name: str
    statistic: float
    threshold: float
    verdict: bool
    metadata: dict = field(default_factory=dict)

    __test__ = False   # not a pytest class

    def to_dict(self) -> dict:
        return asdict(self)

    def line(self) -> str:
        return f"{'PASS' if self.verdict else 'FAIL'}  {self.name}: statistic={self.statistic:.6g} threshold={self.threshold:.6g}"


def _sym(m: np.ndarray) -> np.ndarray:
    return 0.5 * (m + m.T)


def _bootstrap(values: np.ndarray, weights: np.ndarray | None, estimator, seed: int,
               resamples: int = BOOTSTRAP_RESAMPLES) -> tuple[np.ndarray, np.ndarray]:
    """Standard error and 95% half-width of a 2x2 statistic over resampled units (zeros if resamples < 2)."""
    if resamples < 2:
        return np.zeros((2, 2)), np.zeros((2, 2))
    rng = np.random.default_rng(seed)
    n = len(values)
    reps = np.empty((resamples, 2, 2))
    for b in range(resamples):
        idx = rng.integers(0, n, size=n)
        reps[b] = estimator(values[idx], None if weights is None else weights[idx])
    lo, hi = np.percentile(reps, [2.5, 97.5], axis=0)
    return reps.std(axis=0, ddof=1), 0.5 * (hi - lo)


def local_covariance(g: PenroseGraph, chi: np.ndarray, rows: np.ndarray) -> np.ndarray:
    """(len(rows), 2, 2) one-step covariance (1/4) sum_y m m^T of the corrected walk."""
    m = g.steps[rows] + chi[g.nbr[rows]] - chi[rows][:, None, :]
    return np.einsum("vsa,vsb->vab", m, m) / 4.0


def estimate_D_generator(g: PenroseGraph, c: CorrectorField, margin: int | None = None,
                         block: float = BLOCK_SIZE, seed: int = BOOTSTRAP_SEED) -> DiffusionEstimate:
    """Spatial average of the corrected one-step covariance over vertices at least
    ``margin`` steps from the boundary; errors from a block bootstrap over square cells."""
    margin = c.boundary_margin if margin is None else margin
    rows = np.flatnonzero(g.interior_mask & ~forbidden_mask(g, margin))
    if len(rows) == 0:
        raise InsufficientSamples("no vertices in the statistics region")
    a = local_covariance(g, c.chi, rows)
    D = _sym(a.mean(axis=0))
    cells = np.floor(g.centers[rows] / block).astype(np.int64)
    _, cell = np.unique(cells, axis=0, return_inverse=True)
    cell = cell.ravel()
    nb = cell.max() + 1
    sums = np.zeros((nb, 2, 2))
    np.add.at(sums, cell, a)
    counts = np.bincount(cell, minlength=nb).astype(float)
    if nb > 1:
        se, hw = _bootstrap(sums, counts, lambda s, w: _sym(s.sum(axis=0) / w.sum()), seed)
    else:
        se = hw = np.zeros((2, 2))
    return DiffusionEstimate(D, se, hw, "generator", int(len(rows)))


def _cov(x: np.ndarray) -> np.ndarray:
    xc = x - x.mean(axis=0)
    return (xc.T @ xc) / (len(x) - 1)


def estimate_D_empirical(endpoints, n: int, min_samples: int = 1000,
                         seed: int = BOOTSTRAP_SEED, resamples: int = BOOTSTRAP_RESAMPLES) -> DiffusionEstimate:
    """Sample covariance of M_n / sqrt(n) with bootstrap errors.

    ``endpoints`` is an (N, 2) array of M_n or a sequence of CorrectedPath.
    """
    if not isinstance(endpoints, np.ndarray):
        endpoints = np.array([p.M[-1] for p in endpoints])
    x = np.asarray(endpoints, dtype=float).reshape(-1, 2)
    if len(x) < min_samples:
        raise InsufficientSamples(f"{len(x)} paths < {min_samples}")
    if n == 0:
        z = np.zeros((2, 2))
        return DiffusionEstimate(z, z.copy(), z.copy(), "empirical", len(x))
    y = x / math.sqrt(n)
    D = _cov(y)
    se, hw = _bootstrap(y, None, lambda s, w: _cov(s), seed, resamples)
    return DiffusionEstimate(D, se, hw, "empirical", len(x))


def positive_definite_report(d: DiffusionEstimate, ratio: float = 0.1) -> TestReport:
    ev = d.eigenvalues()
    stat = float(ev[0] / ev[1]) if ev[1] > 0 else 0.0
    return TestReport("D positive definite (min/max eigenvalue)", stat, ratio, bool(ev[0] > 0 and stat >= ratio),
                      {"eigenvalues": ev.tolist(), "D": d.D.tolist()})


def isotropy_test(d: DiffusionEstimate) -> TestReport:
    """|D11 - D22| <= max(5% D11, 3 se) and |D12| <= max(2% D11, 3 se)."""
    D, se = d.D, d.stderr
    diff = abs(D[0, 0] - D[1, 1])
    se_diff = math.hypot(se[0, 0], se[1, 1])
    tol_diag = max(0.05 * D[0, 0], 3 * se_diff)
    tol_off = max(0.02 * D[0, 0], 3 * se[0, 1])
    ok = diff <= tol_diag and abs(D[0, 1]) <= tol_off
    stat = max(diff / tol_diag, abs(D[0, 1]) / tol_off) if tol_diag > 0 and tol_off > 0 else math.inf
    return TestReport("isotropy", float(stat), 1.0, bool(ok),
                      {"D": D.tolist(), "stderr": se.tolist(), "source": d.source,
                       "diag_diff": diff, "diag_tol": tol_diag, "offdiag": float(D[0, 1]), "offdiag_tol": tol_off})


def agreement_test(a: DiffusionEstimate, b: DiffusionEstimate, slack_fraction: float = 0.0,
                   name: str = "D agreement") -> TestReport:
    """Entrywise |a - b| <= a.halfwidth + b.halfwidth + slack_fraction * trace/2.

    The statistic is the worst ratio of difference to allowance (pass iff <= 1).
    """
    slack = slack_fraction * 0.5 * max(a.trace, b.trace)
    allow = a.halfwidth + b.halfwidth + slack
    diff = np.abs(a.D - b.D)
    ratio = np.where(allow > 0, diff / np.where(allow > 0, allow, 1.0), np.where(diff > 0, np.inf, 0.0))
    stat = float(ratio.max())
    return TestReport(name, stat, 1.0, bool(stat <= 1.0),
                      {"D_a": a.D.tolist(), "D_b": b.D.tolist(), "allowance": allow.tolist(),
                       "sources": [a.source, b.source]})


def mean_centering_test(endpoints: np.ndarray, n: int, k: float = 3.0) -> TestReport:
    """Norm of the sample mean of M_n/sqrt(n) in units of its standard error."""
    y = np.asarray(endpoints, dtype=float) / math.sqrt(n)
    mean = y.mean(axis=0)
    cov = _cov(y) / len(y)
    # Mahalanobis-free: compare each component, report the worse one
    z = np.abs(mean) / np.sqrt(np.diag(cov))
    stat = float(z.max())
    return TestReport("mean of M_n/sqrt(n) within 3 stderr of 0", stat, k, bool(stat <= k),
                      {"mean": mean.tolist(), "stderr": np.sqrt(np.diag(cov)).tolist()})


def gaussianity_test(endpoints, min_samples: int = 5000, bins: int = 20,
                     kurtosis_bound: float = 0.2, p_min: float = 0.01) -> TestReport:
    """Standardize by the sample covariance, then check kurtosis and the law of |Z|^2.

    ``endpoints`` is an (N, 2) array of B_n(1) values or a sequence of ScaledPath.
    """
    if not isinstance(endpoints, np.ndarray):
        endpoints = np.array([p.samples[-1] for p in endpoints])
    x = np.asarray(endpoints, dtype=float).reshape(-1, 2)
    if len(x) < min_samples:
        raise InsufficientSamples(f"{len(x)} endpoints < {min_samples}")
    xc = x - x.mean(axis=0)
    L = np.linalg.cholesky(_cov(x))
    z = np.linalg.solve(L, xc.T).T
    kurt = sst.kurtosis(z, axis=0, fisher=True, bias=False)
    r2 = (z ** 2).sum(axis=1)
    # equiprobable bins for the Exp(mean 2) law of a standard 2D Gaussian radius^2
    edges = -2.0 * np.log1p(-np.arange(1, bins) / bins)
    observed = np.bincount(np.searchsorted(edges, r2), minlength=bins)
    expected = np.full(bins, len(r2) / bins)
    p = float(sst.chisquare(observed, expected).pvalue)
    ok = bool(np.all(np.abs(kurt) <= kurtosis_bound) and p >= p_min)
    return TestReport("gaussianity", p, p_min, ok,
                      {"excess_kurtosis": kurt.tolist(), "kurtosis_bound": kurtosis_bound,
                       "chi2_p": p, "bins": bins, "count": len(x)})


def corrector_influence(batch, c: CorrectorField | None = None, g: PenroseGraph | None = None,
                        ladder=None, shrink: float = 0.6, q: float = 95.0) -> TestReport:
    """95th percentile of max_{k<=n} |chi(X_k)| / sqrt(n) along a doubling ladder of n.

    ``batch`` is a WalkBatch simulated with ``track=|chi|`` (its checkpoints form
    the ladder) or a sequence of WalkPath, in which case ``c`` supplies chi.
    Passes iff the last percentile is at most ``shrink`` times the first.
    """
    if hasattr(batch, "running_max"):
        if batch.running_max is None:
            raise ValueError("batch was simulated without a tracked field")
        cps = list(batch.checkpoints)
        ladder = [n for n in (ladder or cps) if n > 0]
        ok_rows = batch.valid()
        maxima = {n: batch.running_max[ok_rows, cps.index(n)] for n in ladder}
    else:
        if c is None or ladder is None:
            raise ValueError("paths need a corrector and a ladder")
        norm = c.norm()
        maxima = {n: np.array([norm[w.vertices[: n + 1]].max() for w in batch]) for n in ladder}
    pct = [float(np.percentile(maxima[n] / math.sqrt(n), q)) for n in ladder]
    stat = pct[-1] / pct[0] if pct[0] > 0 else 0.0
    return TestReport("corrector influence", stat, shrink, bool(pct[-1] <= shrink * pct[0]),
                      {"ladder": list(ladder), "percentiles": pct, "quantile": q})
