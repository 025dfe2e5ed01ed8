"""End-to-end runs: environment preparation, the verify bundle, quenched comparison."""
from __future__ import annotations

import json
import math
import os
import shlex
from dataclasses import asdict, dataclass, field, fields
from datetime import datetime, timezone
from functools import cached_property

import numpy as np

from . import stats
from .corrector import DEFAULT_MARGIN, CorrectorField, martingale_residual, solve_harmonic, sublinearity_profile
from .errors import InsufficientSamples, OutOfRange, SingularGrid
from .graph import PenroseGraph, build_graph
from .pentagrid import TAU, GridParams, sample_environment
from .tiling import Patch, build_patch, covered_area, edge_matching_violations
from .walk import check_patch_size, simulate_batch

MAX_RESAMPLES = 10
BUNDLE_SCHEMA_ID = "penrose-rw/verify-bundle/v1"

BUNDLE_SCHEMA = {
    "type": "object",
    "required": ["schema", "config", "environment", "reports", "all_pass", "reproduce"],
    "properties": {
        "schema": {"const": BUNDLE_SCHEMA_ID},
        "config": {"type": "object"},
        "environment": {
            "type": "object",
            "required": ["gamma", "torus", "seed"],
            "properties": {
                "gamma": {"type": "array", "items": {"type": "number"}, "minItems": 5, "maxItems": 5},
                "torus": {"type": "array", "items": {"type": "integer"}, "minItems": 2, "maxItems": 2},
                "seed": {"type": "integer"},
            },
        },
        "reports": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["name", "statistic", "threshold", "verdict", "metadata"],
                "properties": {
                    "name": {"type": "string"},
                    "statistic": {"type": ["number", "null"]},
                    "threshold": {"type": "number"},
                    "verdict": {"type": "boolean"},
                    "metadata": {"type": "object"},
                },
            },
        },
        "all_pass": {"type": "boolean"},
        "reproduce": {"type": "string"},
        "generated_at": {"type": "string"},
    },
}


@dataclass
class RunConfig:
    command: str = "verify"
    seed: int = 42
    seeds: list[int] = field(default_factory=list)
    radius: float = 600.0
    n: int = 5000
    walks: int = 20000
    master_seed: int = 1
    epsilons: list[float] = field(default_factory=lambda: [1.0, 0.1, 0.01, 0.001])
    ns: list[int] = field(default_factory=lambda: [15, 30, 60])
    ladder: list[int] = field(default_factory=lambda: [500, 2000, 8000])
    margin: int = DEFAULT_MARGIN
    out: str = "penrose_out"
    color_by: str = "shape"
    svg: bool = True
    figures: bool = True
    threads: int | None = None
    zero_chi: bool = False

    def validate(self) -> None:
        for name in ("radius", "n", "walks", "margin"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.radius < 2:
            raise ValueError("radius must be at least 2 (one tile plus its neighbours)")
        if any(e <= 0 for e in self.epsilons) or any(v <= 0 for v in self.ns) or any(v <= 0 for v in self.ladder):
            raise ValueError("epsilon / ns / ladder entries must be positive")
        if self.color_by not in ("chi", "shape", "class"):
            raise ValueError("color_by must be chi, shape or class")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        names = {f.name for f in fields(cls)}
        unknown = set(d) - names
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**d)

    def save(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2, sort_keys=True)

    @classmethod
    def load(cls, path) -> "RunConfig":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))

    def reproduce(self) -> str:
        parts = ["penrose-rw", self.command, "--seed", str(self.seed), "--radius", repr(self.radius),
                 "--n", str(self.n), "--walks", str(self.walks), "--master-seed", str(self.master_seed),
                 "--margin", str(self.margin)]
        if self.seeds:
            parts += ["--seeds", ",".join(map(str, self.seeds))]
        if self.ladder:
            parts += ["--ladder", ",".join(map(str, self.ladder))]
        if self.zero_chi:
            parts.append("--zero-chi")
        return " ".join(shlex.quote(p) for p in parts)


@dataclass(eq=False)
class Environment:
    requested_seed: int
    params: GridParams
    patch: Patch
    margin: int = DEFAULT_MARGIN

    @cached_property
    def graph(self) -> PenroseGraph:
        return build_graph(self.patch)

    @cached_property
    def corrector(self) -> CorrectorField:
        return solve_harmonic(self.graph, margin=self.margin)


def prepare_environment(seed: int, radius: float, margin: int = DEFAULT_MARGIN,
                        retries: int = MAX_RESAMPLES) -> Environment:
    """Sample a pentagrid and build its patch, resampling with seed+1, seed+2, ... on a triple point."""
    for attempt in range(retries):
        params = sample_environment(seed + attempt)
        try:
            patch = build_patch(params, radius)
        except SingularGrid:
            continue
        return Environment(seed, params, patch, margin)
    raise SingularGrid(f"no regular pentagrid after {retries} draws from seed {seed}")


def tiling_reports(patch: Patch, g: PenroseGraph) -> list[stats.TestReport]:
    r = patch.radius
    viol = edge_matching_violations(patch)
    deep = np.hypot(*patch.centers.T) <= r - 2
    bad_deg = int((g.degree[deep] != 4).sum())
    disk = r - 2
    area = covered_area(patch, disk)
    rel = abs(area / (math.pi * disk * disk) - 1.0)
    counts = patch.shape_counts()
    ratio = counts["thick"] / counts["thin"]
    return [
        stats.TestReport("edge matching violations", float(viol), 0.0, viol == 0, {}),
        stats.TestReport("interior tiles with degree != 4", float(bad_deg), 0.0, bad_deg == 0,
                         {"checked": int(deep.sum())}),
        stats.TestReport("disk coverage relative error", rel, 1e-6, rel <= 1e-6, {"disk_radius": disk}),
        stats.TestReport("thick/thin ratio vs tau", abs(ratio / TAU - 1.0), 0.02, abs(ratio / TAU - 1.0) <= 0.02,
                         {"thick": counts["thick"], "thin": counts["thin"], "ratio": ratio}),
    ]


def _failed(name: str, exc: Exception) -> stats.TestReport:
    return stats.TestReport(name, None, 0.0, False, {"error": f"{type(exc).__name__}: {exc}"})


@dataclass
class VerifyResult:
    bundle: dict
    env: Environment
    batch: object = None
    profile: object = None


def run_verify(cfg: RunConfig, stamp: bool = True) -> VerifyResult:
    """generate -> graph -> corrector -> walks -> stats, collected into a verdict bundle."""
    cfg.validate()
    env = prepare_environment(cfg.seed, cfg.radius, cfg.margin)
    g = env.graph
    reports = tiling_reports(env.patch, g)

    c = env.corrector
    if cfg.zero_chi:
        c = CorrectorField(np.zeros_like(c.chi), 0.0, c.residual, c.boundary_margin)
    res = martingale_residual(g, c.chi)
    reports.append(stats.TestReport("corrector harmonicity residual", float(res.max()), 1e-8,
                                    bool(res.max() <= 1e-8), {"solver_iterations": list(c.iterations)}))
    try:
        profile = sublinearity_profile(c, g, cfg.ns)
    except OutOfRange:
        # informational only; small patches cannot host the ns ladder
        profile = None

    dg = stats.estimate_D_generator(g, c, cfg.margin)
    reports.append(stats.positive_definite_report(dg))
    reports.append(stats.isotropy_test(dg))

    ladder = sorted(set(cfg.ladder))
    steps = max([cfg.n] + ladder)
    batch = None
    try:
        check_patch_size(g, steps, cfg.margin)
        batch = simulate_batch(g, steps, cfg.walks, cfg.master_seed, checkpoints=ladder + [cfg.n],
                               track=c.norm(), margin=cfg.margin, threads=cfg.threads)
        ok = batch.valid()
        at_n = batch.positions[ok, batch.checkpoints.index(cfg.n)]
        X = g.centers[at_n]
        M = X + c.chi[at_n]
        reports.append(stats.TestReport("walk aborts", float(batch.abort_count), 0.0, batch.abort_count == 0,
                                        batch.summary()))
        for name, fn in (
            ("empirical vs generator D", lambda: stats.agreement_test(
                stats.estimate_D_empirical(M, cfg.n), dg, name="empirical vs generator D")),
            ("mean centering", lambda: stats.mean_centering_test(M, cfg.n)),
            ("gaussianity", lambda: stats.gaussianity_test(X / math.sqrt(cfg.n))),
            ("raw vs corrected covariance", lambda: raw_vs_corrected(X, M, cfg.n)),
            ("corrector influence", lambda: stats.corrector_influence(batch, ladder=ladder)),
        ):
            try:
                reports.append(fn())
            except (InsufficientSamples, ValueError, np.linalg.LinAlgError) as exc:
                reports.append(_failed(name, exc))
    except ValueError as exc:
        reports.append(_failed("walk batch", exc))

    bundle = {
        "schema": BUNDLE_SCHEMA_ID,
        "config": cfg.to_dict(),
        "environment": env.params.to_dict(),
        "patch": {"radius": env.patch.radius, "tiles": len(env.patch), "safe_radius": g.safe_radius},
        "reports": [r.to_dict() for r in reports],
        "all_pass": all(r.verdict for r in reports),
        "reproduce": cfg.reproduce(),
    }
    if profile is not None:
        bundle["sublinearity"] = {"ns": profile.ns, "max_ratio": profile.max_ratio,
                                  "ribbon_ratio": profile.ribbon_ratio}
    bundle = json.loads(json.dumps(bundle, default=_jsonable))
    if stamp:
        bundle["generated_at"] = datetime.now(timezone.utc).isoformat()
    return VerifyResult(bundle, env, batch, profile)


def raw_vs_corrected(X: np.ndarray, M: np.ndarray, n: int, fraction: float = 0.05) -> stats.TestReport:
    """Entrywise |Cov(X_n) - Cov(M_n)| / n within ``fraction`` of trace/2."""
    a = stats.estimate_D_empirical(X, n, resamples=0)
    b = stats.estimate_D_empirical(M, n, resamples=0)
    allow = fraction * 0.5 * max(a.trace, b.trace)
    diff = float(np.abs(a.D - b.D).max())
    return stats.TestReport("raw vs corrected covariance", diff / allow, 1.0, diff <= allow,
                            {"D_raw": a.D.tolist(), "D_corrected": b.D.tolist(), "allowance": allow})


def _jsonable(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(type(o))


def empirical_D_for(env: Environment, n: int, walks: int, master_seed: int, margin: int = DEFAULT_MARGIN,
                    threads: int | None = None) -> stats.DiffusionEstimate:
    g, c = env.graph, env.corrector
    check_patch_size(g, n, margin)
    batch = simulate_batch(g, n, walks, master_seed, margin=margin, threads=threads)
    v = batch.endpoints[batch.valid()]
    return stats.estimate_D_empirical(g.centers[v] + c.chi[v], n)


def quenched_comparison(seeds, walks: int, n: int, radius: float, master_seed: int = 1,
                        slack_fraction: float = 0.05, margin: int = DEFAULT_MARGIN,
                        threads: int | None = None, min_environments: int = 5) -> stats.TestReport:
    """Empirical D per environment; pass iff every pair agrees within intervals + slack * trace/2."""
    seeds = list(seeds)
    if len(seeds) < min_environments:
        raise ValueError(f"need at least {min_environments} environments")
    estimates = []
    for s in seeds:
        env = prepare_environment(s, radius, margin)
        estimates.append(empirical_D_for(env, n, walks, master_seed, margin, threads))
        # environments are large; drop them as we go
        del env
    worst = 0.0
    for a in range(len(estimates)):
        for b in range(a + 1, len(estimates)):
            worst = max(worst, stats.agreement_test(estimates[a], estimates[b], slack_fraction).statistic)
    return stats.TestReport("quenched comparison", worst, 1.0, bool(worst <= 1.0),
                            {"seeds": seeds, "n": n, "walks": walks, "master_seed": master_seed,
                             "estimates": [e.to_dict() for e in estimates]})


def write_bundle(bundle: dict, out_dir) -> str:
    os.makedirs(out_dir, exist_ok=True)
    path = os.path.join(out_dir, "verdict.json")
    with open(path, "w") as fh:
        json.dump(bundle, fh, indent=2, sort_keys=True)
    with open(os.path.join(out_dir, "summary.csv"), "w") as fh:
        fh.write("name,statistic,threshold,verdict\n")
        for r in bundle["reports"]:
            fh.write(f"\"{r['name']}\",{r['statistic']},{r['threshold']},{'pass' if r['verdict'] else 'fail'}\n")
    return path
