"""penrose-rw command line: generate | render | corrector | walk | estimate-d | verify.

Exit codes: 0 success, 1 test failure, 2 usage error, 3 numerical failure.
"""
from __future__ import annotations

import argparse
import json
import math
import os
import sys

import numpy as np

from . import plotting, stats
from .corrector import resolvent_scan, sublinearity_profile, write_corrector_csv, write_profile_csv
from .errors import NoConvergence, OutOfRange, SingularGrid
from .graph import write_edge_csv, write_vertex_csv
from .pipeline import (
    RunConfig,
    prepare_environment,
    quenched_comparison,
    run_verify,
    write_bundle,
)
from .svg import write_svg
from .tiling import Patch
from .walk import check_patch_size, simulate, simulate_batch, write_batch_summary, write_path_csv

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_NUMERIC = 0, 1, 2, 3


def _int_list(s):
    return [int(x) for x in s.split(",") if x]


def _float_list(s):
    return [float(x) for x in s.split(",") if x]


def _add_common(p):
    p.add_argument("--config", help="JSON run config; explicit flags override it")
    p.add_argument("--seed", type=int, help="environment seed")
    p.add_argument("--radius", type=float, help="patch radius (tiling units)")
    p.add_argument("--margin", type=int, help="boundary margin in graph steps")
    p.add_argument("--out", help="output directory")
    p.add_argument("--threads", type=int, help="worker threads (env PENROSE_RW_THREADS)")


def _add_walks(p):
    p.add_argument("--n", type=int, help="walk length")
    p.add_argument("--walks", type=int, help="number of walks")
    p.add_argument("--master-seed", dest="master_seed", type=int, help="walk master seed")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="penrose-rw", description="Random walks on Penrose tilings.")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="sample an environment and build a patch")
    _add_common(p)
    p.add_argument("--color-by", dest="color_by", choices=["shape", "class"])
    p.add_argument("--no-svg", dest="svg", action="store_false", default=None)

    p = sub.add_parser("render", help="render a saved patch to SVG")
    p.add_argument("patch", help="patch JSON written by generate")
    p.add_argument("--corrector", help="chi CSV written by the corrector command")
    p.add_argument("--color-by", dest="color_by", choices=["chi", "shape", "class"], default="shape")
    p.add_argument("-o", "--output", required=True)

    p = sub.add_parser("corrector", help="solve the corrector and its diagnostics")
    _add_common(p)
    p.add_argument("--epsilons", type=_float_list, help="resolvent scan, comma separated")
    p.add_argument("--ns", type=_int_list, help="sublinearity radii, comma separated")
    p.add_argument("--no-figures", dest="figures", action="store_false", default=None)
    p.add_argument("--no-svg", dest="svg", action="store_false", default=None)

    p = sub.add_parser("walk", help="simulate a batch of walks")
    _add_common(p)
    _add_walks(p)

    p = sub.add_parser("estimate-d", help="generator and empirical diffusion matrices")
    _add_common(p)
    _add_walks(p)
    p.add_argument("--seeds", type=_int_list, help="several environments: run the quenched comparison")
    p.add_argument("--no-figures", dest="figures", action="store_false", default=None)

    p = sub.add_parser("verify", help="full pipeline with a JSON verdict bundle")
    _add_common(p)
    _add_walks(p)
    p.add_argument("--ladder", type=_int_list, help="corrector-influence walk lengths")
    p.add_argument("--ns", type=_int_list)
    p.add_argument("--json", action="store_true", help="print the bundle to stdout")
    p.add_argument("--zero-chi", dest="zero_chi", action="store_true", default=None,
                   help="debug: replace the corrector by zero")
    p.add_argument("--no-figures", dest="figures", action="store_false", default=None)
    return ap


def config_from_args(args) -> RunConfig:
    cfg = RunConfig.load(args.config) if getattr(args, "config", None) else RunConfig()
    cfg.command = args.command
    for name in ("seed", "seeds", "radius", "n", "walks", "master_seed", "epsilons", "ns", "ladder",
                 "margin", "out", "color_by", "svg", "figures", "threads", "zero_chi"):
        val = getattr(args, name, None)
        if val is not None:
            setattr(cfg, name, val)
    if cfg.threads is None:
        cfg.threads = int(os.environ.get("PENROSE_RW_THREADS", os.cpu_count() or 1))
    return cfg


def _say(msg=""):
    print(msg, flush=True)


def cmd_generate(cfg: RunConfig) -> int:
    env = prepare_environment(cfg.seed, cfg.radius, cfg.margin)
    g = env.graph
    os.makedirs(cfg.out, exist_ok=True)
    with open(os.path.join(cfg.out, "patch.json"), "w") as fh:
        fh.write(env.patch.to_json())
    write_vertex_csv(g, os.path.join(cfg.out, "vertices.csv"))
    write_edge_csv(g, os.path.join(cfg.out, "edges.csv"))
    if cfg.svg:
        write_svg(env.patch, os.path.join(cfg.out, "patch.svg"),
                  color_by=cfg.color_by if cfg.color_by != "chi" else "shape")
    counts = env.patch.shape_counts()
    _say(f"environment: {env.params.to_json()}")
    _say(f"tiles: {len(env.patch)}  thick: {counts['thick']}  thin: {counts['thin']}  "
         f"thick/thin: {counts['thick'] / counts['thin']:.6f}")
    classes = np.bincount(env.patch.rotation_classes, minlength=11)[1:]
    _say("by rotation class: " + " ".join(f"{c + 1}:{int(v)}" for c, v in enumerate(classes)))
    _say(f"reproduce: {cfg.reproduce()}")
    return EXIT_OK


def cmd_render(args) -> int:
    with open(args.patch) as fh:
        patch = Patch.from_json(fh.read())
    chi = None
    if args.color_by == "chi":
        if not args.corrector:
            raise ValueError("--color-by=chi needs --corrector")
        data = np.loadtxt(args.corrector, delimiter=",", skiprows=1)
        chi = np.zeros((len(patch), 2))
        chi[data[:, 0].astype(int)] = data[:, 1:3]
    write_svg(patch, args.output, color_by=args.color_by, chi=chi)
    _say(f"wrote {args.output}")
    return EXIT_OK


def cmd_corrector(cfg: RunConfig) -> int:
    env = prepare_environment(cfg.seed, cfg.radius, cfg.margin)
    g, c = env.graph, env.corrector
    os.makedirs(cfg.out, exist_ok=True)
    write_corrector_csv(c, os.path.join(cfg.out, "chi.csv"))
    _say(f"harmonic corrector: residual {c.residual:.3e}, CG iterations {c.iterations}, max|chi| {c.norm().max():.4f}")
    try:
        prof = sublinearity_profile(c, g, cfg.ns)
        write_profile_csv(prof, os.path.join(cfg.out, "sublinearity_n.csv"),
                          os.path.join(cfg.out, "sublinearity_k.csv"))
        for n, r in zip(prof.ns, prof.max_ratio):
            _say(f"n={n:4d}  max|chi|/n={r:.5f}")
        if cfg.figures:
            plotting.plot_sublinearity(prof, os.path.join(cfg.out, "sublinearity.png"))
    except OutOfRange as exc:
        _say(f"sublinearity profile skipped: {exc}")
    if cfg.epsilons:
        scan = resolvent_scan(g, cfg.epsilons)
        with open(os.path.join(cfg.out, "resolvent_scan.csv"), "w") as fh:
            fh.write("epsilon,eps_mean_psi_sq\n")
            for e, v in scan:
                fh.write(f"{e!r},{v!r}\n")
                _say(f"eps={e:g}  eps*mean|psi|^2={v:.4e}")
        if cfg.figures:
            plotting.plot_resolvent_scan(scan, os.path.join(cfg.out, "resolvent_scan.png"))
    if cfg.svg:
        write_svg(env.patch, os.path.join(cfg.out, "chi.svg"), color_by="chi", chi=c.chi)
    _say(f"reproduce: {cfg.reproduce()}")
    return EXIT_OK


def cmd_walk(cfg: RunConfig) -> int:
    env = prepare_environment(cfg.seed, cfg.radius, cfg.margin)
    g = env.graph
    check_patch_size(g, cfg.n, cfg.margin)
    batch = simulate_batch(g, cfg.n, cfg.walks, cfg.master_seed, margin=cfg.margin, threads=cfg.threads)
    os.makedirs(cfg.out, exist_ok=True)
    write_batch_summary(batch, os.path.join(cfg.out, "batch.json"))
    ok = batch.valid()
    with open(os.path.join(cfg.out, "endpoints.csv"), "w") as fh:
        fh.write("walk,vertex_id,x,y\n")
        for i in np.flatnonzero(ok):
            v = batch.endpoints[i]
            fh.write(f"{i},{v},{g.centers[v, 0]!r},{g.centers[v, 1]!r}\n")
    if ok[0]:
        write_path_csv(simulate(g, cfg.n, cfg.master_seed, 0, cfg.margin), g, os.path.join(cfg.out, "path_0.csv"))
    _say(json.dumps(batch.summary()))
    _say(f"reproduce: {cfg.reproduce()}")
    return EXIT_OK


def cmd_estimate_d(cfg: RunConfig) -> int:
    os.makedirs(cfg.out, exist_ok=True)
    if cfg.seeds:
        rep = quenched_comparison(cfg.seeds, cfg.walks, cfg.n, cfg.radius, cfg.master_seed,
                                  margin=cfg.margin, threads=cfg.threads)
        rep.metadata["reproduce"] = cfg.reproduce()
        with open(os.path.join(cfg.out, "quenched.json"), "w") as fh:
            json.dump(rep.to_dict(), fh, indent=2, default=float)
        _say(rep.line())
        _say(f"reproduce: {cfg.reproduce()}")
        return EXIT_OK if rep.verdict else EXIT_FAIL
    env = prepare_environment(cfg.seed, cfg.radius, cfg.margin)
    g, c = env.graph, env.corrector
    dg = stats.estimate_D_generator(g, c, cfg.margin)
    check_patch_size(g, cfg.n, cfg.margin)
    batch = simulate_batch(g, cfg.n, cfg.walks, cfg.master_seed, margin=cfg.margin, threads=cfg.threads)
    v = batch.endpoints[batch.valid()]
    M = g.centers[v] + c.chi[v]
    de = stats.estimate_D_empirical(M, cfg.n)
    reports = [stats.positive_definite_report(dg), stats.isotropy_test(dg),
               stats.agreement_test(de, dg, name="empirical vs generator D")]
    with open(os.path.join(cfg.out, "diffusion.csv"), "w") as fh:
        fh.write("source,D11,D12,D22,hw11,hw12,hw22,samples\n")
        for d in (dg, de):
            fh.write(f"{d.source},{d.D[0, 0]!r},{d.D[0, 1]!r},{d.D[1, 1]!r},"
                     f"{d.halfwidth[0, 0]!r},{d.halfwidth[0, 1]!r},{d.halfwidth[1, 1]!r},{d.sample_count}\n")
    with open(os.path.join(cfg.out, "reports.json"), "w") as fh:
        json.dump({"generator": dg.to_dict(), "empirical": de.to_dict(),
                   "reports": [r.to_dict() for r in reports], "reproduce": cfg.reproduce()},
                  fh, indent=2, default=float)
    if cfg.figures:
        plotting.plot_endpoints(M / math.sqrt(cfg.n), dg.D, os.path.join(cfg.out, "endpoints.png"))
    for d in (dg, de):
        _say(f"{d.source:9s} D = [[{d.D[0, 0]:.5f}, {d.D[0, 1]:.5f}], [{d.D[1, 0]:.5f}, {d.D[1, 1]:.5f}]]")
    for r in reports:
        _say(r.line())
    _say(f"reproduce: {cfg.reproduce()}")
    return EXIT_OK if all(r.verdict for r in reports) else EXIT_FAIL


def cmd_verify(cfg: RunConfig, as_json: bool) -> int:
    res = run_verify(cfg)
    path = write_bundle(res.bundle, cfg.out)
    if cfg.figures:
        g = res.env.graph
        if res.profile is not None:
            plotting.plot_sublinearity(res.profile, os.path.join(cfg.out, "sublinearity.png"))
        if res.batch is not None:
            ok = res.batch.valid()
            v = res.batch.positions[ok, res.batch.checkpoints.index(cfg.n)]
            M = (g.centers[v] + (0 if cfg.zero_chi else res.env.corrector.chi[v])) / math.sqrt(cfg.n)
            if len(M) > 2:
                plotting.plot_endpoints(M, np.cov(M.T), os.path.join(cfg.out, "endpoints.png"))
            infl = [r for r in res.bundle["reports"] if r["name"] == "corrector influence" and r["statistic"] is not None]
            if infl:
                plotting.plot_corrector_influence(stats.TestReport(**infl[0]),
                                                  os.path.join(cfg.out, "corrector_influence.png"))
    if as_json:
        print(json.dumps(res.bundle, indent=2, sort_keys=True))
    else:
        for r in res.bundle["reports"]:
            rep = stats.TestReport(**r)
            _say(rep.line() if rep.statistic is not None else f"FAIL  {rep.name}: {rep.metadata.get('error')}")
        _say(f"bundle: {path}")
        _say(f"reproduce: {cfg.reproduce()}")
    return EXIT_OK if res.bundle["all_pass"] else EXIT_FAIL


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        if args.command == "render":
            return cmd_render(args)
        cfg = config_from_args(args)
        cfg.validate()
    except (ValueError, OSError) as exc:
        ap.error(str(exc))   # exits with status 2
    try:
        if args.command == "generate":
            return cmd_generate(cfg)
        if args.command == "corrector":
            return cmd_corrector(cfg)
        if args.command == "walk":
            return cmd_walk(cfg)
        if args.command == "estimate-d":
            return cmd_estimate_d(cfg)
        return cmd_verify(cfg, args.json)
    except (SingularGrid, NoConvergence) as exc:
        print(f"[{args.command}] numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        print(f"[{args.command}] error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
