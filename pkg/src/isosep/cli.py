"""Command-line entry point: ``isosep <command> [--config PATH] [--out DIR] ...``."""
from __future__ import annotations

import argparse
import json
import math
import os
import sys

import numpy as np

from .config import ConfigError, ExperimentConfig, load_config
from .experiments import (PipelineError, VerificationReport, dumbbell_necessity, environment,
                          family_sets, nerve_report, cover_report, run_pipeline, set_spacing,
                          verify_isoperimetric, verify_volume)
from .measure import hausdorff_estimate
from .metric_core import DisconnectedGraphError, generate, save_space
from .nets_nerve import dump_nerve

COMMANDS = ("gen", "net", "nerve", "project", "measure", "verify-iso", "verify-vol",
            "dumbbell", "pipeline")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="isosep",
        description="Isoperimetric separation experiments on sampled metric manifolds.")
    parser.add_argument("--version", action="version", version="%(prog)s 0.1.0")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="INI experiment configuration")
    common.add_argument("--seed", type=int, help="override the manifold sampling seed")
    common.add_argument("--out", metavar="DIR", help="output directory (report.json, tables/, plots/)")
    common.add_argument("--threads", type=int, help="worker threads; never changes results")
    common.add_argument("--resolution", choices=("low", "med", "high"),
                        help="sample-count multiplier 0.5 / 1 / 2")
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")
    helps = {
        "gen": "sample a manifold and save the point cloud",
        "net": "build and audit the ball cover",
        "nerve": "nerve, partition of unity and the maps to and from it",
        "project": "push f(S) into the low skeleton of the nerve",
        "measure": "covering estimates of the configured sets and the whole sample",
        "verify-iso": "isoperimetric ratios over the set family",
        "verify-vol": "ball-volume ratios and level-set slicing",
        "dumbbell": "neck-loop ratio against the neck radius",
        "pipeline": "the whole chain from cover to projection, with witnesses",
    }
    for name in COMMANDS:
        p = sub.add_parser(name, parents=[common], help=helps[name])
        if name in ("net", "nerve", "project", "pipeline"):
            p.add_argument("--epsilon", type=float, help="cover scale (default max(diam/32, 8 spacings))")
    return parser


def resolve_config(args) -> ExperimentConfig:
    cfg = load_config(args.config) if args.config else ExperimentConfig()
    run = {}
    if args.threads is not None:
        run["threads"] = args.threads
    if args.resolution is not None:
        run["resolution"] = args.resolution
    if args.out is not None:
        run["out"] = args.out
    over = {"run": run}
    if args.seed is not None:
        over["manifold"] = {"seed": args.seed}
    return cfg.with_overrides(**over)


def cmd_gen(cfg, args) -> VerificationReport:
    space = generate(cfg.manifold_spec())
    rep = VerificationReport("gen", cfg.to_json(), environment=environment(space))
    try:
        space.check_connected()
        connected = True
    except DisconnectedGraphError:
        connected = False
    rep.check("connected", "neighborhood graph is connected", connected)
    viol = space.audit_triangle(1000, seed=space.meta.get("seed", 0))
    rep.check("triangle", "triangle inequality on sampled triples", viol <= 1e-9, violation=viol)
    rep.derived.update(diameter=space.diameter,
                       **{k: space.meta[k] for k in ("area", "length", "L_model") if k in space.meta})
    os.makedirs(cfg["run"]["out"], exist_ok=True)
    save_space(space, os.path.join(cfg["run"]["out"], "space.txt"))
    return rep


def cmd_net(cfg, args) -> VerificationReport:
    return cover_report(cfg, epsilon=args.epsilon)[0]


def cmd_nerve(cfg, args) -> VerificationReport:
    rep, space, cover, cx, pou, nmap, g = nerve_report(cfg, epsilon=args.epsilon)
    os.makedirs(cfg["run"]["out"], exist_ok=True)
    dump_nerve(os.path.join(cfg["run"]["out"], "nerve.json"), cx, nmap, g)
    return rep


def cmd_project(cfg, args) -> VerificationReport:
    rep = run_pipeline(cfg, epsilon=args.epsilon, full=False)
    rep.command = "project"
    proj = rep.derived.get("projection")
    if proj is not None:
        os.makedirs(cfg["run"]["out"], exist_ok=True)
        with open(os.path.join(cfg["run"]["out"], "projection_log.json"), "w") as fh:
            json.dump(proj, fh, indent=2, sort_keys=True)
    return rep


def cmd_measure(cfg, args) -> VerificationReport:
    space = generate(cfg.manifold_spec())
    rep = VerificationReport("measure", cfg.to_json(), environment=environment(space))
    n = space.n_man
    spacing = space.meta.get("spacing", space.h / 2.5)
    total = hausdorff_estimate(space, np.arange(space.n), n, scale=cfg["sets"]["measure_scale"] * spacing)
    analytic = space.meta.get("area") if n == 2 else space.meta.get("length")
    rep.derived["total"] = {"k": n, "value": total.value, "spread": total.spread, "analytic": analytic}
    rows = []
    factor = cfg["sets"]["measure_scale"] if cfg["sets"]["family"] != "neck" else cfg["dumbbell"]["measure_scale"]
    for S, _ in family_sets(space, cfg):
        est = hausdorff_estimate(space, S, n - 1, scale=factor * set_spacing(space, S.indices))
        rows.append({"set": S.label, "k": n - 1, "value": est.value, "spread": est.spread,
                     "per_scale": est.per_scale})
    rep.rows = rows
    rep.check("finite", "all estimates finite and nonnegative",
              all(math.isfinite(r["value"]) and r["value"] >= 0 for r in rows + [rep.derived["total"]]))
    rep.tables["measure"] = (["set", "k", "value", "spread"],
                             [[r["set"], r["k"], r["value"], r["spread"]] for r in rows]
                             + [["whole sample", n, total.value, total.spread]])
    return rep


def cmd_verify_iso(cfg, args):
    return verify_isoperimetric(cfg)


def cmd_verify_vol(cfg, args):
    return verify_volume(cfg)


def cmd_dumbbell(cfg, args):
    return dumbbell_necessity(cfg)


def cmd_pipeline(cfg, args):
    return run_pipeline(cfg, epsilon=args.epsilon)


HANDLERS = {"gen": cmd_gen, "net": cmd_net, "nerve": cmd_nerve, "project": cmd_project,
            "measure": cmd_measure, "verify-iso": cmd_verify_iso, "verify-vol": cmd_verify_vol,
            "dumbbell": cmd_dumbbell, "pipeline": cmd_pipeline}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = resolve_config(args)
    except (ConfigError, ValueError, OSError) as exc:
        print(f"isosep: configuration error: {exc}", file=sys.stderr)
        return 2
    out = cfg["run"]["out"]
    try:
        rep = HANDLERS[args.command](cfg, args)
    except PipelineError as exc:
        exc.partial.write(out)
        print(f"isosep: {exc}", file=sys.stderr)
        return 1
    rep.write(out)
    for c in rep.checks:
        print(f"{'PASS' if c['passed'] else 'FAIL'}  {c['name']}: {c['invariant']}")
    print(f"report written to {os.path.join(out, 'report.json')}")
    return 0 if rep.passed else 1


if __name__ == "__main__":
    sys.exit(main())
