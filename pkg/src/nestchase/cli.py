"""Command-line entry point: ``nestchase {run,sweep,validate,net,replay}``."""
from __future__ import annotations

import argparse
import copy
import json
import os
import sys

import numpy as np

from .adversary import ReplayStream, sphere_net
from .config import ConfigError, parse_config
from .harness import (
    EpisodeError,
    competitive_report,
    expand_sweep,
    run_and_report,
    run_episode,
    run_sweep,
    sweep_csv,
    write_outputs,
)


def _load_json(path):
    try:
        with open(path) as fh:
            return json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError([f"{path}: invalid JSON: {exc}"]) from None
    except OSError as exc:
        raise ConfigError([f"{path}: {exc.strerror}"]) from None


def _apply_seed(data, seed):
    if seed is not None:
        data = copy.deepcopy(data)
        data["seeds"] = {"chaser": seed, "adversary": seed}
    return data


def _out_dir(args, cfg_output, default):
    return args.out or cfg_output.get("dir") or default


def cmd_run(args):
    data = _apply_seed(_load_json(args.config), args.seed)
    cfg = parse_config(data)
    trace, rep = run_and_report(cfg)
    out = _out_dir(args, cfg.output, "out")
    write_outputs(trace, rep, out)
    print(f"T={trace.T} total_cost={rep.total_cost:.6g} opt={rep.opt_cost:.6g} "
          f"ratio={rep.competitive_ratio:.6g} -> {out}")
    for c in rep.checks:
        print(f"  {'ok  ' if c.passed else 'FAIL'} {c.name}: {c.lhs:.6g} {c.relation} "
              f"{c.rhs:.6g} (+/- {c.slack:.3g})")
    return 0


def cmd_sweep(args):
    data = _load_json(args.config)
    configs = expand_sweep(data)
    jobs = args.jobs or int(data.get("sweep", {}).get("jobs", 1))
    rows = run_sweep(configs, jobs=jobs)
    out = _out_dir(args, data.get("output", {}) or {}, "out")
    os.makedirs(out, exist_ok=True)
    path = os.path.join(out, "sweep.csv")
    with open(path, "w") as fh:
        fh.write(sweep_csv(rows))
    print(f"{len(rows)} episodes -> {path}")
    return 0


def cmd_validate(args):
    from . import validation

    if args.quick:
        failed = []
        for name, ok, detail in validation.quick_checks():
            print(f"{'PASS' if ok else 'FAIL'} {name}" + (f" ({detail})" if detail else ""))
            if not ok:
                failed.append(name)
        if failed:
            print("failed checks: " + ", ".join(failed))
            return 1
        return 0
    results = validation.run_suite()
    failed = [r for r in results if not r.passed]
    if failed:
        print("failed criteria:")
        for r in failed:
            for f in r.failures:
                print(f"  criterion {r.number}: {f}")
        return 1
    return 0


def cmd_net(args):
    rng = np.random.default_rng(args.seed if args.seed is not None else 0)
    try:
        net = sphere_net(args.d, args.spacing, rng)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    lines = [",".join(repr(float(v)) for v in p) for p in net]
    text = "\n".join(lines) + "\n"
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
        print(f"{len(net)} points -> {args.out}")
    else:
        sys.stdout.write(text)
    return 0


def cmd_replay(args):
    try:
        stream = ReplayStream.load(args.bodies)
    except (OSError, KeyError, TypeError, ValueError) as exc:
        raise ConfigError([f"{args.bodies}: not a body-sequence file ({exc})"]) from None
    data = {"dim": stream.dim, "norm": args.norm, "chaser": {"kind": args.chaser},
            "adversary": {"kind": "replay", "params": {"path": args.bodies}},
            "x0": "steiner-of-first",
            "seeds": {"chaser": args.seed or 0, "adversary": args.seed or 0}}
    cfg = parse_config(data)
    trace = run_episode(cfg, stream=stream)
    rep = competitive_report(trace, cfg)
    out = args.out or "out"
    write_outputs(trace, rep, out)
    print(f"replayed {trace.T} requests: total_cost={rep.total_cost:.6g} "
          f"opt={rep.opt_cost:.6g} -> {out}")
    return 0


def build_parser():
    ap = argparse.ArgumentParser(prog="nestchase", description="Nested convex body chasing harness")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run one episode")
    p.add_argument("config")
    p.add_argument("--seed", type=int, help="override both seeds")
    p.add_argument("--out", help="output directory")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("sweep", help="run a grid of episodes")
    p.add_argument("config")
    p.add_argument("--out")
    p.add_argument("--jobs", type=int, default=0, help="worker processes")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("validate", help="run the acceptance suite")
    p.add_argument("--quick", action="store_true", help="fast plumbing checks only")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("net", help="print a sphere net, one point per line")
    p.add_argument("d", type=int)
    p.add_argument("spacing", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--out")
    p.set_defaults(func=cmd_net)

    p = sub.add_parser("replay", help="rerun a materialized request sequence")
    p.add_argument("bodies")
    p.add_argument("--chaser", default="steiner")
    p.add_argument("--norm", default="2")
    p.add_argument("--seed", type=int)
    p.add_argument("--out")
    p.set_defaults(func=cmd_replay)
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print("invalid config:", file=sys.stderr)
        for e in exc.errors:
            print(f"  - {e}", file=sys.stderr)
        return 2
    except EpisodeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        print(json.dumps(exc.state), file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
