"""Command-line entry point: ``s4rl <command> ...``."""

from __future__ import annotations

import os

# one BLAS thread per process; sweeps parallelise across processes instead
os.environ.setdefault("OPENBLAS_NUM_THREADS", "1")
os.environ.setdefault("OMP_NUM_THREADS", "1")

import argparse
import json
import logging
import sys
from pathlib import Path

from .errors import S4rlError

log = logging.getLogger("s4rl")


def _cmd_run(args):
    from .harness import load_config, run
    cfg = load_config(args.config)
    if args.seeds:
        cfg = cfg.with_(seeds=tuple(args.seeds))
    if args.output_dir:
        cfg = cfg.with_(output_dir=args.output_dir)
    metrics = run(cfg, resume=not args.no_resume)
    for m in metrics:
        print(f"seed {m.seed}: final normalized score {m.final_score:.2f} "
              f"({len(m.records)} evaluations, {m.wall_time:.1f}s)")
    return 0


def _emit_report(report, prefix):
    from .harness import emit
    paths = emit(report, prefix)
    for (agent, setting), v in report.average_score().items():
        r = report.average_ranking()[(agent, setting)]
        print(f"{agent:>24s} {setting:>16s}  avg score {v:8.2f}  avg rank {r:5.2f}")
    for p in paths:
        print(f"wrote {p}")
    errors = report.errors()
    if errors:
        print(f"{len(errors)} cell(s) failed; see plot data 'errors'", file=sys.stderr)


def _cmd_sweep_aug(args):
    from .harness import load_config, sweep_augmentations
    bases = [load_config(c) for c in args.config]
    out = args.output_dir or bases[0].output_dir
    report = sweep_augmentations(bases, args.kinds, workers=args.workers,
                                 include_baseline=args.baseline, output_dir=out)
    _emit_report(report, Path(out) / "augmentations")
    return 0


def _cmd_sweep_data(args):
    from .harness import load_config, sweep_limited_data
    bases = [load_config(c) for c in args.config]
    out = args.output_dir or bases[0].output_dir
    report = sweep_limited_data(bases, args.fractions, tuple(args.agents), workers=args.workers,
                                output_dir=out)
    _emit_report(report, Path(out) / "limited_data")
    return 0


def _cmd_report(args):
    from .harness import report_from_dir
    report = report_from_dir(args.directory)
    prefix = args.out or Path(args.directory) / ("augmentations" if report.kind == "augmentation"
                                                 else "limited_data")
    _emit_report(report, prefix)
    return 0


def _cmd_dataset(args):
    from .core.rng import SeededRng
    from .dataset import collect, load, make_split, save, subsample
    from .envs import expert_policy, make_env, random_policy

    if args.action == "collect":
        env = make_env(args.env)
        pol = random_policy(env) if args.policy == "random" else expert_policy(env)
        ds = collect(env, pol, args.episodes, SeededRng(args.seed), split="custom",
                     behavior=f"scripted-{args.policy}")
        save(ds, args.out)
    elif args.action == "split":
        ds = make_split(args.env, args.kind, SeededRng(args.seed), args.transitions,
                        cache_dir=args.cache_dir)
        save(ds, args.out)
    elif args.action == "subsample":
        parent = load(args.input)
        ds = subsample(parent, args.fraction, SeededRng(args.seed).split(f"fraction:{args.fraction!r}"),
                       per_episode=args.per_episode)
        save(ds, args.out)
    else:
        ds = load(args.input)
        summary = ds.summary()
        summary["chain_consistent"] = ds.chain_consistent()
        summary["in_bounds"] = ds.in_bounds()
        if args.json:
            print(json.dumps(summary, indent=1, sort_keys=True))
        else:
            for k, v in summary.items():
                print(f"{k:>18s}: {v}")
        return 0
    print(f"wrote {args.out}: {len(ds)} transitions, {ds.n_episodes} episodes, "
          f"mean episode return {ds.summary()['return_mean']:.3f}")
    return 0


def _cmd_bench(args):
    from .bench import main as bench_main
    return bench_main(["--rows", str(args.rows), "--repeat", str(args.repeat)])


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="s4rl", description="Offline RL with conservative Q-learning "
                                "and augmentation-averaged Bellman targets.")
    p.add_argument("-v", "--verbose", action="count", default=0)
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="train every seed of one experiment config")
    r.add_argument("config")
    r.add_argument("--seeds", type=int, nargs="+")
    r.add_argument("--output-dir")
    r.add_argument("--no-resume", action="store_true", help="ignore existing checkpoints")
    r.set_defaults(func=_cmd_run)

    a = sub.add_parser("sweep-aug", help="augmentation comparison grid")
    a.add_argument("config", nargs="+", help="one config per task")
    a.add_argument("--kinds", nargs="+", required=True, help="e.g. gauss:3e-3 uniform:1e-3 mixup:0.4")
    a.add_argument("--baseline", action="store_true", help="add the plain CQL column")
    a.add_argument("--workers", type=int, help="parallel cells (default: $S4RL_WORKERS or 1)")
    a.add_argument("--output-dir")
    a.set_defaults(func=_cmd_sweep_aug)

    d = sub.add_parser("sweep-data", help="limited-data curves")
    d.add_argument("config", nargs="+")
    d.add_argument("--fractions", type=float, nargs="+", default=[0.05, 0.10, 0.25, 1.0])
    d.add_argument("--agents", nargs="+", default=["cql", "s4rl"])
    d.add_argument("--workers", type=int)
    d.add_argument("--output-dir")
    d.set_defaults(func=_cmd_sweep_data)

    ds = sub.add_parser("dataset", help="collect, split, subsample or inspect datasets")
    dsub = ds.add_subparsers(dest="action", required=True)
    c = dsub.add_parser("collect")
    c.add_argument("--env", required=True)
    c.add_argument("--policy", choices=("random", "expert"), default="random")
    c.add_argument("--episodes", type=int, default=10)
    c.add_argument("--seed", type=int, default=0)
    c.add_argument("--out", required=True)
    s = dsub.add_parser("split")
    s.add_argument("--env", required=True)
    s.add_argument("--kind", required=True, choices=("random", "medium", "medium-replay", "medium-expert"))
    s.add_argument("--transitions", type=int, default=20000)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--cache-dir")
    s.add_argument("--out", required=True)
    ss = dsub.add_parser("subsample")
    ss.add_argument("input")
    ss.add_argument("--fraction", type=float, required=True)
    ss.add_argument("--seed", type=int, default=0)
    ss.add_argument("--per-episode", action="store_true")
    ss.add_argument("--out", required=True)
    i = dsub.add_parser("inspect")
    i.add_argument("input")
    i.add_argument("--json", action="store_true")
    ds.set_defaults(func=_cmd_dataset)

    rp = sub.add_parser("report", help="merge a sweep directory into CSV and plot data")
    rp.add_argument("directory")
    rp.add_argument("--out", help="output prefix (default: inside the directory)")
    rp.set_defaults(func=_cmd_report)

    b = sub.add_parser("bench", help="time compiled vs numpy kernels")
    b.add_argument("--rows", type=int, default=2816)
    b.add_argument("--repeat", type=int, default=50)
    b.set_defaults(func=_cmd_bench)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except S4rlError as exc:
        print(f"s4rl: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
