"""Command-line entry point: ``sdpg <subcommand> ...``.

Subcommands
    train      run one training job, writing records.jsonl, config.toml,
               timing.json and agent.ckpt into --out
    eval       evaluate a saved agent with the deterministic policy
    sweep      one training run per (n, seed) pair
    histdump   critic vs Bellman-target samples at visited state-action pairs
    gradcheck  finite-difference checks of every gradient path
    oracle     write analytic / brute-force fixture files

All run parameters come from the config file and flags; nothing is read from
environment variables.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .config import ConfigError, TrainConfig, load_config, resolved_toml


def _fail(msg: str, code: int = 2) -> int:
    print(f"sdpg: error: {msg}", file=sys.stderr)
    return code


def _load(args) -> TrainConfig:
    if args.config is None:
        cfg = TrainConfig()
    else:
        path = Path(args.config)
        if not path.is_file():
            raise ConfigError(f"config file not found: {path}")
        cfg = load_config(path)
    changes = {}
    if getattr(args, "seed", None) is not None:
        changes["seed"] = args.seed
    if getattr(args, "algorithm", None) is not None:
        changes["algorithm"] = args.algorithm
    if getattr(args, "max_env_steps", None) is not None:
        changes["max_env_steps"] = args.max_env_steps
    return cfg.replace(**changes) if changes else cfg


def _outdir(path) -> Path:
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    return out


def run_train(args) -> int:
    from .checkpoint import save_agent
    from .trainer import train

    try:
        cfg = _load(args)
    except ConfigError as exc:
        return _fail(str(exc))
    out = _outdir(args.out)
    (out / "config.toml").write_text(resolved_toml(cfg), encoding="utf-8")
    ckpt_dir = out / "checkpoints" if cfg.checkpoint_every else None
    if ckpt_dir is not None:
        ckpt_dir.mkdir(exist_ok=True)
    with open(out / "records.jsonl", "w", encoding="utf-8") as fh:
        def emit(rec):
            fh.write(json.dumps(rec, sort_keys=True) + "\n")
            fh.flush()
        try:
            rec = train(cfg, checkpoint_dir=ckpt_dir, on_record=emit)
        except Exception as exc:  # partial records are already on disk
            return _fail(f"training aborted: {type(exc).__name__}: {exc}", 1)
        if not args.quiet:
            for e in rec.evals:
                print(f"step {e['env_steps']:>8}  episode {e['episode']:>5}  eval {e['mean']:10.2f} ± {e['std']:.2f}")
    # threaded runs append records without the callback
    (out / "records.jsonl").write_text(rec.dumps(), encoding="utf-8")
    (out / "timing.json").write_text(json.dumps(rec.timing, sort_keys=True) + "\n", encoding="utf-8")
    save_agent(rec.agent, out / "agent.ckpt")
    return 0


def run_eval(args) -> int:
    from .checkpoint import load_agent
    from .envs import make_env
    from .trainer import evaluate

    try:
        cfg = _load(args)
    except ConfigError as exc:
        return _fail(str(exc))
    if not Path(args.checkpoint).is_file():
        return _fail(f"checkpoint not found: {args.checkpoint}")
    agent = load_agent(args.checkpoint)
    mean, std, _ = evaluate(agent, lambda: make_env(cfg.env_name, **cfg.env_params), args.episodes,
                            seeds=range(args.first_seed, args.first_seed + args.episodes))
    print(json.dumps({"episodes": args.episodes, "mean": mean, "std": std}))
    return 0


def run_sweep(args) -> int:
    from .trainer import sample_count_sweep

    try:
        cfg = _load(args)
    except ConfigError as exc:
        return _fail(str(exc))
    out = _outdir(args.out)
    try:
        records = sample_count_sweep(cfg, args.n, args.seeds)
    except Exception as exc:
        return _fail(f"sweep aborted: {type(exc).__name__}: {exc}", 1)
    summary = []
    for (n, seed), rec in sorted(records.items()):
        rec.write(out / f"records_n{n}_seed{seed}.jsonl")
        fit = rec.of_type("fit")
        evals = rec.evals
        summary.append({"n": n, "seed": seed,
                        "w1": fit[0]["w1"] if fit else None,
                        "final_eval": evals[-1]["mean"] if evals else None})
    (out / "summary.json").write_text(json.dumps(summary, indent=1) + "\n", encoding="utf-8")
    for row in summary:
        print(json.dumps(row))
    return 0


def run_histdump(args) -> int:
    from .checkpoint import load_agent
    from .envs import make_env
    from .trainer import dump_return_histograms

    try:
        cfg = _load(args)
    except ConfigError as exc:
        return _fail(str(exc))
    if not Path(args.checkpoint).is_file():
        return _fail(f"checkpoint not found: {args.checkpoint}")
    agent = load_agent(args.checkpoint)
    env = make_env(cfg.env_name, **cfg.env_params)
    hists = dump_return_histograms(agent, env, args.pairs, args.samples, seed=args.seed or 0,
                                   noise=args.noise)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    with open(out, "w", encoding="utf-8") as fh:
        for h in hists:
            fh.write(json.dumps(h, sort_keys=True) + "\n")
    return 0


def run_gradcheck(args) -> int:
    from .gradcheck import CHECKS, format_table, run_checks

    corrupt = {}
    for item in args.corrupt or []:
        name, _, val = item.partition("=")
        if name not in CHECKS:
            return _fail(f"unknown check {name!r}; choose from {', '.join(CHECKS)}")
        corrupt[name] = float(val or 0.01)
    for name in args.only or []:
        if name not in CHECKS:
            return _fail(f"unknown check {name!r}; choose from {', '.join(CHECKS)}")
    results = run_checks(seed=args.seed, probes=args.probes, tol=args.tol, only=args.only,
                         corrupt=corrupt)
    print(format_table(results))
    failed = [r for r in results if not r.passed]
    for r in failed:
        print(f"FAILED: {r.name}: max relative error {r.max_rel_error:.3e} >= {r.tolerance:.1e}",
              file=sys.stderr)
    return 1 if failed else 0


def run_oracle(args) -> int:
    from .config import tomllib
    from .fixtures import build_fixtures, write_fixtures

    spec = None
    if args.spec is not None:
        path = Path(args.spec)
        if not path.is_file():
            return _fail(f"fixture spec not found: {path}")
        try:
            spec = tomllib.loads(path.read_text(encoding="utf-8"))
        except tomllib.TOMLDecodeError as exc:
            return _fail(f"{path}: {exc}")
    try:
        fixtures = build_fixtures(spec)
    except (KeyError, ValueError) as exc:
        return _fail(f"bad fixture spec: {exc}")
    for p in write_fixtures(fixtures, args.out):
        print(p)
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="sdpg", description="Sample-based distributional policy gradient")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, out_default=None, out_required=False):
        sp.add_argument("--config", help="TOML config file (defaults: pendulum, SDPG)")
        sp.add_argument("--seed", type=int, help="override the config seed")
        sp.add_argument("--algorithm", choices=["sdpg", "d4pg"], help="override the config algorithm")
        if out_required or out_default:
            sp.add_argument("--out", required=out_required, default=out_default, help="output path")

    t = sub.add_parser("train", help="train one agent")
    common(t, out_required=True)
    t.add_argument("--max-env-steps", type=int, help="override max_env_steps")
    t.add_argument("--quiet", action="store_true")
    t.set_defaults(func=run_train)

    e = sub.add_parser("eval", help="evaluate a saved agent")
    common(e)
    e.add_argument("--checkpoint", required=True)
    e.add_argument("--episodes", type=int, default=100)
    e.add_argument("--first-seed", type=int, default=0, help="reset seed of the first episode")
    e.set_defaults(func=run_eval)

    s = sub.add_parser("sweep", help="sample-count sweep")
    common(s, out_required=True)
    s.add_argument("--n", type=int, nargs="+", default=[11, 25, 51, 100])
    s.add_argument("--seeds", type=int, nargs="+", default=[0, 1, 2, 3, 4])
    s.set_defaults(func=run_sweep)

    h = sub.add_parser("histdump", help="critic and Bellman-target samples at visited pairs")
    common(h, out_required=True)
    h.add_argument("--checkpoint", required=True)
    h.add_argument("--pairs", type=int, default=20)
    h.add_argument("--samples", type=int, default=51)
    h.add_argument("--noise", choices=["random", "stratified"], default="random")
    h.set_defaults(func=run_histdump)

    g = sub.add_parser("gradcheck", help="finite-difference gradient checks")
    g.add_argument("--tol", type=float, default=1e-3)
    g.add_argument("--probes", type=int, default=100)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--only", nargs="+", help="subset of checks to run")
    g.add_argument("--corrupt", nargs="+", metavar="CHECK=REL",
                   help="scale a check's analytic gradient by (1 + REL); for testing the checker")
    g.set_defaults(func=run_gradcheck)

    o = sub.add_parser("oracle", help="write oracle fixture files")
    o.add_argument("--spec", help="TOML fixture spec (default: built-in set)")
    o.add_argument("--out", required=True, help="output directory")
    o.set_defaults(func=run_oracle)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
