"""Command-line interface: run, sweep, gen, verify.

Configuration keys resolve in order: built-in defaults, then a flat key=value
config file (--config), then TOPKCERT_* environment variables, then explicit
command-line flags.
"""

from __future__ import annotations

import argparse
import os
import sys

from .harness import (
    BASE_DEFAULTS,
    SweepSpec,
    run_replicate,
    run_sweep,
    rows_to_csv_text,
    verify_invariants,
    write_rows,
    _run_row,
)
from .core import true_top_k
from .instances import (
    GapInstanceSpec,
    PackingSpec,
    generate_gap_instance,
    generate_packing_instance,
    load_instance,
    save_instance,
)

ENV_PREFIX = "TOPKCERT_"

_BOOL_KEYS = {"ci.clamp"}
_INT_KEYS = {"n", "k", "n_weak", "weak_budget", "w_min", "w_max", "near_ties", "oracle.seed", "oracle.strong_cap"}
_FLOAT_KEYS = {"gap", "delta", "delta_weak_fraction", "tail_fraction", "oracle.sigma", "ci.sigma", "ci.range"}

_FLAG_TO_KEY = {
    "n": "n",
    "k": "k",
    "gap": "gap",
    "delta": "delta",
    "delta_weak_fraction": "delta_weak_fraction",
    "n_weak": "n_weak",
    "weak_budget": "weak_budget",
    "w_min": "w_min",
    "w_max": "w_max",
    "near_ties": "near_ties",
    "tail_fraction": "tail_fraction",
    "noise": "oracle.noise",
    "sigma": "oracle.sigma",
    "seed": "oracle.seed",
    "strong_cap": "oracle.strong_cap",
    "ci_method": "ci.method",
    "ci_sigma": "ci.sigma",
    "ci_range": "ci.range",
    "ci_clamp": "ci.clamp",
}


def _coerce(key: str, raw):
    if raw is None or isinstance(raw, (int, float, bool)):
        return raw
    text = str(raw).strip()
    if text == "" or text.lower() == "none":
        return None
    if key in _BOOL_KEYS:
        return text.lower() in ("1", "true", "yes", "on")
    if key in _INT_KEYS:
        return int(text)
    if key in _FLOAT_KEYS:
        return float(text)
    return text


def _read_config_file(path: str) -> dict:
    cfg = {}
    with open(path) as handle:
        for line_no, line in enumerate(handle, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise SystemExit(f"{path}:{line_no}: expected key=value, got {line!r}")
            key, _, value = line.partition("=")
            cfg[key.strip()] = value.strip()
    return cfg


def resolve_config(args: argparse.Namespace) -> dict:
    cfg = dict(BASE_DEFAULTS)
    if getattr(args, "config", None):
        for key, value in _read_config_file(args.config).items():
            if key not in cfg:
                raise SystemExit(f"unknown config key {key!r}")
            cfg[key] = _coerce(key, value)
    for key in cfg:
        env_name = ENV_PREFIX + key.upper().replace(".", "_")
        if env_name in os.environ:
            cfg[key] = _coerce(key, os.environ[env_name])
    for flag, key in _FLAG_TO_KEY.items():
        value = getattr(args, flag, None)
        if value is not None:
            cfg[key] = _coerce(key, value)
    return cfg


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="flat key=value config file")
    parser.add_argument("--n", type=int)
    parser.add_argument("--k", type=int)
    parser.add_argument("--gap", type=float)
    parser.add_argument("--delta", type=float)
    parser.add_argument("--delta-weak-fraction", dest="delta_weak_fraction", type=float)
    parser.add_argument("--n-weak", dest="n_weak", type=int)
    parser.add_argument("--weak-budget", dest="weak_budget", type=int)
    parser.add_argument("--w-min", dest="w_min", type=int)
    parser.add_argument("--w-max", dest="w_max", type=int)
    parser.add_argument("--near-ties", dest="near_ties", type=int)
    parser.add_argument("--tail-fraction", dest="tail_fraction", type=float)
    parser.add_argument("--noise", choices=("gaussian", "exact"))
    parser.add_argument("--sigma", type=float)
    parser.add_argument("--seed", type=int)
    parser.add_argument("--strong-cap", dest="strong_cap", type=int)
    parser.add_argument("--ci-method", dest="ci_method",
                        choices=("subgaussian", "empirical_bernstein", "anytime_empirical_bernstein"))
    parser.add_argument("--ci-sigma", dest="ci_sigma", type=float)
    parser.add_argument("--ci-range", dest="ci_range", type=float)
    parser.add_argument("--ci-clamp", dest="ci_clamp", action="store_const", const=True)


def _parse_seed_range(text: str) -> list[int]:
    if ".." in text:
        lo, _, hi = text.partition("..")
        return list(range(int(lo), int(hi)))
    return [int(part) for part in text.split(",") if part]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="topkcert",
        description="PAC certification of the exact top-k set with weak and strong oracles.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run one algorithm on one instance")
    _add_common(p_run)
    p_run.add_argument("--algo", required=True, choices=("stc", "ace", "ace_w", "ta", "brute"))
    p_run.add_argument("--instance", help="instance CSV; generated when omitted")
    p_run.add_argument("--format", choices=("csv", "jsonl"), default="csv")
    p_run.add_argument("--timing", action="store_true")

    p_sweep = sub.add_parser("sweep", help="run a parameter sweep and write rows")
    _add_common(p_sweep)
    p_sweep.add_argument("--experiment", required=True,
                         choices=("scaling_n", "scaling_k", "hardness", "lower_bound", "coverage"))
    p_sweep.add_argument("--grid", required=True, help="comma-separated swept values")
    p_sweep.add_argument("--replicates", type=int, default=10)
    p_sweep.add_argument("--algorithms", default="stc,ace,ace_w,ta")
    p_sweep.add_argument("--base-seed", dest="base_seed", type=int, default=0)
    p_sweep.add_argument("--out", required=True)
    p_sweep.add_argument("--format", choices=("csv", "jsonl"), default="csv")
    p_sweep.add_argument("--timing", action="store_true")

    p_gen = sub.add_parser("gen", help="emit an instance CSV")
    _add_common(p_gen)
    p_gen.add_argument("--kind", choices=("gap", "packing"), default="gap")
    p_gen.add_argument("--m", type=int, help="packed-set size (packing instances)")
    p_gen.add_argument("--out", required=True)

    p_verify = sub.add_parser("verify", help="run the invariant suite over a seed range")
    _add_common(p_verify)
    p_verify.add_argument("--seeds", default="0..20", help="range like 0..100 or a comma list")
    return parser


def _cmd_run(args) -> int:
    cfg = resolve_config(args)
    seed = cfg["oracle.seed"]
    if args.instance:
        instance = load_instance(args.instance, k=cfg["k"])
    else:
        instance = generate_gap_instance(
            GapInstanceSpec(
                n=cfg["n"],
                k=cfg["k"],
                gap=cfg["gap"],
                near_ties=cfg["near_ties"],
                tail_fraction=cfg["tail_fraction"],
                seed=seed,
            )
        )
    results = run_replicate(instance, seed, [args.algo], cfg, timing=args.timing)
    spec = SweepSpec(experiment="scaling_n", grid=[instance.n], base=cfg, algorithms=[args.algo])
    rows = [_run_row(spec, cfg, instance.n, seed, results[0], instance, true_top_k(instance))]
    if args.format == "jsonl":
        import json

        sys.stdout.write(json.dumps(rows[0].as_dict()) + "\n")
    else:
        sys.stdout.write(rows_to_csv_text(rows))
    return 0 if results[0].error is None else 1


def _cmd_sweep(args) -> int:
    cfg = resolve_config(args)
    grid_text = [part for part in args.grid.split(",") if part]
    if args.experiment == "hardness":
        grid = [float(part) for part in grid_text]
    else:
        grid = [int(float(part)) for part in grid_text]
    spec = SweepSpec(
        experiment=args.experiment,
        grid=grid,
        replicates=args.replicates,
        base=cfg,
        algorithms=tuple(part for part in args.algorithms.split(",") if part),
        base_seed=args.base_seed,
        timing=args.timing,
    )
    rows = run_sweep(spec)
    write_rows(rows, args.out, fmt=args.format)
    errors = sum(1 for row in rows if row.status == "error")
    print(f"wrote {len(rows)} rows to {args.out}" + (f" ({errors} errors)" if errors else ""))
    return 0


def _cmd_gen(args) -> int:
    cfg = resolve_config(args)
    if args.kind == "packing":
        if args.m is None:
            raise SystemExit("--m is required for packing instances")
        instance, _ = generate_packing_instance(
            PackingSpec(n=cfg["n"], k=cfg["k"], m=args.m), seed=cfg["oracle.seed"]
        )
    else:
        instance = generate_gap_instance(
            GapInstanceSpec(
                n=cfg["n"],
                k=cfg["k"],
                gap=cfg["gap"],
                near_ties=cfg["near_ties"],
                tail_fraction=cfg["tail_fraction"],
                seed=cfg["oracle.seed"],
            )
        )
    save_instance(instance, args.out)
    print(f"wrote {instance.n} items to {args.out}")
    return 0


def _cmd_verify(args) -> int:
    cfg = resolve_config(args)
    seeds = _parse_seed_range(args.seeds)
    problems = verify_invariants(seeds, cfg)
    for problem in problems:
        print(problem, file=sys.stderr)
    print(f"verified {len(seeds)} seeds: {'OK' if not problems else f'{len(problems)} problems'}")
    return 0 if not problems else 1


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    handlers = {"run": _cmd_run, "sweep": _cmd_sweep, "gen": _cmd_gen, "verify": _cmd_verify}
    return handlers[args.command](args)


if __name__ == "__main__":
    sys.exit(main())
