"""Command line entry points: track, ablate, gen and metrics subcommands.

Config resolution order for tracking runs: built-in defaults, then a
``key = value`` config file, then the ``D2CIP_SEED`` environment variable,
then explicit command line flags.
"""

from __future__ import annotations

import argparse
import os
import sys
from dataclasses import replace
from pathlib import Path
from typing import Optional

from d2cip.ablation import (ABLATION_CONFIG, default_suite, run_ablation,
                            write_ablation_csv, write_run_csv)
from d2cip.io import (load_result, load_sequence, parse_l_min, parse_sigma,
                      read_config, save_result, write_sequence)
from d2cip.metrics import write_metrics_csv
from d2cip.observation import BACKENDS
from d2cip.scenario import SCENARIO_KINDS, generate_scenario
from d2cip.tracker import RunConfig, VARIANTS, run_sequence

SEED_ENV = "D2CIP_SEED"

# RunConfig fields that may come from a config file or an override flag.
_CONFIG_KEYS = ("backend", "variant", "n_total", "sigma", "epsilon", "l_min",
                "max_iterations", "grid_radius", "gamma", "k_max", "m_max",
                "eta", "seed")


def _config_options(parser: argparse.ArgumentParser) -> None:
    group = parser.add_argument_group("tracker configuration")
    group.add_argument("--config", metavar="FILE", help="key = value config file")
    group.add_argument("--backend", choices=BACKENDS)
    group.add_argument("--variant", choices=VARIANTS)
    group.add_argument("--n-total", dest="n_total", type=int, metavar="N")
    group.add_argument("--sigma", type=parse_sigma, metavar="S1,...,S8",
                       help="process noise, 8 values or 'auto'")
    group.add_argument("--epsilon", type=float)
    group.add_argument("--l-min", dest="l_min", type=parse_l_min,
                       metavar="L", help="gating threshold or 'auto'")
    group.add_argument("--max-iterations", dest="max_iterations", type=int)
    group.add_argument("--grid-radius", dest="grid_radius", type=int)
    group.add_argument("--gamma", type=float)
    group.add_argument("--k-max", dest="k_max", type=int)
    group.add_argument("--m-max", dest="m_max", type=int)
    group.add_argument("--eta", type=float)
    group.add_argument("--seed", type=int)


def _resolve_config(args: argparse.Namespace, base: RunConfig) -> RunConfig:
    overrides: dict = {}
    if getattr(args, "config", None):
        overrides.update(read_config(args.config))
    env_seed = os.environ.get(SEED_ENV)
    if env_seed is not None:
        try:
            overrides["seed"] = int(env_seed)
        except ValueError:
            raise ValueError(f"{SEED_ENV} must be an integer, got {env_seed!r}")
    for key in _CONFIG_KEYS:
        value = getattr(args, key, None)
        if value is not None:
            overrides[key] = value
    return replace(base, **overrides)


def _parse_param(item: str) -> tuple[str, object]:
    if "=" not in item:
        raise ValueError(f"--param expects KEY=VALUE, got {item!r}")
    key, text = item.split("=", 1)
    key = key.strip()
    text = text.strip()
    if "," in text:
        return key, tuple(float(part) for part in text.split(",") if part.strip())
    for cast in (int, float):
        try:
            return key, cast(text)
        except ValueError:
            pass
    return key, text


def _cmd_track(args: argparse.Namespace) -> int:
    sequence = load_sequence(args.sequence)
    config = _resolve_config(args, RunConfig())
    result = run_sequence(config, sequence)
    save_result(result, args.out)
    bundle = result.metrics()
    lost = sum(r.lost for r in result.records)
    print(f"{config.variant} on {len(result.records)} frames: "
          f"precision@20 {bundle.precision_at_20:.4f}, "
          f"success AUC {bundle.success_auc:.4f}, lost frames {lost}")
    if args.metrics_out:
        write_metrics_csv(bundle, args.metrics_out)
    return 0


def _cmd_ablate(args: argparse.Namespace) -> int:
    base = _resolve_config(args, ABLATION_CONFIG)
    try:
        seeds = tuple(int(part) for part in args.seeds.split(",") if part.strip())
    except ValueError:
        raise ValueError(f"--seeds expects comma-separated integers, got {args.seeds!r}")
    if not seeds:
        raise ValueError("--seeds needs at least one seed")
    suite = default_suite(per_kind=args.per_kind, n_frames=args.frames)
    table = run_ablation(suite, base, seeds=seeds)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    write_ablation_csv(table, out_dir / "ablation.csv")
    write_run_csv(table, out_dir / "ablation_runs.csv")
    for row in table.summary():
        print(f"{row['variant']:<6} {row['metric']:<16} "
              f"{row['value']:.4f} (gain {row['gain']:+.4f})")
    return 0


def _cmd_gen(args: argparse.Namespace) -> int:
    params: dict = {}
    for item in args.param or ():
        key, value = _parse_param(item)
        params[key] = value
    if args.name:
        params["name"] = args.name
    scenario = generate_scenario(args.kind, params, seed=args.seed)
    write_sequence(args.out, scenario, render=args.render)
    frames = "rendered" if args.render else "unrendered"
    print(f"wrote {scenario.n_frames} {frames} frames to {args.out}")
    return 0


def _cmd_metrics(args: argparse.Namespace) -> int:
    result = load_result(args.result)
    bundle = result.metrics()
    write_metrics_csv(bundle, args.out)
    print(f"precision@20 {bundle.precision_at_20:.4f}, "
          f"success AUC {bundle.success_auc:.4f} -> {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="d2cip",
        description="Iterative multi-mode particle filter tracker")
    sub = parser.add_subparsers(dest="command", required=True)

    track = sub.add_parser("track", help="track one sequence directory")
    track.add_argument("sequence", help="directory with frames or a scenario")
    track.add_argument("--out", default="result.json", help="result path")
    track.add_argument("--metrics-out", dest="metrics_out",
                       help="also write a metrics CSV")
    _config_options(track)
    track.set_defaults(func=_cmd_track)

    ablate = sub.add_parser("ablate", help="run the variant ablation suite")
    ablate.add_argument("--out-dir", dest="out_dir", default=".",
                        help="directory for ablation.csv and ablation_runs.csv")
    ablate.add_argument("--seeds", default="0,1,2",
                        help="comma-separated tracker seeds")
    ablate.add_argument("--per-kind", dest="per_kind", type=int, default=5,
                        help="sequences per scenario kind (1..5)")
    ablate.add_argument("--frames", type=int, default=None,
                        help="shorten every suite sequence to this many frames")
    _config_options(ablate)
    ablate.set_defaults(func=_cmd_ablate)

    gen = sub.add_parser("gen", help="generate a synthetic sequence")
    gen.add_argument("kind", choices=SCENARIO_KINDS)
    gen.add_argument("--out", required=True, help="output directory")
    gen.add_argument("--seed", type=int, default=0, help="scenario noise seed")
    gen.add_argument("--render", action="store_true",
                     help="also write PGM frames")
    gen.add_argument("--param", action="append", metavar="KEY=VALUE",
                     help="generator parameter override, repeatable")
    gen.add_argument("--name", help="scenario name")
    gen.set_defaults(func=_cmd_gen)

    metrics = sub.add_parser("metrics", help="recompute metrics from a result")
    metrics.add_argument("result", help="result.json path")
    metrics.add_argument("--out", default="metrics.csv", help="metrics CSV path")
    metrics.set_defaults(func=_cmd_metrics)

    return parser


def main(argv: Optional[list[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
