"""Command-line front door: config ingestion, validation, execution, outputs.

Subcommands: run (one trial), compare (seeded batches per mode), sweep (a
compare per value of one dotted config path), validate (resolve and check a
config, write nothing). Flag values beat config-file values, which beat the
documented defaults. Exit codes: 0 success, 2 config error, 3 runtime
integrity error. Nothing is written unless validation passed first.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys

from tunnelswarm import config as config_mod
from tunnelswarm.config import ConfigError
from tunnelswarm.experiment import (
    TrialConfig,
    canonical_json,
    compare,
    run_trial,
    write_compare_outputs,
    write_trial_outputs,
)

OUT_ROOT_ENV = "TUNNELSWARM_OUT"


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tunnelswarm",
        description="Simulate collective tunnel excavation with and without "
                    "contact-map based fault tolerance.",
    )
    sub = parser.add_subparsers(dest="subcommand", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON config file merged over the defaults")
    common.add_argument("--out", help=f"output directory (default: ${OUT_ROOT_ENV} "
                                      "or ./runs, plus the subcommand name)")
    common.add_argument("--seed", type=int, help="trial seed (batch base seed "
                                                 "for compare and sweep)")
    common.add_argument("--mode", choices=["baseline", "acr"],
                        help="controller mode for run and validate")
    common.add_argument("--duration", type=float, help="simulated seconds per trial")

    batch = argparse.ArgumentParser(add_help=False)
    batch.add_argument("--trials", type=int, default=20,
                       help="trials per mode (default 20)")
    batch.add_argument("--jobs", type=int, default=1,
                       help="worker processes (default 1)")

    sub.add_parser("run", parents=[common], help="run one trial")
    sub.add_parser("compare", parents=[common, batch],
                   help="run seeded trial batches in both modes")
    sweep = sub.add_parser("sweep", parents=[common, batch],
                           help="one compare per value of a config path")
    sweep.add_argument("--param", required=True,
                       help="dotted config path, e.g. faulty.x")
    sweep.add_argument("--values", required=True,
                       help="comma-separated values, e.g. 60,150,260")
    sub.add_parser("validate", parents=[common],
                   help="resolve and check the config, write nothing")
    return parser


def _resolve_overrides(args) -> dict:
    """Flags > config file > defaults, as a plain override dict."""
    if args.config:
        cfg = config_mod.load_config(args.config)
    else:
        cfg = config_mod.default_config()
    if args.seed is not None:
        cfg["seed"] = args.seed
    if args.mode is not None:
        cfg["mode"] = args.mode
    if args.duration is not None:
        cfg["duration_s"] = args.duration
    return cfg


def _out_dir(args) -> str:
    if args.out:
        return args.out
    root = os.environ.get(OUT_ROOT_ENV, "runs")
    return os.path.join(root, args.subcommand)


def _parse_values(raw: str) -> list:
    values = []
    for chunk in raw.split(","):
        chunk = chunk.strip()
        if not chunk:
            continue
        try:
            values.append(json.loads(chunk))
        except json.JSONDecodeError:
            values.append(chunk)
    if not values:
        raise ConfigError("--values must list at least one value")
    return values


def _cmd_run(args) -> int:
    cfg = _resolve_overrides(args)
    tc = TrialConfig.from_dict(cfg)
    outdir = _out_dir(args)
    result = run_trial(tc)
    write_trial_outputs(result, outdir, config_echo=cfg)
    print(f"mode={result.mode} seed={result.seed} pellets={result.pellets} "
          f"obstruction={result.obstruction if result.obstruction is None else round(result.obstruction, 4)} "
          f"-> {outdir}")
    return 0


def _cmd_compare(args) -> int:
    cfg = _resolve_overrides(args)
    seed_base = cfg["seed"]
    summary = compare(cfg, n_trials=args.trials, seed_base=seed_base,
                      jobs=args.jobs)
    outdir = _out_dir(args)
    write_compare_outputs(summary, outdir, config_echo=cfg)
    for mode in summary.modes:
        ps = summary.per_mode[mode]
        print(f"{mode}: mean pellets {ps['mean_pellets']:.2f} "
              f"(std {ps['std_pellets']:.2f}), "
              f"mean obstruction {_fmt(ps['mean_obstruction'])}")
    print(f"acr/baseline pellet ratio: {_fmt(summary.ratio)} -> {outdir}")
    return 0


def _cmd_sweep(args) -> int:
    cfg = _resolve_overrides(args)
    values = _parse_values(args.values)
    if args.trials < 2:
        raise ConfigError(f"--trials must be >= 2, got {args.trials}")
    leaf = args.param.split(".")[-1]

    # every sweep point must resolve and validate before anything runs
    points = []
    for i, value in enumerate(values):
        point = json.loads(json.dumps(cfg))
        config_mod.set_path(point, args.param, value)
        TrialConfig.from_dict(point)
        points.append((f"{i:02d}_{leaf}={value}", value, point))

    outdir = _out_dir(args)
    rows = []
    for name, value, point in points:
        summary = compare(point, n_trials=args.trials,
                          seed_base=point["seed"], jobs=args.jobs)
        write_compare_outputs(summary, os.path.join(outdir, name),
                              config_echo=point)
        row = {"param": args.param, "value": value, "dir": name}
        for mode in summary.modes:
            ps = summary.per_mode[mode]
            row[f"{mode}_mean_pellets"] = round(ps["mean_pellets"], 4)
            row[f"{mode}_mean_obstruction"] = _fmt(ps["mean_obstruction"])
            row[f"{mode}_active_pushes"] = ps["total_active_pushes"]
            row[f"{mode}_give_ups"] = sum(ps["give_ups"])
        row["pellet_ratio"] = _fmt(summary.ratio)
        rows.append(row)
        print(f"{args.param}={value}: ratio {row['pellet_ratio']}, "
              f"acr pushes {row.get('acr_active_pushes', 0)}")

    tmp = os.path.join(outdir, f"sweep.csv.tmp.{os.getpid()}")
    with open(tmp, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(rows[0]))
        writer.writeheader()
        writer.writerows(rows)
    os.replace(tmp, os.path.join(outdir, "sweep.csv"))
    print(f"-> {outdir}/sweep.csv")
    return 0


def _cmd_validate(args) -> int:
    cfg = _resolve_overrides(args)
    TrialConfig.from_dict(cfg)
    print(canonical_json(cfg))
    return 0


def _fmt(x) -> str:
    return "n/a" if x is None else f"{x:.4f}"


_COMMANDS = {
    "run": _cmd_run,
    "compare": _cmd_compare,
    "sweep": _cmd_sweep,
    "validate": _cmd_validate,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse already printed the message; fold --help's 0 through
        return 2 if exc.code not in (0, None) else 0
    try:
        return _COMMANDS[args.subcommand](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001  simulation or output integrity
        print(f"runtime error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
