"""Command-line entry point: ``topoprior run|list-presets|pairs|validate``."""

from __future__ import annotations

import argparse
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor

from . import topology
from .config import PRESETS, SCHEMA, ConfigError, load_config, preset
from .experiments import PipelineError, run_experiment

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="topoprior", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a preset or config file")
    run.add_argument("source", help="preset name (see list-presets) or INI config path")
    run.add_argument("--seed", type=int)
    run.add_argument("--out")
    run.add_argument("--samples", type=int, help="override the chain length N")
    run.add_argument("--grid", type=int, help="override m (1D intervals / 2D knots per axis)")
    run.add_argument("--regularizer", choices=["none", "tv", "tp"])
    run.add_argument("--prior", choices=["squared_exponential", "periodic_squared_exponential",
                                         "spectral_laplacian"])
    run.add_argument("--chains", type=int, default=1, help="independent seeds run concurrently")

    sub.add_parser("list-presets", help="show presets with stated/inherited parameters")

    pairs = sub.add_parser("pairs", help="persistence diagram of a 1D signal CSV")
    pairs.add_argument("signal", help="CSV file; the last column is read as the signal")
    pairs.add_argument("--out", help="write the diagram here instead of stdout")

    val = sub.add_parser("validate", help="check a config file against the schema")
    val.add_argument("config")
    return parser


def _overrides(args) -> dict:
    changes = {}
    for flag, key in (("seed", "seed"), ("out", "out"), ("samples", "N"), ("grid", "m"),
                      ("regularizer", "regularizer"), ("prior", "prior")):
        value = getattr(args, flag)
        if value is not None:
            changes[key] = value
    return changes


def _run_one(cfg):
    report = run_experiment(cfg)
    return cfg.seed, report.error, report.acceptance_rate, report.duration, report.paths


def cmd_run(args) -> int:
    cfg = load_config(args.source).replace(**_overrides(args))
    if args.chains < 1:
        raise ConfigError("--chains: must be >= 1")
    if args.chains == 1:
        configs = [cfg]
    else:
        configs = [cfg.replace(seed=cfg.seed + k, out=os.path.join(cfg.out, f"chain{k}"))
                   for k in range(args.chains)]
    if len(configs) == 1:
        results = [_run_one(configs[0])]
    else:
        with ProcessPoolExecutor(max_workers=min(len(configs), os.cpu_count() or 1)) as pool:
            results = list(pool.map(_run_one, configs))
    for seed, err, acc, duration, paths in results:
        print(f"seed={seed} relative_error={err:.6f} acceptance_rate={acc:.4f} "
              f"duration={duration:.1f}s out={os.path.dirname(paths['metadata'])}")
    return EXIT_OK


def cmd_list_presets(args) -> int:
    for name in PRESETS:
        cfg = preset(name)
        parent = PRESETS[name]["parent"] or "-"
        print(f"{name} (parent: {parent})")
        for key in SCHEMA:
            origin = cfg.provenance.get(key, "default")
            if origin == "default":
                continue
            mark = "" if origin == "stated" else f"  [{origin}]"
            print(f"    {key} = {getattr(cfg, key)}{mark}")
    return EXIT_OK


def cmd_pairs(args) -> int:
    try:
        y = topology.read_signal_csv(args.signal)
    except (OSError, ValueError) as exc:
        raise ConfigError(f"{args.signal}: {exc}") from exc
    text = topology.pair_full(y).to_csv()
    if args.out:
        with open(args.out, "w", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    print(f"# persistence_distance={topology.persistence_distance(y)!r} "
          f"discrete_tv={topology.discrete_tv(y)!r}", file=sys.stderr)
    return EXIT_OK


def cmd_validate(args) -> int:
    cfg = load_config(args.config)
    print(f"{args.config}: ok ({cfg.name}, example {cfg.example}, regularizer {cfg.regularizer})")
    return EXIT_OK


COMMANDS = {"run": cmd_run, "list-presets": cmd_list_presets, "pairs": cmd_pairs,
            "validate": cmd_validate}


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (PipelineError, RuntimeError, ArithmeticError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
