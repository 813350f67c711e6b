"""Command-line interface.

    invpde run <config.yaml> [--out results.csv] [--seed-basis N]
                             [--seed-noise N] [--parallel]
    invpde list-benchmarks

Config files are YAML: top-level keys are RunConfig fields, with an optional
``sweep`` section mapping field names to lists of values (expanded as a
Cartesian product).  Exit codes: 0 success, 1 numerical failure, 2 bad
configuration or unreadable config file.
"""

import argparse
import sys

import yaml

from .bench import RunConfig, run_sweep, write_csv
from .exceptions import InvalidInputError, NumericFailureError
from .problem import BENCHMARK_NAMES


def _load_config(path):
    try:
        with open(path) as fh:
            data = yaml.safe_load(fh)
    except (OSError, yaml.YAMLError) as exc:
        raise InvalidInputError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise InvalidInputError("config must be a mapping")
    sweep = data.pop("sweep", None)
    for key in ("n_sub", "q", "hidden"):
        if key in data and isinstance(data[key], list):
            data[key] = tuple(data[key])
    try:
        cfg = RunConfig(**data)
    except TypeError as exc:
        raise InvalidInputError(f"bad config field: {exc}") from exc
    if sweep is not None and not isinstance(sweep, dict):
        raise InvalidInputError("sweep section must be a mapping")
    return cfg, sweep


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="invpde",
        description="Inverse-PDE benchmark runner (random local bases, "
                    "nonlinear least squares / variable projection).")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run a benchmark configuration")
    p_run.add_argument("config", help="YAML configuration file")
    p_run.add_argument("--out", default="results.csv",
                       help="output CSV path (default results.csv)")
    p_run.add_argument("--seed-basis", type=int, default=None,
                       help="override the basis seed")
    p_run.add_argument("--seed-noise", type=int, default=None,
                       help="override the measurement-noise seed")
    p_run.add_argument("--parallel", action="store_true",
                       help="run sweep points in parallel processes")

    sub.add_parser("list-benchmarks", help="list bundled benchmark names")

    args = parser.parse_args(argv)

    if args.command == "list-benchmarks":
        for name in BENCHMARK_NAMES:
            print(name)
        return 0

    try:
        cfg, sweep = _load_config(args.config)
        if args.seed_basis is not None:
            cfg.seed_basis = args.seed_basis
        if args.seed_noise is not None:
            cfg.seed_noise = args.seed_noise
    except InvalidInputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2

    try:
        rows = run_sweep(cfg, sweep, parallel=args.parallel)
    except InvalidInputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except NumericFailureError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 1

    write_csv(rows, args.out)
    for row in rows:
        bits = [f"{row['benchmark']}/{row['solver']}",
                f"cost={row['cost']:.3e}"]
        for key in ("e_alpha1", "e_alpha2", "e_alpha3"):
            if key in row:
                bits.append(f"{key}={row[key]:.3e}")
        if row.get("l2_gamma") is not None:
            bits.append(f"l2_gamma={row['l2_gamma']:.3e}")
        bits.append(f"l2_u={row['l2_u']:.3e}")
        if row["status"] != "ok":
            bits.append(row["status"])
        print("  ".join(bits))
    print(f"wrote {len(rows)} row(s) to {args.out}")
    return 0 if all(row["status"] == "ok" for row in rows) else 1


if __name__ == "__main__":
    sys.exit(main())
