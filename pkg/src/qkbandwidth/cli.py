"""Command-line entry point: ``qkbandwidth <study> --config FILE``.

Exit codes: 0 success, 2 config error, 3 some cells skipped, 4 runtime failure.
"""
from __future__ import annotations

import argparse
import dataclasses
import logging
import sys

from .data import FormatError
from .experiments import (
    STUDIES,
    ConfigError,
    ExperimentConfig,
    config_from_dict,
    count_failed,
    count_skipped,
    emit_outputs,
    load_config,
    run_study,
)

EXIT_OK, EXIT_CONFIG, EXIT_PARTIAL, EXIT_FAILURE = 0, 2, 3, 4

log = logging.getLogger("qkbandwidth")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qkbandwidth", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in list(STUDIES) + ["validate-config"]:
        p = sub.add_parser(name)
        p.add_argument("--config", help="flat key = value config or a manifest.json")
        p.add_argument("--out", help="output directory (overrides out_dir)")
        p.add_argument("--threads", type=int, help="worker threads over cells")
        p.add_argument("--seed", type=int, help="master seed (overrides seed)")
        p.add_argument("--max-qubits", type=int, help="cells above this are skipped")
        p.add_argument("-v", "--verbose", action="store_true")
    return parser


def resolve(args) -> ExperimentConfig:
    cfg = load_config(args.config) if args.config else ExperimentConfig().validate()
    overrides = {
        "out_dir": args.out,
        "threads": args.threads,
        "seed": args.seed,
        "max_qubits": args.max_qubits,
    }
    overrides = {k: v for k, v in overrides.items() if v is not None}
    if overrides:
        cfg = config_from_dict({**dataclasses.asdict(cfg), **overrides})
    return cfg


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(message)s",
    )
    try:
        cfg = resolve(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if args.command == "validate-config":
        print("config ok")
        return EXIT_OK

    study = STUDIES[args.command]
    try:
        rows, sums = run_study(cfg, study)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (OSError, FormatError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAILURE
    paths = emit_outputs(rows, cfg.out_dir, cfg, study, sums)
    skipped, failed = count_skipped(rows), count_failed(rows)
    print(f"{len(rows)} rows written to {paths['results']} ({skipped} skipped, {failed} failed)")
    if failed:
        return EXIT_FAILURE
    if skipped:
        return EXIT_PARTIAL
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
