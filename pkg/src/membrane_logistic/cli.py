"""Command-line front end: run one configured experiment batch.

Usage: membrane-logistic CONFIG.toml [--out-dir DIR]

Exit codes: 0 on success, 1 if any requested item failed, 2 on
configuration errors.
"""

from __future__ import annotations

import argparse
import sys

from .config import parse_config
from .errors import (
    InvariantError,
    MembraneError,
    RefugeTouchesBoundary,
    SchemaError,
)
from .runner import emit, run


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="membrane-logistic",
        description="Steady states and spectral thresholds of two logistic "
                    "populations coupled through a permeable membrane.")
    parser.add_argument("config", help="path to a TOML configuration file")
    parser.add_argument("--out-dir", default=None,
                        help="override output.dir from the configuration")
    args = parser.parse_args(argv)

    try:
        with open(args.config, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    try:
        config = parse_config(text)
    except (SchemaError, InvariantError, RefugeTouchesBoundary) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2

    try:
        envelope = run(config)
    except MembraneError as exc:
        print(f"run failed: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1

    out_dir = args.out_dir or config.output_dir
    written = emit(envelope, out_dir, config.formats)
    for path in written:
        print(f"wrote {path}")
    for key, val in envelope.results["scalars"].items():
        print(f"{key} = {val}")
    if config.command == "Validate":
        table = envelope.results["tables"]["validate"]
        for name, resolution, passed, measured in table["rows"]:
            verdict = "pass" if passed else "FAIL"
            print(f"{verdict}  {name} (n={resolution}, "
                  f"measured={measured:.3e})")
    if not envelope.ok:
        for failure in envelope.failures:
            print(f"item failed: {failure}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
