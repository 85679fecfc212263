#!/usr/bin/env python3
"""Fit the example experiment and print the full method-comparison table.

Usage: python scripts/reproduce_comparison.py [--format json|md] [--seed N]
"""

import argparse
import sys
from pathlib import Path

from rsmopt.cli import main as cli_main

ROOT = Path(__file__).resolve().parents[1]


def main() -> int:
    parser = argparse.ArgumentParser()
    parser.add_argument("--format", choices=["json", "md"], default="md")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--out")
    args = parser.parse_args()
    argv = [
        "report",
        "--config", str(ROOT / "configs" / "example.json"),
        "--format", args.format,
        "--seed", str(args.seed),
    ]
    if args.out:
        argv += ["--out", args.out]
    return cli_main(argv)


if __name__ == "__main__":
    sys.exit(main())
