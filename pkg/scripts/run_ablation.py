"""Four cumulative ablation rows on valid_unseen; prints a table and writes the CLI's report files.

    python scripts/run_ablation.py [--config configs/default.json] [--out runs/ablation] [KEY=VALUE ...]

Set VAMGRID_WORKERS to train rows in parallel processes.
"""

import argparse
import json
import sys

from vamgrid.cli import main as cli


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--config")
    p.add_argument("--out", default="runs/ablation")
    p.add_argument("overrides", nargs="*")
    args = p.parse_args()
    argv = ["ablate", "--out", args.out, *(["--config", args.config] if args.config else []),
            *args.overrides]
    code = cli(argv)
    if code:
        sys.exit(code)
    with open(f"{args.out}/ablation.json") as f:
        rep = json.load(f)
    print(f"{'row':4s}{'model':22s}{'SR':>7s}{'GC':>7s}{'ref SR':>8s}")
    for r in rep["rows"]:
        print(f"{r['row']:<4d}{r['model']:22s}{r['sr']:7.1f}{r['gc']:7.1f}{r['reference_sr_alfred']:8.1f}")


if __name__ == "__main__":
    main()
