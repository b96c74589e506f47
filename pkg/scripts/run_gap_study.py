"""Seed-variance and validation/test selection-gap study over K seeds.

    python scripts/run_gap_study.py [--seeds 5] [--config ...] [--out runs/gap] [KEY=VALUE ...]
"""

import argparse
import json
import sys

from vamgrid.cli import main as cli


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--config")
    p.add_argument("--seeds", type=int, default=5)
    p.add_argument("--out", default="runs/gap")
    p.add_argument("overrides", nargs="*")
    args = p.parse_args()
    argv = ["gap-study", "--seeds", str(args.seeds), "--out", args.out,
            *(["--config", args.config] if args.config else []), *args.overrides]
    code = cli(argv)
    if code:
        sys.exit(code)
    with open(f"{args.out}/gap_study.json") as f:
        rep = json.load(f)
    for r in rep["rows"]:
        print(f"seed {r['seed']}: valid_unseen SR {r['valid_unseen_sr']:5.1f}  test_unseen SR {r['test_unseen_sr']:5.1f}")
    print(f"selected seed {rep['selected_seed']}, regret {rep['regret']:.1f}, spearman {rep['spearman']}, "
          f"SR std {rep['sr_std']}")


if __name__ == "__main__":
    main()
