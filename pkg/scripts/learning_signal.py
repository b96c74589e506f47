"""Train the full model and compare its valid_seen SR with oracle, random and always-Stop policies.

    python scripts/learning_signal.py [--config configs/default.json] [--out runs/signal] [KEY=VALUE ...]
"""

import argparse
import time
from pathlib import Path

from vamgrid.data import load_split
from vamgrid.harness import evaluate as ev
from vamgrid.harness.config import load_config
from vamgrid.harness.reports import write_json
from vamgrid.harness.studies import train_split


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--config")
    p.add_argument("--out", default="runs/signal")
    p.add_argument("overrides", nargs="*")
    args = p.parse_args()
    cfg = load_config(args.config, args.overrides)

    t0 = time.perf_counter()
    model, curve = train_split(cfg)
    train_s = time.perf_counter() - t0
    eps = load_split("valid_seen", cfg.data.valid_seen, purpose="eval",
                     data_seed=cfg.data.data_seed, cfg=cfg.env)
    policies = {"model": ev.AgentPolicy(model), "random": ev.RandomPolicy(cfg.seed),
                "stop": ev.StopPolicy(), "oracle": ev.OraclePolicy()}
    rows = {}
    for name, pol in policies.items():
        rep = ev.evaluate_split(pol, eps, cfg.failure_budget, cfg.step_limit_mult, cfg.step_limit_add)
        rows[name] = {"sr": rep["sr"], "gc": rep["gc"], "subgoals": rep["subgoals"]}
        print(f"{name:7s} SR {rep['sr']:5.1f}  GC {rep['gc']:5.1f}")
    out = Path(args.out)
    write_json(out / "learning_signal.json", {"config_hash": cfg.config_hash(), "seed": cfg.seed,
                                               "final_loss": curve[-1][1], "valid_seen": rows})
    write_json(out / "timing.json", {"train_seconds": train_s})


if __name__ == "__main__":
    main()
