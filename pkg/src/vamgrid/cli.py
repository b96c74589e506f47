"""Command-line entry point: gen-data, train, eval, ablate, gap-study, gradcheck.

Exit codes: 0 ok, 1 gradcheck failure, 2 config, 3 data, 4 training, 5 evaluation.
"""

from __future__ import annotations

import argparse
import logging
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

from . import __version__
from .agent import ConfigError, VAMAgent
from .data import DataError, export_split, load_split
from .env.core import SPLITS
from .env.generate import GenerationError
from .harness.config import RunConfig, load_config
from .harness.evaluate import EvaluationError
from .harness.reports import write_json, write_loss_curve, write_report, write_table_csv
from .harness.studies import evaluate, gap_study, metrics_report, run_ablation, train_split
from .harness.train import TrainingError, train
from .nn import load_tensors, save_tensors

EXIT_OK, EXIT_GRADCHECK, EXIT_CONFIG, EXIT_DATA, EXIT_TRAIN, EXIT_EVAL = 0, 1, 2, 3, 4, 5
COMMANDS = ("gen-data", "train", "eval", "ablate", "gap-study", "gradcheck")


@dataclass
class CliCommand:
    name: str
    config: RunConfig
    out: Path
    config_path: str | None = None
    overrides: list[str] = field(default_factory=list)
    data: Path | None = None
    checkpoint: Path | None = None
    splits: list[str] = field(default_factory=list)
    seeds: int | None = None


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="vamgrid", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"vamgrid {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name in COMMANDS:
        s = sub.add_parser(name)
        s.add_argument("--config", help="JSON run config (defaults apply to missing keys)")
        s.add_argument("--out", required=True, help="output directory")
        s.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                       help="dotted-key override, e.g. model.hidden=768")
        s.add_argument("extra", nargs="*", metavar="KEY=VALUE", help="more overrides")
        if name in ("train", "eval"):
            s.add_argument("--data", help="exported dataset directory (default: regenerate from seeds)")
        if name == "eval":
            s.add_argument("--checkpoint", required=True, help="checkpoint path prefix (no suffix)")
            s.add_argument("--split", dest="splits", action="append", choices=SPLITS)
        if name == "gap-study":
            s.add_argument("--seeds", type=int, help="number of seeds K (>= 1)")
    return p


def parse_and_validate(argv: list[str]) -> CliCommand:
    args = build_parser().parse_args(argv)
    overrides = list(args.overrides) + list(args.extra)
    cfg = load_config(args.config, overrides)
    seeds = getattr(args, "seeds", None)
    if seeds is not None and seeds < 1:
        raise ConfigError("--seeds must be at least 1")
    return CliCommand(
        name=args.command,
        config=cfg,
        out=Path(args.out),
        config_path=args.config,
        overrides=overrides,
        data=Path(args.data) if getattr(args, "data", None) else None,
        checkpoint=Path(args.checkpoint) if getattr(args, "checkpoint", None) else None,
        splits=getattr(args, "splits", None) or ["valid_seen", "valid_unseen"],
        seeds=seeds,
    )


def _write_effective_config(cmd: CliCommand):
    cmd.out.mkdir(parents=True, exist_ok=True)
    write_json(cmd.out / "config.json", {"tool_version": __version__, "command": cmd.name,
                                         "config": cmd.config.to_dict()})


def _load_model(cmd: CliCommand) -> VAMAgent:
    if not cmd.checkpoint.with_suffix(".json").is_file():
        raise DataError(f"checkpoint {cmd.checkpoint} not found")
    state, _ = load_tensors(cmd.checkpoint)
    model = VAMAgent(cmd.config.model, cmd.config.seed)
    try:
        model.load_state_dict(state)
    except (KeyError, ValueError) as e:
        raise DataError(f"checkpoint does not fit the configured model: {e}") from None
    return model


def run(cmd: CliCommand) -> int:
    cfg = cmd.config
    _write_effective_config(cmd)
    t0 = time.perf_counter()
    if cmd.name == "gen-data":
        for split in SPLITS:
            export_split(load_split(split, cfg.data.count(split), purpose="gen-data",
                                    data_seed=cfg.data.data_seed, cfg=cfg.env), cmd.out)
    elif cmd.name == "train":
        if cmd.data is not None:
            episodes = load_split("train", cfg.data.train, purpose="train", data_dir=cmd.data, cfg=cfg.env)
            model, curve = train(cfg, episodes, out_dir=cmd.out)
        else:
            model, curve = train_split(cfg, out_dir=cmd.out)
        save_tensors(cmd.out / "model", model.state_dict(), {"seed": cfg.seed, "model": cfg.model.to_dict()})
        write_loss_curve(cmd.out / "loss_curve.csv", curve)
    elif cmd.name == "eval":
        model = _load_model(cmd)
        splits = {s: evaluate(model, cfg, s) for s in cmd.splits}
        write_report(cmd.out, "metrics", metrics_report(cfg, splits))
    elif cmd.name == "ablate":
        report = run_ablation(cfg)
        write_report(cmd.out, "ablation", report)
        write_table_csv(cmd.out / "ablation_table.csv", report["rows"],
                        ["row", "model", "wide_view", "view_act_matching", "act_type_gate", "sr", "gc",
                         "reference_sr_alfred"])
    elif cmd.name == "gap-study":
        report = gap_study(cfg, cmd.seeds)
        write_report(cmd.out, "gap_study", report)
        write_table_csv(cmd.out / "gap_study_seeds.csv", report["rows"],
                        ["seed", "valid_unseen_sr", "test_unseen_sr", "valid_unseen_gc", "test_unseen_gc"])
    elif cmd.name == "gradcheck":
        from .gradcheck import TOLERANCE, run_suite
        results = run_suite()
        doc = {"tolerance": TOLERANCE, "results": [vars(r) for r in results]}
        write_json(cmd.out / "gradcheck.json", doc)
        for r in results:
            print(f"{'PASS' if r.passed else 'FAIL'} {r.name:16s} max rel err {r.max_rel_error:.2e}")
        if not all(r.passed for r in results):
            return EXIT_GRADCHECK
    # wall-clock kept apart so reports stay byte-identical across reruns
    write_json(cmd.out / "timing.json", {"command": cmd.name, "seconds": time.perf_counter() - t0})
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    argv = sys.argv[1:] if argv is None else argv
    try:
        cmd = parse_and_validate(argv)
    except (ConfigError, FileNotFoundError) as e:
        print(f"vamgrid: config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        return run(cmd)
    except (DataError, GenerationError) as e:
        print(f"vamgrid: data error: {e}", file=sys.stderr)
        return EXIT_DATA
    except TrainingError as e:
        print(f"vamgrid: training error: {e}", file=sys.stderr)
        return EXIT_TRAIN
    except EvaluationError as e:
        print(f"vamgrid: evaluation error: {e}", file=sys.stderr)
        return EXIT_EVAL


if __name__ == "__main__":
    sys.exit(main())
