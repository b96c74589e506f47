"""Ablation rows and the validation/test selection-gap study."""

from __future__ import annotations

import dataclasses
import math
import os
from concurrent.futures import ProcessPoolExecutor

import numpy as np
from scipy.stats import rankdata

from .. import __version__
from ..agent import ABLATION_ROWS
from ..data import load_split
from .config import RunConfig, config_from_dict
from .evaluate import AgentPolicy, evaluate_split
from .train import train

WORKERS_ENV = "VAMGRID_WORKERS"
# published ALFRED valid-unseen SR per row; kept as labels only
REFERENCE_ROW_SR = (4.7, 9.3, 11.8, 13.8)
REFERENCE_GOTO_SHARE = 0.48
ROW_NAMES = ("base", "+wide_view", "+view_act_matching", "+act_type_gate")


def n_workers() -> int:
    try:
        return max(1, int(os.environ.get(WORKERS_ENV, "1")))
    except ValueError:
        return 1


def _map(fn, jobs):
    if n_workers() == 1 or len(jobs) == 1:
        return [fn(*j) for j in jobs]
    with ProcessPoolExecutor(max_workers=n_workers()) as pool:
        return list(pool.map(fn, *zip(*jobs)))


def evaluate(model, cfg: RunConfig, split: str, purpose: str = "eval", subgoals: bool | None = None) -> dict:
    """MetricsReport body for one split."""
    episodes = load_split(split, cfg.data.count(split), purpose=purpose,
                          data_seed=cfg.data.data_seed, cfg=cfg.env)
    return evaluate_split(AgentPolicy(model), episodes, cfg.failure_budget, cfg.step_limit_mult,
                          cfg.step_limit_add, cfg.subgoal_eval if subgoals is None else subgoals)


def metrics_report(cfg: RunConfig, splits: dict[str, dict], seed: int | None = None) -> dict:
    return {
        "tool_version": __version__,
        "config_hash": cfg.config_hash(),
        "seed": cfg.seed if seed is None else seed,
        "splits": splits,
        "reference_goto_share_alfred": REFERENCE_GOTO_SHARE,
    }


def train_split(cfg: RunConfig, seed: int | None = None, out_dir=None):
    episodes = load_split("train", cfg.data.train, purpose="train",
                          data_seed=cfg.data.data_seed, cfg=cfg.env)
    return train(cfg, episodes, seed=seed, out_dir=out_dir)


# -- ablation -------------------------------------------------------------
def _ablation_row(cfg_dict: dict, flags: tuple[bool, bool, bool]) -> dict:
    cfg = config_from_dict(cfg_dict)
    wide, match, gate = flags
    cfg.model = dataclasses.replace(cfg.model, wide_view=wide, view_act_matching=match, act_type_gate=gate)
    model, curve = train_split(cfg)
    body = evaluate(model, cfg, "valid_unseen", purpose="ablation")
    return {"wide_view": wide, "view_act_matching": match, "act_type_gate": gate,
            "sr": body["sr"], "gc": body["gc"], "final_loss": curve[-1][1],
            "subgoals": body.get("subgoals", {})}


def run_ablation(cfg: RunConfig) -> dict:
    """Train and score the four cumulative rows on valid_unseen with shared data and seed."""
    rows = _map(_ablation_row, [(cfg.to_dict(), flags) for flags in ABLATION_ROWS])
    for i, r in enumerate(rows):
        r["row"] = i + 1
        r["model"] = ROW_NAMES[i]
        r["reference_sr_alfred"] = REFERENCE_ROW_SR[i]
    return {
        "tool_version": __version__,
        "config_hash": cfg.config_hash(),
        "seed": cfg.seed,
        "split": "valid_unseen",
        "rows": rows,
        "reference_note": "reference_sr_alfred: published ALFRED numbers, not reproducible in this gridworld",
    }


# -- gap study ------------------------------------------------------------
def spearman(x, y) -> float | None:
    """Rank correlation with average ranks for ties; None when a column is constant.

    Doubled ranks are integers, so every sum is exact and the only rounding
    is the final division by an integer square root.
    """
    rx = [int(r) for r in 2 * rankdata(x)]
    ry = [int(r) for r in 2 * rankdata(y)]
    n = len(rx)
    sxx = n * sum(a * a for a in rx) - sum(rx) ** 2
    syy = n * sum(b * b for b in ry) - sum(ry) ** 2
    if sxx == 0 or syy == 0:
        return None
    sxy = n * sum(a * b for a, b in zip(rx, ry)) - sum(rx) * sum(ry)
    return sxy / math.sqrt(sxx * syy)


def selection_stats(val: list[float], test: list[float]) -> dict:
    sel = int(np.argmax(val))
    return {
        "selected_index": sel,
        "regret": float(max(test) - test[sel]),
        "spearman": spearman(val, test) if len(val) > 1 else None,
    }


def _gap_seed(cfg_dict: dict, seed: int) -> dict:
    cfg = config_from_dict(cfg_dict)
    model, _ = train_split(cfg, seed=seed)
    val = evaluate(model, cfg, "valid_unseen", purpose="gap_study", subgoals=False)
    test = evaluate(model, cfg, "test_unseen", purpose="gap_study", subgoals=False)
    return {"seed": seed, "valid_unseen_sr": val["sr"], "test_unseen_sr": test["sr"],
            "valid_unseen_gc": val["gc"], "test_unseen_gc": test["gc"]}


def gap_study_from_rows(rows: list[dict]) -> dict:
    val = [r["valid_unseen_sr"] for r in rows]
    test = [r["test_unseen_sr"] for r in rows]
    stats = selection_stats(val, test)
    ddof = 1 if len(rows) > 1 else 0
    return {
        "rows": rows,
        "selected_seed": rows[stats["selected_index"]]["seed"],
        "regret": stats["regret"],
        "spearman": stats["spearman"],
        "sr_std": {"valid_unseen": float(np.std(val, ddof=ddof)),
                   "test_unseen": float(np.std(test, ddof=ddof))},
    }


def gap_study(cfg: RunConfig, k: int | None = None) -> dict:
    """Train ``k`` seeds of one config, pick by valid_unseen SR, measure test_unseen regret."""
    k = cfg.gap_seeds if k is None else k
    if k < 1:
        raise ValueError("gap study needs at least one seed")
    seeds = [cfg.seed + i for i in range(k)]
    rows = _map(_gap_seed, [(cfg.to_dict(), s) for s in seeds])
    return {"tool_version": __version__, "config_hash": cfg.config_hash(), "seed": cfg.seed,
            **gap_study_from_rows(rows)}
