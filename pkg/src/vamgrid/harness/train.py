"""Teacher-forced minibatch training with AdamW."""

from __future__ import annotations

import logging
import math
from pathlib import Path

import numpy as np

from ..agent import VAMAgent, compute_loss
from ..data import StepTable, build_step_table
from ..env.generate import Episode
from ..env.language import Vocabulary
from ..nn import AdamW, save_tensors
from ..tensor import no_grad
from .config import RunConfig

log = logging.getLogger(__name__)


def learning_rate(base: float, schedule: str, step: int, total: int) -> float:
    """Rate for 0-based ``step`` of ``total``; cosine never reaches zero."""
    if schedule == "constant":
        return base
    return 0.5 * base * (1.0 + math.cos(math.pi * step / total))


class TrainingError(RuntimeError):
    pass


def build_model(cfg: RunConfig, seed: int | None = None) -> VAMAgent:
    return VAMAgent(cfg.model, cfg.seed if seed is None else seed)


def action_accuracy(model: VAMAgent, table: StepTable, batch_size: int = 256) -> float:
    correct = 0
    with no_grad():
        for lo in range(0, len(table), batch_size):
            rows = np.arange(lo, min(lo + batch_size, len(table)))
            out = model(table.batch(rows))
            correct += int((out.scores.data.argmax(axis=1) == table.action[rows]).sum())
    return correct / len(table)


def train(cfg: RunConfig, episodes: list[Episode], seed: int | None = None,
          out_dir: str | Path | None = None, max_steps: int | None = None,
          model: VAMAgent | None = None) -> tuple[VAMAgent, list[tuple[int, float]]]:
    """Train on teacher-forced steps; returns the model and its (step, loss) curve.

    Shuffling and initialisation derive from ``seed`` only, so equal seeds give
    identical parameters. A checkpoint is written per epoch when ``out_dir`` is set.
    """
    seed = cfg.seed if seed is None else seed
    vocab = Vocabulary()
    table = build_step_table(episodes, vocab, cfg.model.history_len)
    model = model or build_model(cfg, seed)
    o = cfg.optim
    opt = AdamW(model.parameters(), lr=o.lr, betas=(o.beta1, o.beta2), weight_decay=o.weight_decay, eps=o.eps)
    rng = np.random.default_rng([seed, 1])
    curve: list[tuple[int, float]] = []
    step = 0
    total = cfg.epochs * -(-len(table) // cfg.batch_size)
    for epoch in range(cfg.epochs):
        order = rng.permutation(len(table))
        for lo in range(0, len(order), cfg.batch_size):
            rows = np.sort(order[lo:lo + cfg.batch_size])
            batch = table.batch(rows)
            loss = compute_loss(model(batch), batch, cfg.model.gate_lambda)
            value = loss.item()
            if not np.isfinite(value):
                dump = {"epoch": epoch, "step": step, "rows": rows.tolist(),
                        "episodes": sorted({int(e) for e in table.episode[rows]})}
                raise TrainingError(f"non-finite loss {value} at step {step}: {dump}")
            opt.state.learning_rate = learning_rate(o.lr, o.schedule, step, total)
            opt.zero_grad()
            loss.backward()
            for p in opt.params:
                if p.grad is None:  # head unused by this batch
                    p.grad = np.zeros_like(p.data)
            opt.step()
            step += 1
            curve.append((step, value))
            if max_steps is not None and step >= max_steps:
                return model, curve
        log.info("epoch %d loss %.4f", epoch, curve[-1][1])
        if out_dir is not None:
            ckpt = Path(out_dir) / "checkpoints"
            ckpt.mkdir(parents=True, exist_ok=True)
            save_tensors(ckpt / f"epoch_{epoch:03d}", model.state_dict(),
                         {"epoch": epoch, "seed": seed, "model": cfg.model.to_dict()})
    return model, curve
