"""Split datasets, episode export, and teacher-forcing step batches."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .agent import NULL_ACTION, StepBatch
from .env.core import Action, CATEGORY_INDEX, N_CATEGORIES, SPLITS, ViewObservation, World
from .env.generate import EnvConfig, Episode, episode_seed, make_episode
from .env.language import Vocabulary
from .env.tasks import TaskSpec

TEST_SPLITS = ("test_seen", "test_unseen")
# purposes allowed to read a test split; training and model selection are not among them
TEST_READERS = ("gap_study", "eval", "gen-data")


class DataError(RuntimeError):
    pass


@dataclass
class SplitAccessLog:
    records: list[tuple[str, str]] = field(default_factory=list)

    def touched(self, split: str) -> list[str]:
        return [p for s, p in self.records if s == split]


ACCESS_LOG = SplitAccessLog()


def load_split(split: str, n: int, *, purpose: str, data_seed: int = 0,
               cfg: EnvConfig = EnvConfig(), data_dir: str | Path | None = None) -> list[Episode]:
    """Episodes of a split, generated from seeds or read from an exported directory.

    Test splits are only handed out for ``purpose`` in ``TEST_READERS``.
    """
    if split not in SPLITS:
        raise DataError(f"unknown split {split!r}")
    if split in TEST_SPLITS and purpose not in TEST_READERS:
        raise DataError(f"{purpose!r} may not read test split {split!r}")
    if n <= 0:
        raise DataError(f"split {split!r} needs a positive episode count")
    ACCESS_LOG.records.append((split, purpose))
    if data_dir is not None:
        return read_split(Path(data_dir), split, cfg)[:n]
    return [make_episode(episode_seed(split, i, data_seed), split, cfg) for i in range(n)]


# -- export ---------------------------------------------------------------
def episode_to_json(ep: Episode) -> dict:
    return {
        "seed": ep.seed,
        "split": ep.split,
        "layout_id": ep.layout_id,
        "task": ep.task.to_json(),
        "instructions": {"goal": list(ep.task.goal_statement),
                         "steps": [list(s) for s in ep.task.step_instructions]},
        "trajectory": [a.to_json() for a in ep.trajectory.actions],
        "subgoal_index": ep.trajectory.subgoal_indices,
    }


def export_split(episodes: list[Episode], out_dir: Path):
    for i, ep in enumerate(episodes):
        d = out_dir / ep.split
        d.mkdir(parents=True, exist_ok=True)
        (d / f"{i:05d}.json").write_text(json.dumps(episode_to_json(ep), indent=1, sort_keys=True) + "\n")


def read_split(root: Path, split: str, cfg: EnvConfig = EnvConfig()) -> list[Episode]:
    """Regenerate episodes from exported seeds and check them against the stored files."""
    files = sorted((root / split).glob("*.json"))
    if not files:
        raise DataError(f"no episodes under {root / split}")
    out = []
    for f in files:
        doc = json.loads(f.read_text())
        ep = make_episode(int(doc["seed"]), split, cfg)
        if ep.task != TaskSpec.from_json(doc["task"]) or \
                [a.to_json() for a in ep.trajectory.actions] != doc["trajectory"]:
            raise DataError(f"{f} does not match its regenerated episode")
        out.append(ep)
    return out


# -- featurisation --------------------------------------------------------
def instruction_tokens(task: TaskSpec, subgoal_index: int) -> list[str]:
    return list(task.goal_statement) + ["<sep>"] + list(task.step_instructions[subgoal_index])


def visible_mask(world: World, ids) -> np.ndarray:
    m = np.zeros(N_CATEGORIES, dtype=bool)
    for i in ids:
        m[CATEGORY_INDEX[world.obj(i).category]] = True
    return m


def history_window(actions: list[int], k: int) -> list[int]:
    h = actions[-k:]
    return [NULL_ACTION] * (k - len(h)) + h


@dataclass
class StepTable:
    """Flat, padded arrays for every teacher-forced step of a dataset."""

    tokens: np.ndarray
    token_mask: np.ndarray
    views: np.ndarray
    history: np.ndarray
    front_visible: np.ndarray
    action: np.ndarray
    obj: np.ndarray
    episode: np.ndarray

    def __len__(self):
        return len(self.action)

    def batch(self, rows) -> StepBatch:
        rows = np.asarray(rows)
        length = int(self.token_mask[rows].sum(axis=1).max())
        return StepBatch(self.tokens[rows, :length], self.token_mask[rows, :length], self.views[rows],
                         self.history[rows], self.front_visible[rows], self.action[rows], self.obj[rows])


def make_step_batch(vocab: Vocabulary, token_lists, observations: list[ViewObservation],
                    worlds: list[World], histories) -> StepBatch:
    """Inference-time batch from live observations."""
    ids = [vocab.encode(t) for t in token_lists]
    length = max(len(i) for i in ids)
    tokens = np.full((len(ids), length), vocab.pad_id, dtype=np.int64)
    mask = np.zeros((len(ids), length), dtype=bool)
    for r, i in enumerate(ids):
        tokens[r, :len(i)] = i
        mask[r, :len(i)] = True
    return StepBatch(tokens, mask, np.stack([o.features for o in observations]),
                     np.asarray(histories, dtype=np.int64),
                     np.stack([visible_mask(w, o.front_visible) for w, o in zip(worlds, observations)]))


def build_step_table(episodes: list[Episode], vocab: Vocabulary, history_len: int) -> StepTable:
    from .env.planner import replay

    toks, views, hist, vis, act, obj, epi = [], [], [], [], [], [], []
    for e_i, ep in enumerate(episodes):
        actions = ep.trajectory.actions
        worlds = replay(ep.world, actions)
        prev: list[int] = []
        for t, st in enumerate(ep.trajectory.steps):
            toks.append(vocab.encode(instruction_tokens(ep.task, st.subgoal_index)))
            views.append(st.observation.features)
            hist.append(history_window(prev, history_len))
            vis.append(visible_mask(worlds[t], st.observation.front_visible))
            act.append(int(st.action.kind))
            a: Action = st.action
            obj.append(CATEGORY_INDEX[worlds[t].obj(a.object_arg).category] if a.object_arg else -1)
            epi.append(e_i)
            prev.append(int(st.action.kind))
    length = max(len(t) for t in toks)
    tokens = np.full((len(toks), length), vocab.pad_id, dtype=np.int64)
    mask = np.zeros_like(tokens, dtype=bool)
    for r, t in enumerate(toks):
        tokens[r, :len(t)] = t
        mask[r, :len(t)] = True
    return StepTable(tokens, mask, np.stack(views), np.asarray(hist, dtype=np.int64),
                     np.stack(vis), np.asarray(act, dtype=np.int64), np.asarray(obj, dtype=np.int64),
                     np.asarray(epi, dtype=np.int64))
