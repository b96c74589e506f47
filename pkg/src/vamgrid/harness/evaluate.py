"""Closed-loop rollouts, SR/GC metrics and the per-subgoal breakdown."""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from ..agent import VAMAgent, select_action
from ..data import DataError, history_window, instruction_tokens, make_step_batch
from ..env.core import Action, ActionKind, CATEGORIES, N_ACTIONS, World, observe, step
from ..env.generate import Episode
from ..env.language import Vocabulary
from ..env.planner import Trajectory, TrajectoryStep, replay
from ..env.tasks import SUBGOAL_TYPES, advance_pointer, goal_conditions_met, subgoal_complete
from ..tensor import no_grad


class EvaluationError(RuntimeError):
    pass


@dataclass
class RolloutState:
    episode: Episode
    world: World
    pointer: int
    history: list[int]
    limit: int
    offset: int = 0            # oracle step index the rollout starts from
    fixed_subgoal: int | None = None
    steps: list[TrajectoryStep] = field(default_factory=list)
    failures: int = 0
    done: bool = False
    stopped: bool = False

    @property
    def t(self) -> int:
        return len(self.steps)

    @property
    def instruction_index(self) -> int:
        n = len(self.episode.task.subgoals)
        return min(self.pointer, n - 1)


@dataclass
class RolloutResult:
    trajectory: Trajectory
    success: bool
    met: int
    total: int
    final_world: World
    stopped: bool

    @property
    def gc_fraction(self) -> float:
        return self.met / self.total


# -- policies -------------------------------------------------------------
class AgentPolicy:
    def __init__(self, model: VAMAgent, vocab: Vocabulary | None = None):
        self.model = model
        self.vocab = vocab or Vocabulary()

    def act(self, states: list[RolloutState]) -> list[Action]:
        obs = [observe(s.world) for s in states]
        k = self.model.cfg.history_len
        batch = make_step_batch(
            self.vocab,
            [instruction_tokens(s.episode.task, s.instruction_index) for s in states],
            obs, [s.world for s in states],
            [history_window(s.history, k) for s in states],
        )
        with no_grad():
            out = self.model(batch)
        actions = []
        for i, s in enumerate(states):
            a, cat = select_action(out.scores.data[i], out.object_logits.data[i], batch.front_visible[i])
            actions.append(Action(ActionKind(a), _object_for(s.world, obs[i].front_visible, cat)))
        return actions


def _object_for(world: World, visible, cat: int | None) -> str | None:
    if cat is None:
        return None
    name = CATEGORIES[cat].name
    for oid in visible:
        if world.obj(oid).category == name:
            return oid
    return None


class OraclePolicy:
    """Emits the ground-truth action sequence."""

    def act(self, states):
        acts = []
        for s in states:
            gt = s.episode.trajectory.actions
            i = s.offset + s.t
            acts.append(gt[i] if i < len(gt) else Action(ActionKind.Stop))
        return acts


class StopPolicy:
    def act(self, states):
        return [Action(ActionKind.Stop) for _ in states]


class RandomPolicy:
    """Uniform over action kinds; object uniform over the front-visible list."""

    def __init__(self, seed: int = 0):
        self.rng = np.random.default_rng(seed)

    def act(self, states):
        acts = []
        for s in states:
            kind = ActionKind(int(self.rng.integers(N_ACTIONS)))
            obj = None
            if kind.action_type == 1 and kind != ActionKind.Stop:
                vis = observe(s.world).front_visible
                obj = vis[int(self.rng.integers(len(vis)))] if vis else None
            acts.append(Action(kind, obj))
        return acts


# -- rollouts -------------------------------------------------------------
def step_limit(n_oracle: int, mult: int = 2, add: int = 20) -> int:
    return mult * n_oracle + add


def _run(policy, states: list[RolloutState], failure_budget: int):
    active = [s for s in states if not s.done]
    while active:
        actions = policy.act(active)
        for s, a in zip(active, actions):
            s.steps.append(TrajectoryStep(s.world.state_hash(), observe(s.world), a, s.instruction_index))
            if a.kind == ActionKind.Stop:
                s.done = s.stopped = True
                continue
            s.world, ok = step(s.world, a)
            s.history.append(int(a.kind))
            if not ok:
                s.failures += 1
            if s.fixed_subgoal is None:
                s.pointer = advance_pointer(s.world, s.episode.task, s.pointer)
            elif subgoal_complete(s.world, s.episode.task.subgoals[s.fixed_subgoal]):
                s.done = True
            if s.failures >= failure_budget or s.t >= s.limit:
                s.done = True
        active = [s for s in active if not s.done]


def rollout_many(policy, episodes: list[Episode], failure_budget: int = 10,
                 limit_mult: int = 2, limit_add: int = 20) -> list[RolloutResult]:
    """Roll out every episode in lockstep, the policy seeing its own history."""
    states = [
        RolloutState(ep, ep.world, advance_pointer(ep.world, ep.task, 0), [],
                     step_limit(len(ep.trajectory), limit_mult, limit_add))
        for ep in episodes
    ]
    _run(policy, states, failure_budget)
    results = []
    for s in states:
        met, total = goal_conditions_met(s.world, s.episode.task)
        results.append(RolloutResult(Trajectory(tuple(s.steps)), met == total, met, total,
                                     s.world, s.stopped))
    return results


def rollout(policy, episode: Episode, failure_budget: int = 10,
            limit_mult: int = 2, limit_add: int = 20) -> RolloutResult:
    return rollout_many(policy, [episode], failure_budget, limit_mult, limit_add)[0]


def subgoal_rollouts(policy, episodes: list[Episode], failure_budget: int = 10,
                     limit_mult: int = 2, limit_add: int = 20) -> list[tuple[str, bool]]:
    """Start each subgoal from the oracle's state at its first step and run only that subgoal."""
    states = []
    for ep in episodes:
        labels = ep.trajectory.subgoal_indices
        actions = ep.trajectory.actions
        worlds = None
        for j, sg in enumerate(ep.task.subgoals):
            if j not in labels:
                continue  # satisfied before it became current
            start = labels.index(j)
            seg = sum(1 for lab, a in zip(labels, actions) if lab == j and a.kind != ActionKind.Stop)
            worlds = worlds or replay(ep.world, actions)
            states.append(RolloutState(ep, worlds[start], j, [int(a.kind) for a in actions[:start]],
                                       step_limit(seg, limit_mult, limit_add), offset=start,
                                       fixed_subgoal=j))
    _run(policy, states, failure_budget)
    return [(s.episode.task.subgoals[s.fixed_subgoal].kind,
             subgoal_complete(s.world, s.episode.task.subgoals[s.fixed_subgoal])) for s in states]


# -- metrics --------------------------------------------------------------
def success_rates(results: list[RolloutResult]) -> tuple[float, float]:
    if not results:
        raise EvaluationError("cannot score an empty split")
    sr = 100.0 * sum(r.success for r in results) / len(results)
    gc = 100.0 * sum(r.met for r in results) / sum(r.total for r in results)
    return sr, gc


def subgoal_table(outcomes: list[tuple[str, bool]]) -> dict:
    """Per-type success rate and share of all subgoal instances (shares sum to 1)."""
    counts = Counter(k for k, _ in outcomes)
    wins = Counter(k for k, ok in outcomes if ok)
    n = len(outcomes)
    table = {}
    for kind in SUBGOAL_TYPES:
        if counts[kind]:
            table[kind] = {
                "count": counts[kind],
                "success_rate": 100.0 * wins[kind] / counts[kind],
                "share": counts[kind] / n,
            }
    return table


def evaluate_split(policy, episodes: list[Episode], failure_budget: int = 10, limit_mult: int = 2,
                   limit_add: int = 20, subgoals: bool = True) -> dict:
    if not episodes:
        raise DataError("empty split")
    results = rollout_many(policy, episodes, failure_budget, limit_mult, limit_add)
    sr, gc = success_rates(results)
    report = {
        "episodes": len(results),
        "sr": sr,
        "gc": gc,
        "per_episode": [[r.met, r.total] for r in results],
    }
    if subgoals:
        report["subgoals"] = subgoal_table(subgoal_rollouts(policy, episodes, failure_budget,
                                                            limit_mult, limit_add))
    return report
