"""Templated goal and step instructions over a closed vocabulary."""

from __future__ import annotations

from dataclasses import replace
from importlib import resources

import numpy as np

from .core import CATEGORIES
from .tasks import TaskSpec

PAD, SEP = "<pad>", "<sep>"
SPECIAL_TOKENS = (PAD, SEP)

# {o} main object, {r} receptacle, {a} appliance/light, {t} destination
GOAL_TEMPLATES = {
    "pick_and_place": ("put the {o} on the {r}", "move the {o} to the {r}",
                       "place a {o} on the {r}"),
    "pick_heat_then_place": ("put a heated {o} on the {r}", "place a warm {o} on the {r}",
                             "heat a {o} and put it on the {r}"),
    "pick_cool_then_place": ("put a chilled {o} on the {r}", "place a cold {o} on the {r}",
                             "cool a {o} and put it on the {r}"),
    "pick_clean_then_place": ("put a clean {o} on the {r}", "place a washed {o} on the {r}",
                              "clean a {o} and put it on the {r}"),
    "look_at_obj_in_light": ("examine the {o} under the {a}", "look at the {o} in the light of the {a}",
                             "hold the {o} and turn on the {a}"),
    "slice_object": ("slice the {o}", "cut the {o} into pieces", "use a knife to slice the {o}"),
}

STEP_TEMPLATES = {
    "GotoLocation": ("walk to the {t}", "go to the {t}", "head over to the {t}",
                     "turn and move to the {t}"),
    "PickupObject": ("pick up the {o}", "grab the {o}", "take the {o}"),
    "PutObject": ("put the {o} on the {r}", "place the {o} on the {r}",
                  "set the {o} down on the {r}"),
    "HeatObject": ("heat the {o} in the {a}", "warm the {o} using the {a}",
                   "cook the {o} in the {a}"),
    "CoolObject": ("chill the {o} in the {a}", "cool the {o} in the {a}",
                   "put the {o} in the {a} to cool it"),
    "CleanObject": ("rinse the {o} in the {a}", "wash the {o} in the {a}",
                    "clean the {o} at the {a}"),
    "SliceObject": ("slice the {o} with the knife", "cut the {o}", "use the knife to slice the {o}"),
    "ToggleObject": ("turn on the {o}", "switch on the {o}", "power on the {o}"),
}


def _fill(template: str, **slots: str) -> tuple[str, ...]:
    return tuple(template.format(**slots).split())


def _tok(cat: str) -> str:
    return cat.lower()


def _step_slots(sg) -> dict[str, str]:
    cats = [_tok(c) for c in sg.categories]
    if sg.kind == "GotoLocation":
        return {"t": cats[0]}
    if sg.kind == "PutObject":
        return {"o": cats[0], "r": cats[1]}
    if sg.kind in ("HeatObject", "CoolObject", "CleanObject"):
        return {"o": cats[0], "a": cats[1]}
    return {"o": cats[0]}


def _goal_slots(task: TaskSpec) -> dict[str, str]:
    sgs = task.subgoals
    if task.task_type == "slice_object":
        return {"o": _tok(sgs[-1].categories[0])}
    if task.task_type == "look_at_obj_in_light":
        return {"o": _tok(sgs[1].categories[0]), "a": _tok(sgs[-1].categories[0])}
    return {"o": _tok(sgs[-1].categories[0]), "r": _tok(sgs[-1].categories[1])}


def render_instructions(task: TaskSpec, seed: int) -> tuple[tuple[str, ...], tuple[tuple[str, ...], ...]]:
    """(goal tokens, per-subgoal tokens); paraphrase choice is seeded."""
    rng = np.random.default_rng([int(seed), 77])
    goal_t = GOAL_TEMPLATES[task.task_type]
    goal = _fill(goal_t[int(rng.integers(len(goal_t)))], **_goal_slots(task))
    steps = []
    for sg in task.subgoals:
        ts = STEP_TEMPLATES[sg.kind]
        steps.append(_fill(ts[int(rng.integers(len(ts)))], **_step_slots(sg)))
    return goal, tuple(steps)


def with_instructions(task: TaskSpec, seed: int) -> TaskSpec:
    goal, steps = render_instructions(task, seed)
    return replace(task, goal_statement=goal, step_instructions=steps)


def enumerate_vocabulary() -> list[str]:
    """Every token any template can emit, plus the specials, in a fixed order."""
    words: set[str] = set()
    for bank in (GOAL_TEMPLATES, STEP_TEMPLATES):
        for temps in bank.values():
            for t in temps:
                words.update(w for w in t.split() if not w.startswith("{"))
    words.update(_tok(c.name) for c in CATEGORIES)
    return list(SPECIAL_TOKENS) + sorted(words)


def load_vocabulary() -> list[str]:
    """The checked-in vocabulary file (one token per line)."""
    text = resources.files("vamgrid.env").joinpath("vocab.txt").read_text()
    return [line for line in text.splitlines() if line]


class Vocabulary:
    def __init__(self, tokens: list[str] | None = None):
        self.tokens = tokens if tokens is not None else load_vocabulary()
        self.index = {t: i for i, t in enumerate(self.tokens)}

    def __len__(self):
        return len(self.tokens)

    def encode(self, tokens) -> list[int]:
        try:
            return [self.index[t] for t in tokens]
        except KeyError as e:
            raise KeyError(f"token {e.args[0]!r} is outside the closed vocabulary") from None

    @property
    def pad_id(self) -> int:
        return self.index[PAD]

    @property
    def sep_id(self) -> int:
        return self.index[SEP]
