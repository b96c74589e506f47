"""World state, actions, egocentric views, and the transition function.

Coordinates are ``(row, col)`` with row 0 at the top. Headings are
N=0, E=1, S=2, W=3; TurnLeft decrements, TurnRight increments. Camera pitch
is -1 (down), 0 (level) or +1 (up).

View order is fixed: ``VIEW_NAMES = (front, left, right, up, down)``.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field, replace
from enum import IntEnum
from typing import NamedTuple

import numpy as np


class EnvContractError(ValueError):
    """A call that violates the simulator's API (not an in-world failure)."""


# -- actions --------------------------------------------------------------
class ActionType(IntEnum):
    NAVIGATION = 0
    MANIPULATION = 1


class ActionKind(IntEnum):
    MoveForward = 0
    TurnLeft = 1
    TurnRight = 2
    LookUp = 3
    LookDown = 4
    Pickup = 5
    Put = 6
    Open = 7
    Close = 8
    ToggleOn = 9
    ToggleOff = 10
    Slice = 11
    Stop = 12

    @property
    def action_type(self) -> ActionType:
        return ActionType.NAVIGATION if self <= ActionKind.LookDown else ActionType.MANIPULATION


N_ACTIONS = len(ActionKind)
ACTION_TYPES = np.array([k.action_type for k in ActionKind], dtype=np.int64)


@dataclass(frozen=True)
class Action:
    kind: ActionKind
    object_arg: str | None = None

    def __post_init__(self):
        object.__setattr__(self, "kind", ActionKind(self.kind))
        if self.kind.action_type == ActionType.NAVIGATION and self.object_arg is not None:
            raise EnvContractError(f"{self.kind.name} cannot carry an object argument")

    @property
    def action_type(self) -> ActionType:
        return self.kind.action_type

    def to_json(self) -> list:
        return [self.kind.name, self.object_arg]

    @classmethod
    def from_json(cls, item) -> "Action":
        return cls(ActionKind[item[0]], item[1])

    def __str__(self):
        return self.kind.name if self.object_arg is None else f"{self.kind.name}({self.object_arg})"


# -- object catalog -------------------------------------------------------
class Category(NamedTuple):
    name: str
    token: str
    furniture: bool
    height: int = 0  # -1 low, 0 counter height, +1 high (furniture only)
    surface: bool = False
    openable: bool = False
    toggleable: bool = False
    sliceable: bool = False
    heatable: bool = False
    coolable: bool = False
    cleanable: bool = False


def _f(name, height=0, **kw):
    return Category(name, name.lower(), True, height, **kw)


def _s(name, **kw):
    return Category(name, name.lower(), False, **kw)


CATEGORIES: tuple[Category, ...] = (
    _f("Counter", surface=True),
    _f("Table", surface=True),
    _f("Shelf", 1, surface=True),
    _f("Cabinet", -1, surface=True),
    _f("GarbageCan", -1, surface=True),
    _f("Fridge", openable=True),
    _f("Microwave", toggleable=True),
    _f("Sink", toggleable=True),
    _f("Lamp", 1, toggleable=True),
    _f("Bed", surface=True),
    _f("Desk", surface=True),
    _f("Dresser", surface=True),
    _f("Sofa", surface=True),
    _f("CoffeeTable", -1, surface=True),
    _f("TVStand", surface=True),
    _f("Toilet", -1, surface=True),
    _s("Apple", sliceable=True, heatable=True, coolable=True, cleanable=True),
    _s("Tomato", sliceable=True, heatable=True, coolable=True, cleanable=True),
    _s("Bread", sliceable=True, heatable=True, coolable=True),
    _s("Potato", sliceable=True, heatable=True, coolable=True, cleanable=True),
    _s("Mug", heatable=True, coolable=True, cleanable=True),
    _s("Pan", heatable=True, coolable=True, cleanable=True),
    _s("Plate", coolable=True, cleanable=True),
    _s("Cup", heatable=True, coolable=True, cleanable=True),
    _s("Knife", cleanable=True),
    _s("SoapBar", cleanable=True),
    _s("Cloth", cleanable=True),
    _s("Candle"),
    _s("Vase"),
    _s("Book"),
    _s("Pen"),
    _s("CellPhone"),
    _s("KeyChain"),
    _s("Pillow"),
    _s("CreditCard"),
    _s("Watch"),
    _s("RemoteControl"),
)
CATEGORY_INDEX = {c.name: i for i, c in enumerate(CATEGORIES)}
N_CATEGORIES = len(CATEGORIES)


def category(name: str) -> Category:
    return CATEGORIES[CATEGORY_INDEX[name]]


# -- world ----------------------------------------------------------------
HEADINGS = ((-1, 0), (0, 1), (1, 0), (0, -1))  # N, E, S, W
SPLITS = ("train", "valid_seen", "valid_unseen", "test_seen", "test_unseen")
VIEW_NAMES = ("front", "left", "right", "up", "down")


@dataclass(frozen=True)
class ObjectState:
    object_id: str
    category: str
    position: tuple[int, int]
    container: str | None = None
    clean: bool = False
    heated: bool = False
    cooled: bool = False
    sliced: bool = False
    toggled_on: bool = False
    held: bool = False
    open: bool = False

    @property
    def cat(self) -> Category:
        return category(self.category)


@dataclass(frozen=True)
class Layout:
    layout_id: int
    archetype: str
    grid: tuple[str, ...]  # '#' wall, '.' floor
    furniture_cells: frozenset = field(default_factory=frozenset)

    @property
    def height(self) -> int:
        return len(self.grid)

    @property
    def width(self) -> int:
        return len(self.grid[0])

    def in_bounds(self, cell) -> bool:
        r, c = cell
        return 0 <= r < self.height and 0 <= c < self.width

    def is_wall(self, cell) -> bool:
        return not self.in_bounds(cell) or self.grid[cell[0]][cell[1]] == "#"

    def traversable(self, cell) -> bool:
        return not self.is_wall(cell) and cell not in self.furniture_cells


@dataclass(frozen=True)
class World:
    seed: int
    split_tag: str
    layout: Layout
    objects: tuple[ObjectState, ...]
    agent_cell: tuple[int, int]
    heading: int = 0
    pitch: int = 0

    def __post_init__(self):
        if self.split_tag not in SPLITS:
            raise EnvContractError(f"unknown split {self.split_tag!r}")
        if not self.layout.traversable(self.agent_cell):
            raise EnvContractError(f"agent cell {self.agent_cell} is not traversable")

    def obj(self, object_id: str) -> ObjectState:
        for o in self.objects:
            if o.object_id == object_id:
                return o
        raise EnvContractError(f"unknown object id {object_id!r}")

    def has_object(self, object_id: str) -> bool:
        return any(o.object_id == object_id for o in self.objects)

    def held_object(self) -> ObjectState | None:
        for o in self.objects:
            if o.held:
                return o
        return None

    def object_height(self, o: ObjectState) -> int:
        if o.cat.furniture:
            return o.cat.height
        if o.container is not None:
            return self.obj(o.container).cat.height
        return 0

    def facing_cell(self, heading: int | None = None) -> tuple[int, int]:
        dr, dc = HEADINGS[self.heading if heading is None else heading]
        return (self.agent_cell[0] + dr, self.agent_cell[1] + dc)

    def to_json(self) -> dict:
        return {
            "seed": self.seed,
            "split": self.split_tag,
            "layout_id": self.layout.layout_id,
            "archetype": self.layout.archetype,
            "grid": list(self.layout.grid),
            "objects": [
                {k: (list(v) if isinstance(v, tuple) else v) for k, v in vars(o).items()}
                for o in self.objects
            ],
            "agent": [list(self.agent_cell), self.heading, self.pitch],
        }

    def state_hash(self) -> str:
        blob = json.dumps(self.to_json(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()


# -- observation ----------------------------------------------------------
DIST_BUCKETS = 5  # 1, 2, 3, >=4, none
REGIONS = ("near", "mid", "ray")
REGION_WIDTH = N_CATEGORIES + DIST_BUCKETS + 2
VIEW_WIDTH = len(REGIONS) * N_CATEGORIES + DIST_BUCKETS + 2


def split_view_regions(features: np.ndarray) -> np.ndarray:
    """(..., VIEW_WIDTH) -> (..., 3, REGION_WIDTH): one token per region.

    Each region token is its category histogram followed by the shared
    distance-bucket and wall indicators.
    """
    c = N_CATEGORIES
    shared = features[..., 3 * c:]
    hists = [features[..., i * c:(i + 1) * c] for i in range(3)]
    return np.stack([np.concatenate([h, shared], axis=-1) for h in hists], axis=-2)


@dataclass(frozen=True)
class ViewObservation:
    features: np.ndarray  # (5, VIEW_WIDTH), order VIEW_NAMES
    visible: tuple[tuple[str, ...], ...]  # per view, pitch-matched ids in facing + next cell

    @property
    def front_visible(self) -> tuple[str, ...]:
        return self.visible[0]


def _objects_by_cell(world: World) -> dict[tuple[int, int], list[ObjectState]]:
    cells: dict[tuple[int, int], list[ObjectState]] = {}
    for o in world.objects:
        if not o.held:
            cells.setdefault(o.position, []).append(o)
    return cells


def _view(world: World, cells, heading: int, pitch: int) -> tuple[np.ndarray, tuple[str, ...]]:
    c = N_CATEGORIES
    feat = np.zeros(VIEW_WIDTH)
    lay = world.layout
    dr, dc = HEADINGS[heading]
    r, col = world.agent_cell
    visible: list[str] = []
    nearest = None
    dist = 0
    while True:
        dist += 1
        cell = (r + dr * dist, col + dc * dist)
        if not lay.in_bounds(cell):
            break
        here = cells.get(cell, ())
        if here and nearest is None:
            nearest = dist
        for o in here:
            ci = CATEGORY_INDEX[o.category]
            feat[2 * c + ci] += 1.0
            if dist <= 2 and world.object_height(o) == pitch:
                feat[(dist - 1) * c + ci] += 1.0
                visible.append(o.object_id)
        if dist == 1:
            feat[3 * c + DIST_BUCKETS] = float(lay.is_wall(cell))
            feat[3 * c + DIST_BUCKETS + 1] = float(cell in lay.furniture_cells)
        if not lay.traversable(cell):
            break
    bucket = DIST_BUCKETS - 1 if nearest is None else min(nearest, 4) - 1
    feat[3 * c + bucket] = 1.0
    return feat, tuple(visible)


def view_poses(world: World) -> list[tuple[int, int]]:
    """(heading, pitch) of each view: the pose after the matching look/turn action."""
    h, p = world.heading, world.pitch
    return [
        (h, p),
        ((h - 1) % 4, p),
        ((h + 1) % 4, p),
        (h, min(p + 1, 1)),
        (h, max(p - 1, -1)),
    ]


def observe(world: World) -> ViewObservation:
    cells = _objects_by_cell(world)
    feats, vis = [], []
    for heading, pitch in view_poses(world):
        f, v = _view(world, cells, heading, pitch)
        feats.append(f)
        vis.append(v)
    return ViewObservation(np.stack(feats), tuple(vis))


def interactable(world: World) -> tuple[str, ...]:
    """Objects the agent can act on: facing cell, at the camera's pitch."""
    cell = world.facing_cell()
    return tuple(
        o.object_id for o in world.objects
        if not o.held and o.position == cell and world.object_height(o) == world.pitch
    )


# -- transition -----------------------------------------------------------
def _with(world: World, *changed: ObjectState, **pose) -> World:
    by_id = {o.object_id: o for o in changed}
    objs = tuple(by_id.get(o.object_id, o) for o in world.objects)
    return replace(world, objects=objs, **pose)


def step(world: World, action: Action) -> tuple[World, bool]:
    """Apply ``action``; failed actions return the world unchanged with False."""
    kind = action.kind
    if action.object_arg is not None and not world.has_object(action.object_arg):
        raise EnvContractError(f"unknown object id {action.object_arg!r}")

    if kind == ActionKind.MoveForward:
        nxt = world.facing_cell()
        if not world.layout.traversable(nxt):
            return world, False
        held = world.held_object()
        moved = (replace(held, position=nxt),) if held else ()
        return _with(world, *moved, agent_cell=nxt), True
    if kind == ActionKind.TurnLeft:
        return replace(world, heading=(world.heading - 1) % 4), True
    if kind == ActionKind.TurnRight:
        return replace(world, heading=(world.heading + 1) % 4), True
    if kind == ActionKind.LookUp:
        if world.pitch >= 1:
            return world, False
        return replace(world, pitch=world.pitch + 1), True
    if kind == ActionKind.LookDown:
        if world.pitch <= -1:
            return world, False
        return replace(world, pitch=world.pitch - 1), True
    if kind == ActionKind.Stop:
        return world, True

    if action.object_arg is None or action.object_arg not in interactable(world):
        return world, False
    target = world.obj(action.object_arg)
    cat = target.cat
    held = world.held_object()

    if kind == ActionKind.Pickup:
        if cat.furniture or held is not None:
            return world, False
        return _with(world, replace(target, held=True, container=None,
                                    position=world.agent_cell)), True
    if kind == ActionKind.Put:
        if held is None or not cat.surface:
            return world, False
        return _with(world, replace(held, held=False, container=target.object_id,
                                    position=target.position)), True
    if kind == ActionKind.Open:
        if not cat.openable or target.open:
            return world, False
        return _with(world, replace(target, open=True)), True
    if kind == ActionKind.Close:
        if not cat.openable or not target.open:
            return world, False
        changed = [replace(target, open=False)]
        if cat.name == "Fridge" and held is not None and held.cat.coolable:
            changed.append(replace(held, cooled=True, heated=False))
        return _with(world, *changed), True
    if kind == ActionKind.ToggleOn:
        if not cat.toggleable or target.toggled_on:
            return world, False
        changed = [replace(target, toggled_on=True)]
        if held is not None:
            if cat.name == "Sink" and held.cat.cleanable:
                changed.append(replace(held, clean=True))
            elif cat.name == "Microwave" and held.cat.heatable:
                changed.append(replace(held, heated=True, cooled=False))
        return _with(world, *changed), True
    if kind == ActionKind.ToggleOff:
        if not cat.toggleable or not target.toggled_on:
            return world, False
        return _with(world, replace(target, toggled_on=False)), True
    if kind == ActionKind.Slice:
        if not cat.sliceable or target.sliced or held is None or held.category != "Knife":
            return world, False
        return _with(world, replace(target, sliced=True)), True
    raise EnvContractError(f"unhandled action {action}")
