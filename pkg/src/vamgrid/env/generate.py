"""Procedural room layouts, episode sampling, and split layout pools."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .core import CATEGORIES, Layout, ObjectState, SPLITS, World, category
from .language import with_instructions
from .planner import PlanningError, Trajectory, plan_oracle
from .tasks import TASK_TYPES, TaskSpec, build_task, feasible_objects, goal_conditions_met

ARCHETYPES = {
    # (always present, optional furniture, small-object pool)
    "kitchen": (("Counter", "Fridge", "Microwave", "Sink"),
                ("Table", "Shelf", "Cabinet", "GarbageCan"),
                ("Apple", "Tomato", "Bread", "Potato", "Mug", "Pan", "Plate", "Cup", "Knife")),
    "bathroom": (("Sink", "Counter", "Lamp"),
                 ("Shelf", "Cabinet", "GarbageCan", "Toilet"),
                 ("SoapBar", "Cloth", "Cup", "Candle", "Vase", "Watch")),
    "bedroom": (("Bed", "Desk", "Lamp"),
                ("Shelf", "Dresser", "GarbageCan"),
                ("Book", "Pen", "CellPhone", "KeyChain", "Pillow", "CreditCard", "Watch", "Mug")),
    "livingroom": (("Sofa", "CoffeeTable", "Lamp"),
                   ("TVStand", "Shelf", "Table", "GarbageCan"),
                   ("RemoteControl", "Book", "Vase", "KeyChain", "Pillow", "CreditCard", "Candle", "Watch")),
}
ARCHETYPE_NAMES = tuple(ARCHETYPES)
_LAYOUT_SALT = 0x5EED
MAX_RESAMPLES = 50


class GenerationError(RuntimeError):
    pass


@dataclass(frozen=True)
class EnvConfig:
    grid_size: int = 9
    n_seen_layouts: int = 40
    n_unseen_layouts: int = 10
    min_objects: int = 8
    max_objects: int = 14
    max_pillars: int = 2


def layout_pool(split: str, cfg: EnvConfig = EnvConfig()) -> range:
    """Layout ids a split may draw from.

    Seen evaluation splits reuse the training pool; each unseen split owns a
    disjoint block.
    """
    if split in ("train", "valid_seen", "test_seen"):
        return range(0, cfg.n_seen_layouts)
    if split == "valid_unseen":
        return range(1000, 1000 + cfg.n_unseen_layouts)
    if split == "test_unseen":
        return range(2000, 2000 + cfg.n_unseen_layouts)
    raise ValueError(f"unknown split {split!r}")


def _free_cells_connected(grid, blocked) -> bool:
    free = [(r, c) for r, row in enumerate(grid) for c, ch in enumerate(row)
            if ch == "." and (r, c) not in blocked]
    if not free:
        return False
    seen = {free[0]}
    q = deque([free[0]])
    while q:
        r, c = q.popleft()
        for dr, dc in ((1, 0), (-1, 0), (0, 1), (0, -1)):
            n = (r + dr, c + dc)
            if n not in seen and n in set(free):
                seen.add(n)
                q.append(n)
    return len(seen) == len(free)


def _has_access(grid, blocked, cell) -> bool:
    r, c = cell
    return any(grid[r + dr][c + dc] == "." and (r + dr, c + dc) not in blocked
               for dr, dc in ((1, 0), (-1, 0), (0, 1), (0, -1)))


@lru_cache(maxsize=4096)
def make_layout(layout_id: int, cfg: EnvConfig = EnvConfig()) -> tuple[Layout, tuple[tuple[str, tuple[int, int]], ...]]:
    """Room grid plus furniture placement for a layout id; pure in its inputs."""
    rng = np.random.default_rng([_LAYOUT_SALT, layout_id])
    archetype = ARCHETYPE_NAMES[layout_id % len(ARCHETYPE_NAMES)]
    fixed, optional, _ = ARCHETYPES[archetype]
    n = cfg.grid_size
    for _ in range(MAX_RESAMPLES):
        rows = [["#" if r in (0, n - 1) or c in (0, n - 1) else "." for c in range(n)] for r in range(n)]
        # pillars in the interior, away from the perimeter ring
        inner = [(r, c) for r in range(3, n - 3) for c in range(2, n - 2)] + \
                [(r, c) for r in range(2, n - 2) for c in (2, n - 3)]
        inner = sorted(set(inner))
        for i in rng.choice(len(inner), size=int(rng.integers(0, cfg.max_pillars + 1)), replace=False):
            r, c = inner[i]
            rows[r][c] = "#"
        grid = tuple("".join(row) for row in rows)
        n_opt = int(rng.integers(2, len(optional) + 1))
        furniture = list(fixed) + [optional[i] for i in sorted(rng.choice(len(optional), n_opt, replace=False))]
        ring = [(r, c) for r in range(1, n - 1) for c in range(1, n - 1)
                if (r in (1, n - 2) or c in (1, n - 2))
                and not (r in (1, n - 2) and c in (1, n - 2))]
        picks = rng.choice(len(ring), size=len(furniture), replace=False)
        placement = [(name, ring[i]) for name, i in zip(furniture, picks)]
        blocked = frozenset(cell for _, cell in placement)
        if all(_has_access(grid, blocked, cell) for cell in blocked) and _free_cells_connected(grid, blocked):
            layout = Layout(layout_id, archetype, grid, blocked)
            return layout, tuple(placement)
    raise GenerationError(f"could not build layout {layout_id}")


def _sample_episode(rng: np.random.Generator, seed: int, split: str, cfg: EnvConfig):
    pool = layout_pool(split, cfg)
    layout_id = int(pool[int(rng.integers(len(pool)))])
    layout, placement = make_layout(layout_id, cfg)
    _, _, small_pool = ARCHETYPES[layout.archetype]

    objects = [ObjectState(f"{name}_{i}", name, cell) for i, (name, cell) in enumerate(placement)]
    surfaces = [o for o in objects if category(o.category).surface]
    lo = max(3, cfg.min_objects - len(objects))
    hi = min(len(small_pool), cfg.max_objects - len(objects))
    n_small = int(rng.integers(lo, hi + 1))
    for name in [small_pool[i] for i in sorted(rng.choice(len(small_pool), n_small, replace=False))]:
        host = surfaces[int(rng.integers(len(surfaces)))]
        objects.append(ObjectState(f"{name}_{len(objects)}", name, host.position, container=host.object_id))

    free = [(r, c) for r in range(layout.height) for c in range(layout.width) if layout.traversable((r, c))]
    cell = free[int(rng.integers(len(free)))]
    world = World(seed, split, layout, tuple(objects), cell, int(rng.integers(4)), 0)

    options = [t for t in TASK_TYPES if feasible_objects(t, world)]
    task_type = options[int(rng.integers(len(options)))]
    cands = feasible_objects(task_type, world)
    obj = cands[int(rng.integers(len(cands)))]
    target = None
    if task_type not in ("look_at_obj_in_light", "slice_object"):
        recs = [s.object_id for s in surfaces if s.object_id != world.obj(obj).container]
        target = recs[int(rng.integers(len(recs)))]
    task = build_task(task_type, world, obj, target)
    return world, task


def generate_world(seed: int, split: str, cfg: EnvConfig = EnvConfig()) -> tuple[World, TaskSpec]:
    """Deterministic (World, TaskSpec) for ``seed`` drawn from the split's layout pool.

    Unachievable or already-satisfied draws are resampled from the same
    generator, up to ``MAX_RESAMPLES`` times.
    """
    if split not in SPLITS:
        raise ValueError(f"unknown split {split!r}")
    rng = np.random.default_rng([int(seed), SPLITS.index(split)])
    for _ in range(MAX_RESAMPLES):
        world, task = _sample_episode(rng, seed, split, cfg)
        met, total = goal_conditions_met(world, task)
        if met == total:
            continue
        try:
            plan_oracle(world, task)
        except PlanningError:
            continue
        return world, with_instructions(task, seed)
    raise GenerationError(f"no achievable task for seed {seed} in {split}")


@dataclass(frozen=True)
class Episode:
    seed: int
    split: str
    world: World
    task: TaskSpec
    trajectory: Trajectory

    @property
    def layout_id(self) -> int:
        return self.world.layout.layout_id


def episode_seed(split: str, index: int, data_seed: int = 0) -> int:
    ss = np.random.SeedSequence([int(data_seed), SPLITS.index(split), int(index)])
    return int(ss.generate_state(1, dtype=np.uint32)[0])


def make_episode(seed: int, split: str, cfg: EnvConfig = EnvConfig()) -> Episode:
    world, task = generate_world(seed, split, cfg)
    return Episode(seed, split, world, task, plan_oracle(world, task))


def all_categories() -> tuple[str, ...]:
    return tuple(c.name for c in CATEGORIES)
