"""Task specifications: subgoal sequences and goal-condition predicates."""

from __future__ import annotations

from dataclasses import dataclass, field

from .core import World, category

SUBGOAL_TYPES = (
    "GotoLocation",
    "PickupObject",
    "PutObject",
    "CleanObject",
    "HeatObject",
    "CoolObject",
    "SliceObject",
    "ToggleObject",
)

TASK_TYPES = (
    "pick_and_place",
    "pick_heat_then_place",
    "pick_cool_then_place",
    "pick_clean_then_place",
    "look_at_obj_in_light",
    "slice_object",
)


@dataclass(frozen=True)
class Subgoal:
    """``objects`` are ids in the world; ``categories`` are their category names.

    GotoLocation(target); PickupObject(obj); PutObject(obj, receptacle);
    Heat/Cool/CleanObject(obj, appliance); SliceObject(obj); ToggleObject(obj).
    """

    kind: str
    objects: tuple[str, ...]
    categories: tuple[str, ...]

    def __post_init__(self):
        if self.kind not in SUBGOAL_TYPES:
            raise ValueError(f"unknown subgoal type {self.kind!r}")

    def to_json(self):
        return {"type": self.kind, "objects": list(self.objects), "categories": list(self.categories)}

    @classmethod
    def from_json(cls, d):
        return cls(d["type"], tuple(d["objects"]), tuple(d["categories"]))


@dataclass(frozen=True)
class GoalCondition:
    """``kind`` is a flag name (``heated``, ``held``...), ``in`` or ``facing``."""

    kind: str
    obj: str
    arg: str | None = None

    def holds(self, world: World) -> bool:
        o = world.obj(self.obj)
        if self.kind == "in":
            return o.container == self.arg and not o.held
        if self.kind == "facing":
            return (world.facing_cell() == o.position
                    and world.pitch == world.object_height(o) and not o.held)
        return bool(getattr(o, self.kind))

    def to_json(self):
        return [self.kind, self.obj, self.arg]

    @classmethod
    def from_json(cls, item):
        return cls(*item)


@dataclass(frozen=True)
class TaskSpec:
    task_type: str
    subgoals: tuple[Subgoal, ...]
    goal_conditions: tuple[GoalCondition, ...]
    goal_statement: tuple[str, ...] = ()
    step_instructions: tuple[tuple[str, ...], ...] = field(default=())

    def __post_init__(self):
        if not self.goal_conditions:
            raise ValueError("a task needs at least one goal condition")

    def to_json(self):
        return {
            "task_type": self.task_type,
            "subgoals": [s.to_json() for s in self.subgoals],
            "goal_conditions": [g.to_json() for g in self.goal_conditions],
            "goal_statement": list(self.goal_statement),
            "step_instructions": [list(s) for s in self.step_instructions],
        }

    @classmethod
    def from_json(cls, d):
        return cls(
            d["task_type"],
            tuple(Subgoal.from_json(s) for s in d["subgoals"]),
            tuple(GoalCondition.from_json(g) for g in d["goal_conditions"]),
            tuple(d["goal_statement"]),
            tuple(tuple(s) for s in d["step_instructions"]),
        )


def goal_conditions_met(world: World, task: TaskSpec) -> tuple[int, int]:
    met = sum(1 for g in task.goal_conditions if g.holds(world))
    return met, len(task.goal_conditions)


def subgoal_complete(world: World, sg: Subgoal) -> bool:
    """Completion test that advances the instruction pointer."""
    k = sg.kind
    if k == "GotoLocation":
        return GoalCondition("facing", sg.objects[0]).holds(world)
    o = world.obj(sg.objects[0])
    if k == "PickupObject":
        return o.held
    if k == "PutObject":
        return o.container == sg.objects[1] and not o.held
    if k == "HeatObject":
        return o.heated and not world.obj(sg.objects[1]).toggled_on
    if k == "CleanObject":
        return o.clean and not world.obj(sg.objects[1]).toggled_on
    if k == "CoolObject":
        return o.cooled and not world.obj(sg.objects[1]).open
    if k == "SliceObject":
        return o.sliced
    if k == "ToggleObject":
        return o.toggled_on
    raise ValueError(k)


def advance_pointer(world: World, task: TaskSpec, pointer: int) -> int:
    while pointer < len(task.subgoals) and subgoal_complete(world, task.subgoals[pointer]):
        pointer += 1
    return pointer


def build_task(task_type: str, world: World, obj: str, target: str | None = None) -> TaskSpec:
    """Subgoals and goal conditions for one task family (instructions unrendered)."""
    def sg(kind, *ids):
        return Subgoal(kind, ids, tuple(world.obj(i).category for i in ids))

    def find(cat_name):
        for o in world.objects:
            if o.category == cat_name:
                return o.object_id
        raise ValueError(f"no {cat_name} in world")

    appliance = {"pick_heat_then_place": ("HeatObject", "Microwave", "heated"),
                 "pick_cool_then_place": ("CoolObject", "Fridge", "cooled"),
                 "pick_clean_then_place": ("CleanObject", "Sink", "clean")}
    if task_type == "pick_and_place":
        subgoals = (sg("GotoLocation", obj), sg("PickupObject", obj),
                    sg("GotoLocation", target), sg("PutObject", obj, target))
        conds = (GoalCondition("in", obj, target),)
    elif task_type in appliance:
        kind, cat_name, flag = appliance[task_type]
        app = find(cat_name)
        subgoals = (sg("GotoLocation", obj), sg("PickupObject", obj),
                    sg("GotoLocation", app), sg(kind, obj, app),
                    sg("GotoLocation", target), sg("PutObject", obj, target))
        conds = (GoalCondition(flag, obj), GoalCondition("in", obj, target))
    elif task_type == "look_at_obj_in_light":
        lamp = find("Lamp")
        subgoals = (sg("GotoLocation", obj), sg("PickupObject", obj),
                    sg("GotoLocation", lamp), sg("ToggleObject", lamp))
        conds = (GoalCondition("held", obj), GoalCondition("toggled_on", lamp))
    elif task_type == "slice_object":
        knife = find("Knife")
        subgoals = (sg("GotoLocation", knife), sg("PickupObject", knife),
                    sg("GotoLocation", obj), sg("SliceObject", obj))
        conds = (GoalCondition("sliced", obj),)
    else:
        raise ValueError(f"unknown task type {task_type!r}")
    return TaskSpec(task_type, subgoals, conds)


def feasible_objects(task_type: str, world: World) -> list[str]:
    """Small objects that can serve as the task's main argument."""
    cats = {o.category for o in world.objects}
    need = {"pick_heat_then_place": ("Microwave", "heatable"),
            "pick_cool_then_place": ("Fridge", "coolable"),
            "pick_clean_then_place": ("Sink", "cleanable"),
            "look_at_obj_in_light": ("Lamp", None),
            "slice_object": ("Knife", "sliceable"),
            "pick_and_place": (None, None)}[task_type]
    if need[0] is not None and need[0] not in cats:
        return []
    out = []
    for o in world.objects:
        c = category(o.category)
        if c.furniture or (task_type == "slice_object" and c.name == "Knife"):
            continue
        if need[1] is None or getattr(c, need[1]):
            out.append(o.object_id)
    return out
