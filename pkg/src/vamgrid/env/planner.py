"""Expert demonstrations: breadth-first navigation plus scripted manipulation."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

from .core import Action, ActionKind, HEADINGS, ViewObservation, World, observe, step
from .tasks import Subgoal, TaskSpec, advance_pointer, goal_conditions_met

_NAV_ORDER = (ActionKind.MoveForward, ActionKind.TurnLeft, ActionKind.TurnRight)


class PlanningError(RuntimeError):
    pass


@dataclass(frozen=True)
class TrajectoryStep:
    state_hash: str
    observation: ViewObservation
    action: Action
    subgoal_index: int


@dataclass(frozen=True)
class Trajectory:
    steps: tuple[TrajectoryStep, ...]

    def __len__(self):
        return len(self.steps)

    @property
    def actions(self) -> list[Action]:
        return [s.action for s in self.steps]

    @property
    def subgoal_indices(self) -> list[int]:
        return [s.subgoal_index for s in self.steps]


def shortest_path(world: World, target_cell: tuple[int, int]) -> list[ActionKind]:
    """Fewest MoveForward/TurnLeft/TurnRight actions until the agent faces ``target_cell``.

    Ties resolve toward the lower action index via expansion order.
    """
    lay = world.layout
    start = (world.agent_cell, world.heading)

    def facing(state):
        (r, c), h = state
        dr, dc = HEADINGS[h]
        return (r + dr, c + dc) == target_cell

    if facing(start):
        return []
    parent: dict = {start: None}
    queue = deque([start])
    while queue:
        state = queue.popleft()
        (r, c), h = state
        for kind in _NAV_ORDER:
            if kind == ActionKind.MoveForward:
                dr, dc = HEADINGS[h]
                nxt_cell = (r + dr, c + dc)
                if not lay.traversable(nxt_cell):
                    continue
                nxt = (nxt_cell, h)
            elif kind == ActionKind.TurnLeft:
                nxt = ((r, c), (h - 1) % 4)
            else:
                nxt = ((r, c), (h + 1) % 4)
            if nxt in parent:
                continue
            parent[nxt] = (state, kind)
            if facing(nxt):
                path = []
                cur = nxt
                while parent[cur] is not None:
                    cur, k = parent[cur]
                    path.append(k)
                return path[::-1]
            queue.append(nxt)
    raise PlanningError(f"no route to face {target_cell}")


def _subgoal_actions(world: World, sg: Subgoal) -> list[Action]:
    if sg.kind == "GotoLocation":
        target = world.obj(sg.objects[0])
        acts = [Action(k) for k in shortest_path(world, target.position)]
        want = world.object_height(target)
        pitch_step = ActionKind.LookUp if want > world.pitch else ActionKind.LookDown
        acts += [Action(pitch_step)] * abs(want - world.pitch)
        return acts
    o = sg.objects[0]
    if sg.kind == "PickupObject":
        return [Action(ActionKind.Pickup, o)]
    if sg.kind == "PutObject":
        return [Action(ActionKind.Put, sg.objects[1])]
    if sg.kind in ("HeatObject", "CleanObject"):
        return [Action(ActionKind.ToggleOn, sg.objects[1]), Action(ActionKind.ToggleOff, sg.objects[1])]
    if sg.kind == "CoolObject":
        return [Action(ActionKind.Open, sg.objects[1]), Action(ActionKind.Close, sg.objects[1])]
    if sg.kind == "SliceObject":
        return [Action(ActionKind.Slice, o)]
    if sg.kind == "ToggleObject":
        return [Action(ActionKind.ToggleOn, o)]
    raise PlanningError(f"no script for {sg.kind}")


def plan_oracle(world: World, task: TaskSpec) -> Trajectory:
    """Ground-truth trajectory ending in Stop, labelled with subgoal indices.

    The label of a step is the instruction pointer when the action is taken;
    the pointer advances whenever the current subgoal's completion test holds.
    """
    n = len(task.subgoals)
    steps: list[TrajectoryStep] = []
    met, total = goal_conditions_met(world, task)
    if met == total:
        return Trajectory((TrajectoryStep(world.state_hash(), observe(world), Action(ActionKind.Stop),
                                          max(n - 1, 0)),))
    pointer = advance_pointer(world, task, 0)
    while pointer < n:
        sg = task.subgoals[pointer]
        acts = _subgoal_actions(world, sg)
        if not acts:
            raise PlanningError(f"subgoal {pointer} ({sg.kind}) produced no actions")
        for a in acts:
            steps.append(TrajectoryStep(world.state_hash(), observe(world), a, pointer))
            world, ok = step(world, a)
            if not ok:
                raise PlanningError(f"scripted action {a} failed during {sg.kind}")
            new_pointer = advance_pointer(world, task, pointer)
            if new_pointer != pointer:
                pointer = new_pointer
                break
        else:
            raise PlanningError(f"subgoal {pointer} ({sg.kind}) not completed by its script")
    if goal_conditions_met(world, task)[0] != len(task.goal_conditions):
        raise PlanningError("goal conditions unmet after all subgoals")
    steps.append(TrajectoryStep(world.state_hash(), observe(world), Action(ActionKind.Stop), n - 1))
    return Trajectory(tuple(steps))


def replay(world: World, actions) -> list[World]:
    """Worlds before each action plus the final world."""
    worlds = [world]
    for a in actions:
        world, _ = step(world, a)
        worlds.append(world)
    return worlds
