import dataclasses

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import counter_with_apple, hand_world, open_room
from vamgrid.env.core import (ACTION_TYPES, Action, ActionKind, ActionType, EnvContractError,
                              ObjectState, SPLITS, VIEW_WIDTH, World, interactable, observe, step,
                              view_poses)
from vamgrid.env.generate import (EnvConfig, GenerationError, episode_seed, generate_world,
                                  layout_pool, make_episode, make_layout)
from vamgrid.env.language import (STEP_TEMPLATES, Vocabulary, enumerate_vocabulary, load_vocabulary,
                                  render_instructions)
from vamgrid.env.planner import plan_oracle, replay
from vamgrid.env.tasks import (SUBGOAL_TYPES, GoalCondition, Subgoal, TaskSpec, build_task,
                               goal_conditions_met)

A = ActionKind


# -- actions --------------------------------------------------------------
def test_action_type_is_a_function_of_kind():
    assert [int(k.action_type) for k in A] == list(ACTION_TYPES)
    assert {k for k in A if k.action_type == ActionType.NAVIGATION} == {
        A.MoveForward, A.TurnLeft, A.TurnRight, A.LookUp, A.LookDown}


def test_navigation_never_carries_an_object():
    with pytest.raises(EnvContractError):
        Action(A.TurnLeft, "Apple_1")


def test_unknown_object_id_is_a_contract_error():
    w = hand_world(counter_with_apple())
    with pytest.raises(EnvContractError):
        step(w, Action(A.Pickup, "Ghost_99"))


# -- generation -----------------------------------------------------------
def test_generation_is_deterministic():
    a, ta = generate_world(7, "train")
    b, tb = generate_world(7, "train")
    assert a.state_hash() == b.state_hash() and ta == tb


def test_unseen_pools_disjoint_from_train():
    assert not set(layout_pool("valid_unseen")) & set(layout_pool("train"))
    assert not set(layout_pool("test_unseen")) & set(layout_pool("train"))
    assert not set(layout_pool("test_unseen")) & set(layout_pool("valid_unseen"))
    assert set(layout_pool("valid_seen")) == set(layout_pool("train")) == set(layout_pool("test_seen"))


@pytest.mark.parametrize("split", SPLITS)
def test_episodes_use_their_split_pool(split):
    pool = set(layout_pool(split))
    for i in range(10):
        ep = make_episode(episode_seed(split, i), split)
        assert ep.layout_id in pool
        assert ep.world.layout.traversable(ep.world.agent_cell)
        assert 8 <= len(ep.world.objects) <= 14


def test_layouts_are_walled_and_connected():
    for lid in list(range(5)) + [1000, 2000]:
        lay, _ = make_layout(lid)
        assert lay.height == lay.width == 9
        assert all(ch == "#" for ch in lay.grid[0] + lay.grid[-1])


def test_generation_error_when_nothing_is_plannable(monkeypatch):
    import vamgrid.env.generate as gen
    from vamgrid.env.planner import PlanningError

    def refuse(world, task):
        raise PlanningError("nope")
    monkeypatch.setattr(gen, "plan_oracle", refuse)
    with pytest.raises(GenerationError):
        gen.generate_world(3, "train")


def test_oracle_solves_100_worlds():
    for i in range(100):
        ep = make_episode(episode_seed("train", i, 5), "train")
        final = replay(ep.world, ep.trajectory.actions)[-1]
        met, total = goal_conditions_met(final, ep.task)
        assert met == total
        assert goal_conditions_met(ep.world, ep.task)[0] < total


def test_replay_reproduces_trajectory_hashes(train_episodes):
    for ep in train_episodes:
        worlds = replay(ep.world, ep.trajectory.actions)
        assert [w.state_hash() for w in worlds[:-1]] == [s.state_hash for s in ep.trajectory.steps]
        assert ep.trajectory.actions[-1].kind == A.Stop


def test_gc_monotone_at_subgoal_boundaries(train_episodes):
    for ep in train_episodes:
        worlds = replay(ep.world, ep.trajectory.actions)
        labels = ep.trajectory.subgoal_indices
        boundary = [0] + [t for t in range(1, len(labels)) if labels[t] != labels[t - 1]] + [len(labels)]
        mets = [goal_conditions_met(worlds[t], ep.task)[0] for t in boundary]
        assert mets == sorted(mets)


# -- observation ----------------------------------------------------------
def test_observation_shape(train_episodes):
    obs = observe(train_episodes[0].world)
    assert obs.features.shape == (5, VIEW_WIDTH) and len(obs.visible) == 5


def test_views_match_rotated_front_views():
    rng = np.random.default_rng(1)
    for i in range(500):
        ep = make_episode(episode_seed("train", i % 25, 9), "train")
        lay = ep.world.layout
        free = [(r, c) for r in range(lay.height) for c in range(lay.width) if lay.traversable((r, c))]
        w = dataclasses.replace(ep.world, agent_cell=free[int(rng.integers(len(free)))],
                                heading=int(rng.integers(4)), pitch=int(rng.integers(-1, 2)))
        obs = observe(w)
        for v, (h, p) in enumerate(view_poses(w)):
            ref = observe(dataclasses.replace(w, heading=h, pitch=p))
            np.testing.assert_array_equal(obs.features[v], ref.features[0])
            assert obs.visible[v] == ref.visible[0]


def test_walled_in_agent_sees_identical_views():
    w = World(0, "train", open_room(3), (), (1, 1), 0, 0)
    f = observe(w).features
    for v in range(1, 5):
        np.testing.assert_array_equal(f[v], f[0])


def test_pitch_gates_visibility():
    objs = [ObjectState("Shelf_0", "Shelf", (2, 3)),
            ObjectState("Book_1", "Book", (2, 3), container="Shelf_0")]
    w = hand_world(objs)
    assert observe(w).front_visible == ()
    up = step(w, Action(A.LookUp))[0]
    assert set(observe(up).front_visible) == {"Shelf_0", "Book_1"}
    assert set(interactable(up)) == {"Shelf_0", "Book_1"}


# -- transitions ----------------------------------------------------------
def test_turn_left_four_times_is_identity():
    w = hand_world(counter_with_apple())
    x = w
    for _ in range(4):
        x, ok = step(x, Action(A.TurnLeft))
        assert ok
    assert x.state_hash() == w.state_hash()


def test_blocked_move_is_a_noop():
    w = hand_world(agent=(1, 1), heading=0)
    nxt, ok = step(w, Action(A.MoveForward))
    assert not ok and nxt.state_hash() == w.state_hash()


def test_pickup_sets_held(train_episodes):
    for ep in train_episodes:
        worlds = replay(ep.world, ep.trajectory.actions)
        for t, a in enumerate(ep.trajectory.actions):
            if a.kind == A.Pickup:
                after, ok = step(worlds[t], a)
                assert ok and after.obj(a.object_arg).held
                assert after.obj(a.object_arg).position == after.agent_cell
                return
    pytest.fail("no pickup in the sample")


def test_pickup_from_adjacent_counter():
    w = hand_world(counter_with_apple((2, 3)))
    w2, ok = step(w, Action(A.Pickup, "Apple_1"))
    assert ok and w2.obj("Apple_1").held
    # already holding: second pickup fails and changes nothing
    w3, ok = step(w2, Action(A.Pickup, "Apple_1"))
    assert not ok and w3 == w2


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10_000), st.lists(st.integers(0, 12), min_size=1, max_size=40),
       st.lists(st.integers(0, 20), min_size=40, max_size=40))
def test_random_walks_respect_invariants(seed, kinds, picks):
    world, _ = generate_world(seed, "train")
    for kind, pick in zip(kinds, picks):
        vis = observe(world).front_visible
        obj = vis[pick % len(vis)] if vis and kind >= 5 and kind != 12 else None
        before = world.state_hash()
        world, ok = step(world, Action(ActionKind(kind), obj))
        if not ok:
            assert world.state_hash() == before
        assert world.layout.traversable(world.agent_cell)
        assert sum(o.held for o in world.objects) <= 1
        for o in world.objects:
            assert not (o.heated and o.cooled)
            if o.held:
                assert o.position == world.agent_cell


# -- planner --------------------------------------------------------------
def test_plan_for_satisfied_task_is_stop():
    w = hand_world(counter_with_apple())
    task = TaskSpec("pick_and_place", (Subgoal("PutObject", ("Apple_1", "Counter_0"), ("Apple", "Counter")),),
                    (GoalCondition("in", "Apple_1", "Counter_0"),))
    assert [a.kind for a in plan_oracle(w, task).actions] == [A.Stop]


def test_plan_single_goto_adjacent():
    w = hand_world(counter_with_apple((1, 3)), agent=(3, 3), heading=0)
    task = TaskSpec("pick_and_place", (Subgoal("GotoLocation", ("Counter_0",), ("Counter",)),),
                    (GoalCondition("facing", "Counter_0"),))
    assert [a.kind for a in plan_oracle(w, task).actions] == [A.MoveForward, A.Stop]


def _kitchen():
    return hand_world([
        ObjectState("Counter_0", "Counter", (1, 3)),
        ObjectState("Microwave_1", "Microwave", (3, 5)),
        ObjectState("Pan_2", "Pan", (1, 3), container="Counter_0"),
        ObjectState("Table_3", "Table", (5, 3)),
    ], agent=(3, 3))


def test_heat_single_predicate():
    w = _kitchen()
    full = build_task("pick_heat_then_place", w, "Pan_2", "Table_3")
    task = dataclasses.replace(full, subgoals=full.subgoals[:4],
                               goal_conditions=(GoalCondition("heated", "Pan_2"),))
    assert goal_conditions_met(w, task) == (0, 1)
    final = replay(w, plan_oracle(w, task).actions)[-1]
    assert goal_conditions_met(final, task) == (1, 1)


def test_full_heat_task_solved():
    w = _kitchen()
    task = build_task("pick_heat_then_place", w, "Pan_2", "Table_3")
    final = replay(w, plan_oracle(w, task).actions)[-1]
    assert goal_conditions_met(final, task) == (2, 2)
    assert not final.obj("Microwave_1").toggled_on


def test_empty_goal_conditions_rejected():
    with pytest.raises(ValueError):
        TaskSpec("slice_object", (), ())


# -- language -------------------------------------------------------------
def test_vocab_file_matches_templates():
    assert load_vocabulary() == enumerate_vocabulary()
    assert set(STEP_TEMPLATES) == set(SUBGOAL_TYPES)


def test_heat_pan_instruction_mentions_pan():
    w = _kitchen()
    task = build_task("pick_heat_then_place", w, "Pan_2", "Table_3")
    _, steps = render_instructions(task, 3)
    heat = steps[[s.kind for s in task.subgoals].index("HeatObject")]
    assert "pan" in heat
    assert render_instructions(task, 3) == render_instructions(task, 3)


def test_rendered_tokens_stay_in_vocabulary():
    vocab = set(load_vocabulary())
    for i in range(1000):
        world, task = generate_world(i, SPLITS[i % 5])
        goal, steps = render_instructions(task, i)
        assert set(goal) <= vocab
        for s in steps:
            assert set(s) <= vocab


def test_out_of_vocabulary_token_rejected():
    with pytest.raises(KeyError):
        Vocabulary().encode(["put", "the", "spaceship"])


def test_env_config_is_frozen():
    with pytest.raises(dataclasses.FrozenInstanceError):
        EnvConfig().grid_size = 5
