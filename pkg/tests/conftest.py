import numpy as np
import pytest

from vamgrid.env.core import Layout, ObjectState, World
from vamgrid.env.generate import episode_seed, make_episode


def open_room(size=7, furniture=(), pillars=()):
    grid = []
    for r in range(size):
        row = ""
        for c in range(size):
            edge = r in (0, size - 1) or c in (0, size - 1)
            row += "#" if edge or (r, c) in pillars else "."
        grid.append(row)
    return Layout(-1, "kitchen", tuple(grid), frozenset(furniture))


def hand_world(objects=(), agent=(3, 3), heading=0, pitch=0, size=7):
    furniture = {o.position for o in objects if o.container is None and not o.held
                 and o.cat.furniture}
    return World(0, "train", open_room(size, furniture), tuple(objects), agent, heading, pitch)


def counter_with_apple(cell=(1, 3)):
    return [ObjectState("Counter_0", "Counter", cell),
            ObjectState("Apple_1", "Apple", cell, container="Counter_0")]


@pytest.fixture(scope="session")
def train_episodes():
    return [make_episode(episode_seed("train", i, 0), "train") for i in range(12)]


@pytest.fixture
def rng():
    return np.random.default_rng(0)
