import random

import pytest

from metagarden.garden import (GARDEN_CELLS, INVASIVE, NATIVE, GardenWorld, Spray, cell_name,
                               env_step, goals_for, observe, three_plant_layout)
from metagarden.learning import ExecutionRecord, direction_effect, ground_truth_domain, repair_operator
from metagarden.meta import load_domain, load_resource
from metagarden.planner import GroundAction

# ProblemSpec(THREE_PLANT_SEED, 3, 1/3) reproduces the worked example's layout
THREE_PLANT_SEED = 14411
ALL_DIRECTIONS = ("north", "south", "east", "west", "ne", "nw", "se", "sw")


@pytest.fixture(scope="session")
def flawed():
    return load_domain("garden.pddl")


@pytest.fixture(scope="session")
def truth(flawed):
    return ground_truth_domain(flawed)


@pytest.fixture(scope="session")
def meta_domain():
    return load_domain("meta.pddl")


@pytest.fixture
def three_plant_world():
    return three_plant_layout()


@pytest.fixture
def three_plant_goals(three_plant_world):
    return goals_for(three_plant_world)


@pytest.fixture(scope="session")
def golden_text():
    return {name: load_resource(name)
            for name in ("garden.pddl", "meta.pddl", "garden-problem-three-plant.pddl")}


def spray_record(world: GardenWorld, at):
    """Teleport the agent to ``at`` and spray; returns the record and the new world."""
    here = GardenWorld(at, world.plants, world.clock)
    after = env_step(here, Spray())
    act = GroundAction("spray", (cell_name(at),), frozenset(), frozenset(), frozenset(), ())
    return ExecutionRecord(here.clock, act, observe(here), observe(after)), after


def random_world(rng: random.Random, n_plants: int, agent=(0, 0)) -> GardenWorld:
    cells = rng.sample(GARDEN_CELLS, n_plants)
    plants = tuple((c, rng.choice((NATIVE, INVASIVE))) for c in cells)
    return GardenWorld(agent, plants, 0)


def partial_model(flawed, missing):
    """The spray model knowing every neighbour effect except ``missing``."""
    known = [direction_effect(d) for d in ALL_DIRECTIONS if d not in missing]
    return repair_operator(flawed, "spray", known)


def synthetic_records(seed: int, episodes: int, sprays: int = 4, plants: int = 12):
    """Per episode, a random garden sprayed at ``sprays`` random cells in turn."""
    rng = random.Random(seed)
    out = []
    for _ in range(episodes):
        world = random_world(rng, plants)
        recs = []
        for _ in range(sprays):
            rec, world = spray_record(world, rng.choice(GARDEN_CELLS))
            recs.append(rec)
        out.append(recs)
    return out
