"""Ground-truth plant protection world and its problem generator.

The map is 10x10 with the planting area spanning (2,2)..(7,7).  Cells are
named ``posX-Y`` with y growing northward.  Spraying kills every plant in
the 3x3 block centred on the agent (its Moore neighbourhood plus itself).
"""

from __future__ import annotations

import hashlib
import json
import random
from dataclasses import dataclass, replace
from functools import lru_cache
from typing import Dict, FrozenSet, List, Optional, Tuple, Union

from .logic import Atom, GoalFormula, Literal, State
from .pddl import Problem

WIDTH = HEIGHT = 10
GARDEN_MIN, GARDEN_MAX = 2, 7
NATIVE, INVASIVE = "native", "invasive"

Cell = Tuple[int, int]

# (dx, dy) per adjacency predicate; north is +y
DIRECTIONS: Dict[str, Cell] = {
    "north": (0, 1),
    "south": (0, -1),
    "east": (1, 0),
    "west": (-1, 0),
    "ne": (1, 1),
    "nw": (-1, 1),
    "se": (1, -1),
    "sw": (-1, -1),
}
OPPOSITE = {"north": "south", "south": "north", "east": "west", "west": "east",
            "ne": "sw", "sw": "ne", "nw": "se", "se": "nw"}
ADJ_PREDICATES = tuple(f"adj_{d}" for d in DIRECTIONS)
FLUENT_PREDICATES = frozenset({"agent-at", "native-at", "invasive-at"})


class IllegalAction(ValueError):
    pass


def cell_name(c: Cell) -> str:
    return f"pos{c[0]}-{c[1]}"


def parse_cell(name: str) -> Cell:
    x, y = name[3:].split("-")
    return int(x), int(y)


def in_map(c: Cell) -> bool:
    return 0 <= c[0] < WIDTH and 0 <= c[1] < HEIGHT


def in_garden(c: Cell) -> bool:
    return GARDEN_MIN <= c[0] <= GARDEN_MAX and GARDEN_MIN <= c[1] <= GARDEN_MAX


def chebyshev(a: Cell, b: Cell) -> int:
    return max(abs(a[0] - b[0]), abs(a[1] - b[1]))


def moore(c: Cell) -> List[Cell]:
    """``c`` and its eight neighbours, clipped to the map."""
    return [(c[0] + dx, c[1] + dy) for dx in (-1, 0, 1) for dy in (-1, 0, 1)
            if in_map((c[0] + dx, c[1] + dy))]


ALL_CELLS: Tuple[Cell, ...] = tuple((x, y) for x in range(WIDTH) for y in range(HEIGHT))
GARDEN_CELLS: Tuple[Cell, ...] = tuple(c for c in ALL_CELLS if in_garden(c))
OBJECTS: Tuple[Tuple[str, str], ...] = tuple((cell_name(c), "mapgrid") for c in ALL_CELLS)


@lru_cache(maxsize=1)
def static_facts() -> State:
    """Garden membership, 4-way movement links and the 8 adjacency relations."""
    facts = set()
    for c in ALL_CELLS:
        name = cell_name(c)
        if in_garden(c):
            facts.add(Atom("garden", (name,)))
        for d, (dx, dy) in DIRECTIONS.items():
            n = (c[0] + dx, c[1] + dy)
            if not in_map(n):
                continue
            facts.add(Atom(f"adj_{d}", (name, cell_name(n))))
            if d in ("north", "south", "east", "west"):
                facts.add(Atom("connected", (name, cell_name(n))))
    return frozenset(facts)


@dataclass(frozen=True)
class GardenWorld:
    agent: Cell = (0, 0)
    plants: Tuple[Tuple[Cell, str], ...] = ()
    clock: int = 0

    def __post_init__(self) -> None:
        cells = [c for c, _ in self.plants]
        if len(cells) != len(set(cells)):
            raise ValueError("tiles contain at most one plant")
        for c, kind in self.plants:
            if not in_garden(c):
                raise ValueError(f"plant at {c} lies outside the garden")
            if kind not in (NATIVE, INVASIVE):
                raise ValueError(f"unknown plant kind {kind!r}")
        if not in_map(self.agent):
            raise ValueError(f"agent at {self.agent} is off the map")
        object.__setattr__(self, "plants", tuple(sorted(self.plants)))

    @property
    def plant_map(self) -> Dict[Cell, str]:
        return dict(self.plants)

    def natives(self) -> List[Cell]:
        return [c for c, k in self.plants if k == NATIVE]

    def invasives(self) -> List[Cell]:
        return [c for c, k in self.plants if k == INVASIVE]

    def to_json(self) -> dict:
        return {
            "agent": list(self.agent),
            "plants": [{"x": c[0], "y": c[1], "kind": k} for c, k in self.plants],
            "clock": self.clock,
        }

    @classmethod
    def from_json(cls, data: Union[str, dict]) -> "GardenWorld":
        if isinstance(data, str):
            data = json.loads(data)
        return cls(tuple(data["agent"]),
                   tuple(((p["x"], p["y"]), p["kind"]) for p in data["plants"]),
                   data.get("clock", 0))


@dataclass(frozen=True)
class Move:
    target: Cell

    def __str__(self) -> str:
        return f"(move {cell_name(self.target)})"


@dataclass(frozen=True)
class Spray:
    def __str__(self) -> str:
        return "(spray)"


WorldAction = Union[Move, Spray]


@dataclass(frozen=True)
class ProblemSpec:
    seed: int
    n_goals: int
    ratio: float = 0.75

    def __post_init__(self) -> None:
        if not 0 <= self.n_goals <= len(GARDEN_CELLS):
            raise ValueError(f"n_goals must fit in the {len(GARDEN_CELLS)} garden cells")
        if not 0.0 <= self.ratio <= 1.0:
            raise ValueError("ratio must lie in [0, 1]")

    @property
    def n_natives(self) -> int:
        # round half up, not Python's banker's rounding
        return min(self.n_goals, int(self.ratio * self.n_goals + 0.5))


def goals_for(world: GardenWorld) -> GoalFormula:
    """Preserve every native and remove every invasive, natives first."""
    lits = [Literal(Atom("native-at", (cell_name(c),)), True) for c in world.natives()]
    lits += [Literal(Atom("invasive-at", (cell_name(c),)), False) for c in world.invasives()]
    return GoalFormula(tuple(lits))


def generate_problem(spec: ProblemSpec) -> Tuple[GardenWorld, GoalFormula]:
    """Place plants uniformly without collisions using ``random.Random(seed)``.

    The first ``n_natives`` sampled cells hold natives, the rest invasives.
    """
    rng = random.Random(spec.seed)
    cells = rng.sample(GARDEN_CELLS, spec.n_goals)
    k = spec.n_natives
    plants = [(c, NATIVE) for c in cells[:k]] + [(c, INVASIVE) for c in cells[k:]]
    world = GardenWorld((0, 0), tuple(plants), 0)
    lits = [Literal(Atom("native-at", (cell_name(c),)), True) for c in cells[:k]]
    lits += [Literal(Atom("invasive-at", (cell_name(c),)), False) for c in cells[k:]]
    return world, GoalFormula(tuple(lits))


def three_plant_layout() -> GardenWorld:
    return GardenWorld((0, 0), (((3, 3), NATIVE), ((2, 5), INVASIVE), ((3, 2), INVASIVE)))


def derive_seed(*parts: object) -> int:
    """Stable 63-bit seed from arbitrary parts (sha256 of their repr)."""
    digest = hashlib.sha256(":".join(map(str, parts)).encode()).digest()
    return int.from_bytes(digest[:8], "big") >> 1


def spray_kills(world: GardenWorld, at: Optional[Cell] = None) -> FrozenSet[Cell]:
    at = world.agent if at is None else at
    area = set(moore(at))
    return frozenset(c for c, _ in world.plants if c in area)


def env_step(world: GardenWorld, action: WorldAction) -> GardenWorld:
    """Advance the ground truth by one action; illegal actions raise
    :class:`IllegalAction` and leave the world untouched."""
    if isinstance(action, Move):
        t = action.target
        if not in_map(t) or abs(t[0] - world.agent[0]) + abs(t[1] - world.agent[1]) != 1:
            raise IllegalAction(f"cannot move from {world.agent} to {t}")
        return replace(world, agent=t, clock=world.clock + 1)
    if isinstance(action, Spray):
        if not in_garden(world.agent):
            raise IllegalAction(f"cannot spray outside the garden at {world.agent}")
        killed = spray_kills(world)
        plants = tuple(p for p in world.plants if p[0] not in killed)
        return replace(world, plants=plants, clock=world.clock + 1)
    raise IllegalAction(f"unknown action {action!r}")


def dynamic_facts(world: GardenWorld) -> State:
    facts = {Atom("agent-at", (cell_name(world.agent),))}
    for c, kind in world.plants:
        facts.add(Atom(f"{kind}-at", (cell_name(c),)))
    return frozenset(facts)


def observe(world: GardenWorld) -> State:
    """Full relational snapshot: fluents plus the static map facts."""
    return dynamic_facts(world) | static_facts()


def world_action(name: str, args: Tuple[str, ...]) -> WorldAction:
    """Translate a ground planner action into a world action."""
    if name == "move":
        return Move(parse_cell(args[-1]))
    if name == "spray":
        return Spray()
    raise ValueError(f"no world action for {name}")


def safe_kill_oracle(world: GardenWorld) -> FrozenSet[Cell]:
    """Invasives killable by some garden spray that spares every native."""
    natives = world.natives()
    safe_cells = [c for c in GARDEN_CELLS if all(chebyshev(c, n) > 1 for n in natives)]
    return frozenset(q for q in world.invasives() if any(chebyshev(c, q) <= 1 for c in safe_cells))


def problem_for(world: GardenWorld, goal: GoalFormula, name: str = "garden-task") -> Problem:
    return Problem(name, "garden", OBJECTS, observe(world), goal)
