"""Introspective trace: alternating mental states and mental actions."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterator, List, Optional, Tuple

from .logic import Atom, Discrepancy, Literal, State


class TraceError(ValueError):
    pass


class MentalAction(str, Enum):
    PERCEIVE = "Perceive"
    DETECT = "DetectDiscrepancies"
    EXPLAIN = "Explanation"
    INSERT = "GoalInsertion"
    EVALUATE = "Evaluate"
    INTEND = "Intend"
    PLAN = "Plan"
    ACT = "Act"


# the cognitive phases in execution order; Interpret groups three mental actions
PHASES: Tuple[Tuple[str, Tuple[MentalAction, ...]], ...] = (
    ("Perceive", (MentalAction.PERCEIVE,)),
    ("Interpret", (MentalAction.DETECT, MentalAction.EXPLAIN, MentalAction.INSERT)),
    ("Evaluate", (MentalAction.EVALUATE,)),
    ("Intend", (MentalAction.INTEND,)),
    ("Plan", (MentalAction.PLAN,)),
    ("Act", (MentalAction.ACT,)),
)
CYCLE_ORDER: Tuple[MentalAction, ...] = tuple(a for _, acts in PHASES for a in acts)
PHASE_OF = {a: name for name, acts in PHASES for a in acts}

FLUENTS = frozenset({"agent-at", "native-at", "invasive-at", "other-agent-at"})


@dataclass(frozen=True)
class MentalState:
    """Snapshot of working memory: (g_c, agenda, plan, model, D, E, last action)."""

    g_c: Tuple[Literal, ...] = ()
    agenda: Tuple[Tuple[Literal, str], ...] = ()
    plan: Tuple[str, ...] = ()
    cursor: int = 0
    believed: State = frozenset()
    fingerprint: str = ""
    D: Discrepancy = Discrepancy()
    E: Optional[str] = None
    last_action: Optional[str] = None

    def goal_atoms(self, positive: bool = True) -> List[Atom]:
        return [lit.atom for lit, _ in self.agenda if lit.positive == positive]

    def to_json(self) -> dict:
        lits = lambda ls: [str(l) for l in ls]
        return {
            "g_c": lits(self.g_c),
            "agenda": [[str(l), s] for l, s in self.agenda],
            "plan": list(self.plan),
            "cursor": self.cursor,
            "model": {
                "state": sorted(str(a) for a in self.believed if a.predicate in FLUENTS),
                "fingerprint": self.fingerprint,
            },
            "D": {"missing": sorted(map(str, self.D.missing)), "extra": sorted(map(str, self.D.extra))},
            "E": self.E,
            "last_action": self.last_action,
        }


@dataclass
class Trace:
    """``<s0, a1, s1, ..., an, sn>`` with chained pre-states."""

    states: List[MentalState] = field(default_factory=list)
    actions: List[MentalAction] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.actions)

    @property
    def last_state(self) -> Optional[MentalState]:
        return self.states[-1] if self.states else None

    def record(self, pre: MentalState, action: MentalAction, post: MentalState) -> "Trace":
        if self.states and self.states[-1] is not pre and self.states[-1] != pre:
            raise TraceError("pre-state does not continue the trace")
        if not self.states:
            self.states.append(pre)
        self.actions.append(MentalAction(action))
        self.states.append(post)
        return self

    def triples(self, start: int = 0) -> Iterator[Tuple[MentalState, MentalAction, MentalState]]:
        for i in range(start, len(self.actions)):
            yield self.states[i], self.actions[i], self.states[i + 1]

    def to_json(self) -> dict:
        elements = []
        for i, s in enumerate(self.states):
            if i:
                a = self.actions[i - 1]
                elements.append({"kind": "action", "tag": a.value, "phase": PHASE_OF[a]})
            elements.append({"kind": "state", "index": i, "fields": s.to_json()})
        return {"elements": elements}

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=1)


@dataclass(frozen=True)
class TraceSegment:
    """The part of a trace between two monitor calls."""

    states: Tuple[MentalState, ...] = ()
    actions: Tuple[MentalAction, ...] = ()
    offset: int = 0

    def __len__(self) -> int:
        return len(self.actions)

    def triples(self) -> Iterator[Tuple[MentalState, MentalAction, MentalState]]:
        for i, a in enumerate(self.actions):
            yield self.states[i], a, self.states[i + 1]


def validate_trace_json(data: dict) -> List[str]:
    """Problems found in an exported trace; empty means well formed.

    Checks alternation, that it starts and ends with a state, the action
    vocabulary and that phase tags follow the cycle order.
    """
    problems = []
    elements = data.get("elements", [])
    if not elements:
        return ["empty trace"]
    kinds = [e.get("kind") for e in elements]
    if kinds[0] != "state" or kinds[-1] != "state":
        problems.append("trace must start and end with a state")
    for i, k in enumerate(kinds):
        want = "state" if i % 2 == 0 else "action"
        if k != want:
            problems.append(f"element {i} is {k}, expected {want}")
    tags = [e.get("tag") for e in elements if e.get("kind") == "action"]
    valid = {a.value for a in MentalAction}
    for i, t in enumerate(tags):
        if t not in valid:
            problems.append(f"unknown mental action {t!r}")
        elif i and tags[i - 1] in valid:
            prev = CYCLE_ORDER.index(MentalAction(tags[i - 1]))
            if CYCLE_ORDER[(prev + 1) % len(CYCLE_ORDER)].value != t:
                problems.append(f"action {i} ({t}) breaks the cycle order after {tags[i - 1]}")
    states = sum(1 for k in kinds if k == "state")
    if states != len(tags) + 1:
        problems.append("|states| must equal |actions| + 1")
    return problems


def validate_trace(trace: Trace) -> List[str]:
    problems = validate_trace_json(trace.to_json()) if trace.states else ["empty trace"]
    for i, (s, _, s2) in enumerate(trace.triples()):
        if trace.states[i] is not s:
            problems.append(f"pre-state of action {i} is not chained")
    return problems
