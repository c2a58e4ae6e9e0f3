"""Grounding and greedy best-first search for STRIPS with conditional effects.

Search runs on integer bitsets over the dynamic atoms of a task; static atoms
(predicates that no schema touches) are compiled away while grounding.
Goal count is the heuristic and ties are broken first-in first-out, so a
given task and config always produce the same plan.
"""

from __future__ import annotations

import heapq
import itertools
import logging
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Dict, FrozenSet, Iterable, Iterator, List, Optional, Sequence, Tuple

from .logic import Atom, GoalFormula, Literal, State, holds, substitute, substitute_atom
from .pddl import ActionSchema, Domain, Problem

logger = logging.getLogger(__name__)

DEFAULT_NODE_CAP = 200_000


class InapplicableAction(ValueError):
    pass


class SearchLimitExceeded(RuntimeError):
    """The node cap ran out before the search space was exhausted."""

    def __init__(self, expanded: int):
        super().__init__(f"node cap exceeded after {expanded} expansions")
        self.expanded = expanded


CondBlock = Tuple[FrozenSet[Literal], FrozenSet[Atom], FrozenSet[Atom]]


@dataclass(frozen=True)
class GroundAction:
    name: str
    args: Tuple[str, ...]
    pre: FrozenSet[Literal]
    adds: FrozenSet[Atom]
    dels: FrozenSet[Atom]
    cond: Tuple[CondBlock, ...] = ()

    def __str__(self) -> str:
        return "(" + " ".join((self.name,) + self.args) + ")"

    @property
    def key(self) -> Tuple[str, Tuple[str, ...]]:
        return (self.name, self.args)


@dataclass(frozen=True)
class GroundedTask:
    actions: Tuple[GroundAction, ...]
    init: State
    goal: GoalFormula
    table: Optional["_ActionTable"] = field(default=None, repr=False, compare=False)


@dataclass(frozen=True)
class Plan:
    steps: Tuple[GroundAction, ...] = ()

    def __iter__(self) -> Iterator[GroundAction]:
        return iter(self.steps)

    def __len__(self) -> int:
        return len(self.steps)

    def __getitem__(self, i):
        return self.steps[i]

    def __str__(self) -> str:
        return "\n".join(str(a) for a in self.steps)


@dataclass(frozen=True)
class SearchConfig:
    node_cap: int = DEFAULT_NODE_CAP
    heuristic: str = "goal-count"
    tie_break: str = "fifo"

    def __post_init__(self) -> None:
        if self.node_cap <= 0:
            raise ValueError("node_cap must be positive")
        if self.heuristic != "goal-count" or self.tie_break != "fifo":
            raise ValueError("only goal-count with FIFO tie-breaking is implemented")


# --------------------------------------------------------------------------
# grounding

def _objects_by_type(domain: Domain, objects: Sequence[Tuple[str, str]]) -> Dict[str, List[str]]:
    kinds = domain.type_names() | {k for _, k in objects}
    return {t: [o for o, k in objects if domain.is_subtype(k, t)] for t in kinds}


def _bindings(params, by_type, checks, binding) -> Iterator[Dict[str, str]]:
    """Enumerate parameter bindings, testing each literal in ``checks[i]``
    as soon as parameter ``i`` (its last variable) is bound."""
    if not params:
        yield dict(binding)
        return
    depth = len(binding)

    def rec(i: int):
        if i == len(params):
            yield dict(binding)
            return
        var, kind = params[i]
        for obj in by_type.get(kind, ()):
            binding[var] = obj
            if all(test(binding) for test in checks[depth + i]):
                yield from rec(i + 1)
            del binding[var]

    yield from rec(0)


def _static_checks(params: Sequence[Tuple[str, str]], literals: Iterable[Literal],
                   static: FrozenSet[Atom], offset: int = 0, bound: Sequence[str] = ()):
    order = {v: offset + i for i, (v, _) in enumerate(params)}
    checks: Dict[int, list] = {offset + i: [] for i in range(len(params))}
    checks[offset - 1] = []
    for lit in literals:
        idx = max((order.get(a, offset - 1) for a in lit.atom.args if a[0] == "?"), default=offset - 1)

        def test(b, lit=lit):
            return holds(static, substitute(lit, b))

        checks[idx].append(test)
    return checks


def _ground_schema(schema: ActionSchema, by_type, static: FrozenSet[Atom],
                   static_preds: FrozenSet[str], prune: bool) -> List[GroundAction]:
    out = []
    static_pre = [l for l in schema.precondition if prune and l.atom.predicate in static_preds]
    dyn_pre = [l for l in schema.precondition if not (prune and l.atom.predicate in static_preds)]
    checks = _static_checks(schema.params, static_pre, static)
    if not all(t({}) for t in checks[-1]):
        return out
    for b in _bindings(schema.params, by_type, checks, {}):
        adds = {substitute_atom(l.atom, b) for l in schema.effects if l.positive}
        dels = {substitute_atom(l.atom, b) for l in schema.effects if not l.positive} - adds
        blocks: List[CondBlock] = []
        for ce in schema.cond_effects:
            blocks.extend(_ground_cond(ce, b, by_type, static, static_preds, prune))
        out.append(GroundAction(
            schema.name,
            tuple(b[v] for v, _ in schema.params),
            frozenset(substitute(l, b) for l in dyn_pre),
            frozenset(adds),
            frozenset(dels),
            tuple(blocks),
        ))
    return out


def _ground_cond(ce, outer: Dict[str, str], by_type, static, static_preds, prune) -> List[CondBlock]:
    blocks = []
    static_cond = [l for l in ce.condition if prune and l.atom.predicate in static_preds]
    dyn_cond = [l for l in ce.condition if not (prune and l.atom.predicate in static_preds)]
    checks = _static_checks(ce.quantified, static_cond, static, offset=len(outer))
    binding = dict(outer)
    if not all(t(binding) for t in checks[len(outer) - 1]):
        return blocks
    for b in _bindings(ce.quantified, by_type, checks, binding):
        adds = frozenset(substitute_atom(l.atom, b) for l in ce.effects if l.positive)
        dels = frozenset(substitute_atom(l.atom, b) for l in ce.effects if not l.positive) - adds
        blocks.append((frozenset(substitute(l, b) for l in dyn_cond), adds, dels))
    return blocks


@lru_cache(maxsize=16)
def _ground_actions(domain: Domain, objects: Tuple[Tuple[str, str], ...],
                    static: FrozenSet[Atom], prune: bool):
    by_type = _objects_by_type(domain, objects)
    actions: List[GroundAction] = []
    for schema in domain.schemas:
        actions.extend(_ground_schema(schema, by_type, static, domain.static_predicates, prune))
    actions_t = tuple(actions)
    return actions_t, _ActionTable(actions_t)


def ground(domain: Domain, problem: Problem, prune_static: bool = True) -> GroundedTask:
    """Instantiate every schema over type-consistent object tuples.

    With ``prune_static`` the static preconditions are evaluated against the
    initial state: failing groundings disappear and satisfied static literals
    are dropped from ``pre`` and from conditional-effect conditions.
    """
    static_preds = domain.static_predicates
    static = frozenset(a for a in problem.init if a.predicate in static_preds) if prune_static else frozenset()
    actions, table = _ground_actions(domain, tuple(problem.objects), static, prune_static)
    return GroundedTask(actions, problem.init, problem.goal, table)


# --------------------------------------------------------------------------
# state transitions

def applicable(s: State, a: GroundAction) -> bool:
    return all((l.atom in s) == l.positive for l in a.pre)


def successor(s: State, a: GroundAction) -> State:
    """Apply ``a`` with conditional triggers evaluated in the pre-state."""
    if not applicable(s, a):
        raise InapplicableAction(f"{a} is not applicable")
    adds = set(a.adds)
    dels = set(a.dels)
    for cond, cadds, cdels in a.cond:
        if all((l.atom in s) == l.positive for l in cond):
            adds |= cadds
            dels |= cdels
    return frozenset((s - dels) | adds)


def validate(plan: Plan, task: GroundedTask) -> bool:
    """Replay ``plan`` under ``task``'s own action semantics.

    Steps are matched to the task's ground actions by name and arguments,
    so a plan made under one action model can be checked against another.
    """
    by_key = {a.key: a for a in task.actions}
    s = task.init
    for step in plan:
        a = by_key.get(step.key)
        if a is None or not applicable(s, a):
            return False
        s = successor(s, a)
    return all(holds(s, l) for l in task.goal)


# --------------------------------------------------------------------------
# search

class _ActionTable:
    """Bitset encoding of a ground action list."""

    def __init__(self, actions: Sequence[GroundAction]):
        index: Dict[Atom, int] = {}

        def bit(a: Atom) -> int:
            if a not in index:
                index[a] = len(index)
            return 1 << index[a]

        def mask(atoms: Iterable[Atom]) -> int:
            m = 0
            for x in atoms:
                m |= bit(x)
            return m

        self.compiled = []
        self.by_anchor: Dict[int, List[int]] = {}
        self.unanchored: List[int] = []
        for i, a in enumerate(actions):
            ppos = mask(l.atom for l in a.pre if l.positive)
            pneg = mask(l.atom for l in a.pre if not l.positive)
            blocks = tuple(
                (mask(l.atom for l in c if l.positive), mask(l.atom for l in c if not l.positive),
                 mask(ad), mask(de))
                for c, ad, de in a.cond
            )
            self.compiled.append((ppos, pneg, mask(a.adds), mask(a.dels), blocks))
            if ppos:
                anchor = (ppos & -ppos).bit_length() - 1
                self.by_anchor.setdefault(anchor, []).append(i)
            else:
                self.unanchored.append(i)
        self.index = index


def _mask(index: Dict[Atom, int], atoms: Iterable[Atom]) -> int:
    m = 0
    for a in atoms:
        b = index.get(a)
        if b is not None:
            m |= 1 << b
    return m


def plan(task: GroundedTask, cfg: SearchConfig = SearchConfig()) -> Optional[Plan]:
    """Greedy best-first search with the goal-count heuristic.

    Returns the plan, or ``None`` when the reachable space is exhausted
    without reaching the goal.  Raises :class:`SearchLimitExceeded` when
    ``cfg.node_cap`` expansions were not enough to decide.
    """
    table = task.table or _ActionTable(task.actions)
    index = dict(table.index)
    # goal atoms that no action touches still need bits
    for lit in task.goal:
        if lit.atom not in index:
            index[lit.atom] = len(index)
    gpos = _mask(index, (l.atom for l in task.goal if l.positive))
    gneg = _mask(index, (l.atom for l in task.goal if not l.positive))
    s0 = _mask(index, task.init)

    def h(s: int) -> int:
        return (gpos & ~s).bit_count() + (gneg & s).bit_count()

    h0 = h(s0)
    if h0 == 0:
        return Plan(())
    compiled = table.compiled
    by_anchor = table.by_anchor
    unanchored = table.unanchored
    parent: Dict[int, Optional[Tuple[int, int]]] = {s0: None}
    counter = itertools.count()
    frontier = [(h0, next(counter), s0)]
    expanded = 0
    while frontier:
        _, _, s = heapq.heappop(frontier)
        expanded += 1
        if expanded > cfg.node_cap:
            raise SearchLimitExceeded(expanded - 1)
        candidates = list(unanchored)
        bits = s
        while bits:
            low = bits & -bits
            candidates.extend(by_anchor.get(low.bit_length() - 1, ()))
            bits ^= low
        for ai in candidates:
            ppos, pneg, add, dele, blocks = compiled[ai]
            if s & ppos != ppos or s & pneg:
                continue
            for cpos, cneg, cadd, cdel in blocks:
                if s & cpos == cpos and not s & cneg:
                    add |= cadd
                    dele |= cdel
            s2 = (s & ~dele) | add
            if s2 in parent:
                continue
            parent[s2] = (s, ai)
            h2 = h(s2)
            if h2 == 0:
                return _extract(parent, s2, task.actions)
            heapq.heappush(frontier, (h2, next(counter), s2))
    logger.debug("search space exhausted after %d expansions", expanded)
    return None


def _extract(parent, s: int, actions: Sequence[GroundAction]) -> Plan:
    steps = []
    link = parent[s]
    while link is not None:
        prev, ai = link
        steps.append(actions[ai])
        link = parent[prev]
    return Plan(tuple(reversed(steps)))
