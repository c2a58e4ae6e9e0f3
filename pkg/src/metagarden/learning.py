"""Repairing the spray operator from execution experience.

The pipeline run by the ``perform-learning`` meta-action:

1. :func:`harvest_examples` turns executed sprays into labelled examples.
   A positive is a plant death the believed model did not predict; a
   negative is a plant that survived a spray step.
2. :func:`foil` induces function-free Horn clauses for the target
   ``spray(Pos, Time)`` ("it is as if the cell were sprayed") from those
   examples and relational background facts.
3. :func:`compile_effects` maps each clause's adjacency literal to a
   universally quantified conditional effect.
4. :func:`repair_operator` adds the effects to the schema.
"""

from __future__ import annotations

import itertools
import logging
import math
import os
from collections import defaultdict
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Dict, Iterable, List, NamedTuple, Optional, Sequence, Set, Tuple

from .garden import DIRECTIONS, OBJECTS, OPPOSITE, cell_name, parse_cell
from .logic import Atom, Literal, State
from .pddl import ConditionalEffect, Domain, Problem, render_domain
from .planner import GroundAction, ground, successor

logger = logging.getLogger(__name__)

ADJ = tuple(f"adj_{d}" for d in DIRECTIONS)
PLANT_PREDICATES = ("native-at", "invasive-at")
ARG_TYPES: Dict[str, Tuple[str, ...]] = {"spray": ("pos", "time"), "adj_time": ("time", "time")}
ARG_TYPES.update({p: ("pos", "pos") for p in ADJ})
HEAD_VARS = ("pos1", "time2")


# --------------------------------------------------------------------------
# examples

class Example(NamedTuple):
    cell: str
    time: int
    positive: bool


class ExecutionRecord(NamedTuple):
    """One world step as the agent lived it: observed states around ``action``."""

    clock: int
    action: GroundAction
    before: State
    after: State


def _plants(s: State) -> Set[str]:
    return {a.args[0] for a in s if a.predicate in PLANT_PREDICATES}


@dataclass
class ExampleStore:
    """Cumulative labelled examples plus the spray events they came from.

    Each harvested episode gets its own block of time objects so that
    examples from different episodes never share a time.
    """

    examples: List[Example] = field(default_factory=list)
    sprays: List[Tuple[str, int]] = field(default_factory=list)
    next_time: int = 0

    def positives(self) -> List[Tuple[str, int]]:
        return [(e.cell, e.time) for e in self.examples if e.positive]

    def negatives(self) -> List[Tuple[str, int]]:
        return [(e.cell, e.time) for e in self.examples if not e.positive]

    def background(self) -> Dict[str, Set[tuple]]:
        cells = {c for c, _ in self.sprays} | {e.cell for e in self.examples}
        times = {t for _, t in self.sprays} | {e.time for e in self.examples}
        facts: Dict[str, Set[tuple]] = defaultdict(set)
        facts["spray"].update(self.sprays)
        for t in times:
            if t - 1 in times:
                facts["adj_time"].add((t, t - 1))
        for c in cells:
            x, y = parse_cell(c)
            for d, (dx, dy) in DIRECTIONS.items():
                n = cell_name((x + dx, y + dy))
                if n in cells:
                    facts[f"adj_{d}"].add((c, n))
        return facts

    def dump(self) -> str:
        """One fact per line: ``pos(x,y,t,label)``, ``spray(x,y,t)`` and background."""
        lines = []
        for e in self.examples:
            x, y = parse_cell(e.cell)
            lines.append(f"pos({x},{y},{e.time},{'positive' if e.positive else 'negative'})")
        for c, t in self.sprays:
            x, y = parse_cell(c)
            lines.append(f"spray({x},{y},{t})")
        bg = self.background()
        for t2, t1 in sorted(bg["adj_time"]):
            lines.append(f"adj_time({t2},{t1})")
        for p in ADJ:
            for a, b in sorted(bg[p]):
                lines.append(f"{p}({a},{b})")
        return "\n".join(lines) + "\n"

    @classmethod
    def load(cls, text: str) -> "ExampleStore":
        store = cls()
        for line in text.splitlines():
            line = line.strip()
            if not line:
                continue
            name, _, rest = line.partition("(")
            args = rest.rstrip(")").split(",")
            if name == "pos":
                store.examples.append(Example(cell_name((int(args[0]), int(args[1]))), int(args[2]),
                                              args[3] == "positive"))
            elif name == "spray":
                store.sprays.append((cell_name((int(args[0]), int(args[1]))), int(args[2])))
        times = [t for _, t in store.sprays] + [e.time for e in store.examples]
        store.next_time = max(times, default=-2) + 2
        return store

    def save(self, path: os.PathLike) -> None:
        Path(path).write_text(self.dump())


def believed_kills(domain: Domain, before: State, action: GroundAction) -> Set[str]:
    """Plant cells the model says ``action`` removes from ``before``."""
    task = ground(domain, Problem("harvest", domain.name, OBJECTS, before))
    model_action = next((a for a in task.actions if a.key == action.key), None)
    if model_action is None:
        return set()
    return _plants(before) - _plants(successor(before, model_action))


def harvest_examples(records: Sequence[ExecutionRecord], domain: Domain,
                     store: Optional[ExampleStore] = None):
    """Label the plant outcomes of every spray in ``records``.

    Returns ``(positives, negatives, background)`` for the new examples; when
    ``store`` is given they are appended to it and ``background`` covers the
    whole store.
    """
    store = store if store is not None else ExampleStore()
    base = store.next_time
    new: List[Example] = []
    last = base
    for rec in records:
        if rec.action.name != "spray":
            continue
        t = base + rec.clock
        cell = rec.action.args[0]
        alive_before = _plants(rec.before)
        alive_after = _plants(rec.after)
        expected = believed_kills(domain, rec.before, rec.action)
        store.sprays.append((cell, t))
        for c in sorted(alive_before - alive_after - expected):
            new.append(Example(c, t + 1, True))
        for c in sorted(alive_after):
            new.append(Example(c, t + 1, False))
        last = max(last, t + 1)
    if new or last != base:
        store.examples.extend(new)
        store.next_time = last + 2
    return ([(e.cell, e.time) for e in new if e.positive],
            [(e.cell, e.time) for e in new if not e.positive],
            store.background())


# --------------------------------------------------------------------------
# FOIL

@dataclass(frozen=True)
class HornClause:
    head: Atom
    body: Tuple[Atom, ...]

    def __str__(self) -> str:
        def fmt(a: Atom) -> str:
            return f"{a.predicate}({','.join(a.args)})"

        if not self.body:
            return fmt(self.head) + "."
        return f"{fmt(self.head)} :- {', '.join(fmt(b) for b in self.body)}"


@dataclass(frozen=True)
class FoilConfig:
    max_body: int = 4
    # below this fraction of the best achievable gain, prefer a determinate literal
    determinate_threshold: float = 0.2
    # head variables have depth 0; a new variable is one deeper than the literal's old ones
    max_depth: int = 2
    predicates: Tuple[str, ...] = ("spray", "adj_time") + ADJ
    # every accepted clause must mention one of these (the triggering event)
    required: Tuple[str, ...] = ("spray",)

    def __post_init__(self) -> None:
        if self.max_body < 1:
            raise ValueError("max_body must be at least 1")


@dataclass
class FoilResult:
    clauses: List[HornClause]
    uncovered: List[tuple] = field(default_factory=list)

    @property
    def complete(self) -> bool:
        return not self.uncovered

    def __iter__(self):
        return iter(self.clauses)

    def __len__(self) -> int:
        return len(self.clauses)

    def __getitem__(self, i):
        return self.clauses[i]


NEG_INF = float("-inf")


def foil_gain(p0: int, n0: int, p1: int, n1: int, t: int) -> float:
    """Quinlan's information gain in bits for adding one body literal."""
    if p1 == 0:
        return NEG_INF
    return t * (math.log2(p1 / (p1 + n1)) - math.log2(p0 / (p0 + n0)))


class _Facts:
    def __init__(self, facts: Dict[str, Set[tuple]]):
        self.facts = facts
        self._index: Dict[Tuple[str, Tuple[int, ...]], Dict[tuple, List[tuple]]] = {}

    def lookup(self, pred: str, bound: Tuple[int, ...], key: tuple) -> List[tuple]:
        idx = self._index.get((pred, bound))
        if idx is None:
            idx = defaultdict(list)
            for f in sorted(self.facts.get(pred, ())):
                idx[tuple(f[i] for i in bound)].append(f)
            self._index[(pred, bound)] = idx
        return idx.get(key, [])


def _fresh(prefix: str, taken: Iterable[str]) -> str:
    taken = set(taken)
    start = 0 if prefix == "pos" else 1
    for k in itertools.count(start):
        if f"{prefix}{k}" not in taken:
            return f"{prefix}{k}"


def _candidates(variables: Dict[str, str], body: Sequence[Atom], cfg: FoilConfig,
                depth: Optional[Dict[str, int]] = None):
    """Literals with at least one existing variable, in config order."""
    seen = set(body)
    for pred in cfg.predicates:
        types = ARG_TYPES[pred]
        options = []
        for kind in types:
            options.append([v for v, k in variables.items() if k == kind] + [None])
        for combo in itertools.product(*options):
            used = [v for v in combo if v is not None]
            if not used or len(set(used)) != len(used):
                continue
            args = []
            taken = list(variables)
            for v, kind in zip(combo, types):
                if v is None:
                    v = _fresh(kind, taken)
                    taken.append(v)
                args.append(v)
            lit = Atom(pred, tuple(args))
            if depth is not None and len(used) < len(args) and \
                    1 + max(depth[v] for v in used) > cfg.max_depth:
                continue
            if lit in seen or any(_renames(lit, b, variables) for b in body):
                continue
            yield lit


def _renames(lit: Atom, other: Atom, variables) -> bool:
    """``lit`` repeats ``other`` with its new variables renamed: no new constraint."""
    return lit.predicate == other.predicate and all(
        a == b for a, b in zip(lit.args, other.args) if a in variables)


def _extend(bindings, order: Dict[str, int], lit: Atom, facts: _Facts):
    bound = tuple(i for i, a in enumerate(lit.args) if a in order)
    new = [i for i, a in enumerate(lit.args) if a not in order]
    out = []
    covered = 0
    for b in bindings:
        key = tuple(b[order[lit.args[i]]] for i in bound)
        matches = facts.lookup(lit.predicate, bound, key)
        if matches:
            covered += 1
            for f in matches:
                out.append(b + tuple(f[i] for i in new))
    return out, covered


def _count(bindings, order, lit: Atom, facts: _Facts) -> Tuple[int, int]:
    bound = tuple(i for i, a in enumerate(lit.args) if a in order)
    total = covered = 0
    for b in bindings:
        key = tuple(b[order[lit.args[i]]] for i in bound)
        m = len(facts.lookup(lit.predicate, bound, key))
        if m:
            covered += 1
            total += m
    return total, covered


def _link_required(variables, body, cfg: FoilConfig, depth, order, pos_b, facts: _Facts) -> Optional[Atom]:
    """The required-predicate literal keeping the most positives (first in order on ties)."""
    best, best_t = None, 0
    for lit in _candidates(variables, body, cfg, depth):
        if lit.predicate not in cfg.required:
            continue
        _, t = _count(pos_b, order, lit, facts)
        if t > best_t:
            best, best_t = lit, t
    return best


def _is_determinate(lit: Atom, order, pos_b, neg_b, facts: _Facts) -> bool:
    """Introduces a variable and gives every positive binding exactly one
    extension and every negative binding at most one."""
    if all(a in order for a in lit.args):
        return False
    bound = tuple(i for i, a in enumerate(lit.args) if a in order)

    def n(b):
        return len(facts.lookup(lit.predicate, bound, tuple(b[order[lit.args[i]]] for i in bound)))

    return all(n(b) == 1 for b in pos_b) and all(n(b) <= 1 for b in neg_b)


def _drop_unused(head: Atom, body: List[Atom], determinate: Set[Atom]) -> List[Atom]:
    # a determinate literal whose new variables nobody uses adds nothing
    body = list(body)
    changed = True
    while changed:
        changed = False
        for lit in reversed(body):
            if lit not in determinate:
                continue
            others = set(head.args)
            for b in body:
                if b is not lit:
                    others.update(b.args)
            earlier = set(head.args)
            for b in body[: body.index(lit)]:
                earlier.update(b.args)
            if all(a in earlier or a not in others for a in lit.args):
                introduced = [a for a in lit.args if a not in earlier]
                if introduced:
                    body.remove(lit)
                    changed = True
                    break
    return body


def _covered(head: Atom, body: Sequence[Atom], examples: Sequence[tuple], facts: _Facts) -> Set[tuple]:
    order = {v: i for i, v in enumerate(head.args)}
    bindings = list(examples)
    for lit in body:
        bindings, _ = _extend(bindings, order, lit, facts)
        for a in lit.args:
            order.setdefault(a, len(order))
    return {b[: len(head.args)] for b in bindings}


def _orient(lit: Atom, head_pos: str) -> Atom:
    # adjacency literals point from the other cell toward the head cell
    if lit.predicate.startswith("adj_") and lit.predicate != "adj_time" and lit.args[0] == head_pos:
        d = lit.predicate[4:]
        return Atom(f"adj_{OPPOSITE[d]}", (lit.args[1], lit.args[0]))
    return lit


def _canonical(head: Atom, body: Sequence[Atom], cfg: FoilConfig) -> HornClause:
    rank = {p: i for i, p in enumerate(cfg.predicates)}
    body = [_orient(b, head.args[0]) for b in body]
    body.sort(key=lambda a: rank[a.predicate])
    rename = {v: v for v in head.args}
    for b in body:
        for a, kind in zip(b.args, ARG_TYPES[b.predicate]):
            if a not in rename:
                rename[a] = _fresh(kind, rename.values())
    return HornClause(head, tuple(Atom(b.predicate, tuple(rename[a] for a in b.args)) for b in body))


def foil(target: str, positives: Sequence[tuple], negatives: Sequence[tuple],
         background: Dict[str, Set[tuple]], cfg: FoilConfig = FoilConfig()) -> FoilResult:
    """Sequential covering with greedy, gain-driven clause specialisation.

    Clauses are grown one literal at a time until they cover no negative;
    a clause still covering negatives at ``cfg.max_body`` is discarded and
    the remaining positives are reported as uncovered.
    """
    head_types = ARG_TYPES.get(target, ("pos", "time"))
    head = Atom(target, HEAD_VARS[: len(head_types)])
    facts = _Facts(background)
    remaining = list(dict.fromkeys(tuple(p) for p in positives))
    negs = list(dict.fromkeys(tuple(n) for n in negatives))
    clauses: List[HornClause] = []
    while remaining:
        variables = dict(zip(head.args, head_types))
        body: List[Atom] = []
        determinate: Set[Atom] = set()
        depth = {v: 0 for v in head.args}
        pos_b, neg_b = list(remaining), list(negs)
        while len(body) < cfg.max_body:
            order = {v: i for i, v in enumerate(variables)}
            if not neg_b:
                if any(b.predicate in cfg.required for b in body) or not cfg.required:
                    break
                best = _link_required(variables, body, cfg, depth, order, pos_b, facts)
                if best is None:
                    break
                d = 1 + max(depth[a] for a in best.args if a in variables)
                for a, kind in zip(best.args, ARG_TYPES[best.predicate]):
                    if a not in variables:
                        variables[a] = kind
                        depth[a] = d
                pos_b, _ = _extend(pos_b, order, best, facts)
                body.append(best)
                continue
            p0, n0 = len(pos_b), len(neg_b)
            ceiling = foil_gain(p0, n0, p0, 0, p0)
            best, best_gain, det = None, NEG_INF, None
            for lit in _candidates(variables, body, cfg, depth):
                p1, t = _count(pos_b, order, lit, facts)
                if p1 == 0:
                    continue
                n1, _ = _count(neg_b, order, lit, facts)
                g = foil_gain(p0, n0, p1, n1, t)
                if g > best_gain + 1e-12:
                    best, best_gain = lit, g
                if det is None and _is_determinate(lit, order, pos_b, neg_b, facts):
                    det = lit
            if det is not None and (best is None or best_gain <= cfg.determinate_threshold * ceiling):
                best = det
                determinate.add(det)
            elif best is None or best_gain <= 0:
                break
            d = 1 + max(depth[a] for a in best.args if a in variables)
            for a, kind in zip(best.args, ARG_TYPES[best.predicate]):
                if a not in variables:
                    variables[a] = kind
                    depth[a] = d
            pos_b, _ = _extend(pos_b, order, best, facts)
            neg_b, _ = _extend(neg_b, order, best, facts)
            body.append(best)
        if neg_b or not body or (cfg.required and not any(b.predicate in cfg.required for b in body)):
            logger.warning("no consistent clause for %d remaining positives", len(remaining))
            break
        body = _drop_unused(head, body, determinate)
        covered = _covered(head, body, remaining, facts)
        if not covered:
            break
        clauses.append(_canonical(head, body, cfg))
        remaining = [p for p in remaining if p not in covered]
    return FoilResult(clauses, remaining)


# --------------------------------------------------------------------------
# compiling and repairing

def direction_effect(direction: str, target_var: str = "?to") -> ConditionalEffect:
    return ConditionalEffect(
        (("?pos", "mapgrid"),),
        (Literal(Atom(f"adj_{direction}", (target_var, "?pos")), True),),
        (Literal(Atom("native-at", ("?pos",)), False), Literal(Atom("invasive-at", ("?pos",)), False)),
    )


def clause_direction(clause: HornClause) -> Optional[str]:
    """Direction from the sprayed cell to the affected one, if the clause
    has the expected shape."""
    sprayed = {b.args[0] for b in clause.body if b.predicate == "spray"}
    head_pos = clause.head.args[0]
    adjs = [b for b in clause.body if b.predicate in ADJ]
    for b in adjs:
        d = b.predicate[4:]
        if b.args[0] in sprayed and b.args[1] == head_pos:
            return d
        if b.args[1] in sprayed and b.args[0] == head_pos:
            return OPPOSITE[d]
    return None


def compile_effects(clauses: Iterable[HornClause], target_var: str = "?to") -> List[ConditionalEffect]:
    effects: Dict[str, ConditionalEffect] = {}
    for clause in clauses:
        d = clause_direction(clause)
        if d is None:
            logger.warning("skipping clause without a usable adjacency literal: %s", clause)
            continue
        effects.setdefault(d, direction_effect(d, target_var))
    return sorted(effects.values(), key=ConditionalEffect.sort_key)


@dataclass
class RepairLog:
    entries: List[Tuple[str, str]] = field(default_factory=list)

    def append(self, note: str, domain: Domain) -> None:
        self.entries.append((note, render_domain(domain)))

    def save(self, directory: os.PathLike) -> List[Path]:
        out = Path(directory)
        out.mkdir(parents=True, exist_ok=True)
        paths = []
        for i, (note, text) in enumerate(self.entries, 1):
            p = out / f"repair-{i:03d}.pddl"
            p.write_text(f"; {note}\n{text}")
            paths.append(p)
        return paths


def repair_operator(domain: Domain, op: str, effects: Iterable[ConditionalEffect],
                    log: Optional[RepairLog] = None) -> Domain:
    """Return ``domain`` with ``effects`` added to ``op``'s conditional effects."""
    schema = domain.schema(op)
    merged = replace(schema, cond_effects=tuple(schema.cond_effects) + tuple(effects))
    repaired = domain.with_schema(merged)
    if log is not None and repaired != domain:
        added = len(merged.cond_effects) - len(schema.cond_effects)
        log.append(f"{op}: +{added} conditional effects", repaired)
    return repaired


def ground_truth_domain(flawed: Domain, op: str = "spray") -> Domain:
    """The spray model with all eight neighbour effects (the world's real dynamics)."""
    target = flawed.schema(op).params[0][0]
    return repair_operator(flawed, op, [direction_effect(d, target) for d in DIRECTIONS])


class RuleLearner:
    """Executor of the ``perform-learning`` meta-action.

    Induction re-runs on the whole example store each time, and the compiled
    effects replace earlier learned ones on top of the operator as it was
    first seen.
    """

    def __init__(self, cfg: FoilConfig = FoilConfig(), store: Optional[ExampleStore] = None,
                 log: Optional[RepairLog] = None):
        self.cfg = cfg
        self.store = store if store is not None else ExampleStore()
        self.log = log if log is not None else RepairLog()
        self.last_result: Optional[FoilResult] = None
        self._base: Dict[str, Domain] = {}

    def learn(self, op: str, domain: Domain, records: Sequence[ExecutionRecord]) -> Optional[Domain]:
        """Harvest ``records``, re-induce on the whole store and repair ``op``.

        Returns the repaired domain, or ``None`` when nothing could be induced.
        """
        base = self._base.setdefault(op, domain)
        harvest_examples(records, domain, self.store)
        positives = self.store.positives()
        if not positives:
            return None
        result = foil(op, positives, self.store.negatives(), self.store.background(), self.cfg)
        self.last_result = result
        if not result.clauses:
            return None
        target = domain.schema(op).params[0][0]
        effects = compile_effects(result.clauses, target)
        if not effects:
            return None
        current = domain.schema(op).cond_effects
        repaired = repair_operator(base, op, effects)
        if repaired.schema(op).cond_effects == current:
            return domain
        self.log.append(f"{op}: {len(effects)} learned conditional effects", repaired)
        return repaired
