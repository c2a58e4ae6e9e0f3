"""The cognitive cycle: perceive, interpret, evaluate, intend, plan, act.

A meta hook, if installed, runs after every phase (Interpret counts as one
phase made of three mental actions).  Every mental action is recorded in the
agent's introspective trace.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Iterable, List, Optional, Sequence, Tuple

from .garden import (OBJECTS, GardenWorld, env_step, observe,
                     parse_cell, chebyshev, world_action)
from .learning import ExecutionRecord
from .logic import (Atom, ContractError, Discrepancy, GoalFormula, Literal, State, diff_states,
                    entails, holds)
from .pddl import Domain, Problem
from .planner import (GroundAction, Plan, SearchConfig, SearchLimitExceeded,
                      applicable, ground, plan as search, successor)
from .trace import MentalAction, MentalState, Trace

logger = logging.getLogger(__name__)

STEP_CAP = 500


class GoalStatus(str, Enum):
    PENDING = "pending"
    CURRENT = "current"
    ACHIEVED = "achieved"
    REJECTED = "rejected"


_ALLOWED = {
    GoalStatus.PENDING: {GoalStatus.CURRENT, GoalStatus.REJECTED},
    GoalStatus.CURRENT: {GoalStatus.ACHIEVED, GoalStatus.REJECTED},
    GoalStatus.ACHIEVED: set(),
    GoalStatus.REJECTED: set(),
}


@dataclass
class GoalRecord:
    formula: Literal
    status: GoalStatus = GoalStatus.PENDING

    def move(self, to: GoalStatus) -> None:
        if to not in _ALLOWED[self.status]:
            raise ContractError(f"goal {self.formula} cannot go from {self.status.value} to {to.value}")
        self.status = to

    @property
    def is_removal(self) -> bool:
        return not self.formula.positive


@dataclass
class Agenda:
    records: List[GoalRecord] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    def get(self, lit: Literal) -> Optional[GoalRecord]:
        return next((r for r in self.records if r.formula == lit), None)

    def with_status(self, *statuses: GoalStatus) -> List[GoalRecord]:
        return [r for r in self.records if r.status in statuses]

    def insert(self, lit: Literal) -> bool:
        if self.get(lit) is not None:
            return False
        self.records.append(GoalRecord(lit))
        return True

    def snapshot(self) -> Tuple[Tuple[Literal, str], ...]:
        return tuple((r.formula, r.status.value) for r in self.records)


@dataclass
class AgentModel:
    domain: Domain
    believed_state: State = frozenset()


@dataclass(frozen=True)
class Explanation:
    pattern: str
    bindings: Tuple[Tuple[str, str], ...]
    culprit: str

    def __str__(self) -> str:
        return f"{self.pattern}({', '.join(f'{k}={v}' for k, v in self.bindings)})"


@dataclass(frozen=True)
class CognitivePattern:
    """A cognitive explanation pattern: lost plant near another agent."""

    id: str
    culprit: str
    agent_predicate: str = "other-agent-at"
    radius: int = 1

    def match(self, D: Discrepancy, state: State) -> Optional[Explanation]:
        agents = [a.args[0] for a in state if a.predicate == self.agent_predicate]
        for lost in sorted(D.missing):
            if lost.predicate not in ("native-at", "invasive-at"):
                continue
            for cell in sorted(agents):
                if chebyshev(parse_cell(cell), parse_cell(lost.args[0])) <= self.radius:
                    return Explanation(self.id, (("?lost", lost.args[0]), ("?agent", cell)), self.culprit)
        return None


DEFAULT_PATTERNS: Tuple[CognitivePattern, ...] = (
    CognitivePattern("other-agent-interference", "another gardener sprayed nearby"),
)


@dataclass
class CycleContext:
    g_c: Tuple[Literal, ...] = ()
    plan: Optional[Plan] = None
    cursor: int = 0
    plan_fingerprint: str = ""
    D: Discrepancy = Discrepancy()
    E: Optional[Explanation] = None
    last_action: Optional[GroundAction] = None
    expected: Optional[State] = None
    observed: State = frozenset()
    intended_fingerprint: str = ""

    @property
    def has_next_step(self) -> bool:
        return self.plan is not None and self.cursor < len(self.plan)


@dataclass
class EpisodeResult:
    achieved: int
    rejected: int
    total: int
    steps: int
    cycles: int
    capped: bool
    trace: Trace
    learn_events: int = 0
    world: Optional[GardenWorld] = None

    @property
    def percentage(self) -> float:
        return 100.0 if self.total == 0 else 100.0 * self.achieved / self.total


MetaHook = Callable[["CognitiveAgent", str], None]


# --------------------------------------------------------------------------
# phase operations

def perceive(world: GardenWorld, ctx: CycleContext) -> State:
    ctx.observed = observe(world)
    return ctx.observed


def detect_discrepancies(ctx: CycleContext) -> Discrepancy:
    if ctx.expected is None:
        ctx.D = Discrepancy()
    else:
        ctx.D = diff_states(ctx.expected, ctx.observed)
    ctx.expected = None
    return ctx.D


def explain_cognitive(D: Discrepancy, ctx: CycleContext,
                      kb: Sequence[CognitivePattern] = DEFAULT_PATTERNS) -> Optional[Explanation]:
    if not D:
        raise ContractError("nothing to explain: the discrepancy set is empty")
    for pattern in kb:
        e = pattern.match(D, ctx.observed)
        if e is not None:
            return e
    return None


def insert_goals(goals: Iterable[Literal], agenda: Agenda) -> Agenda:
    for lit in goals:
        agenda.insert(lit)
    return agenda


def evaluate(state: State, ctx: CycleContext, agenda: Agenda) -> Agenda:
    current = agenda.with_status(GoalStatus.CURRENT)
    if ctx.g_c and entails(state, ctx.g_c):
        for r in current:
            r.move(GoalStatus.ACHIEVED)
        ctx.g_c = ()
        return agenda
    # removal goals settle as soon as they hold; preservation goals at the end
    for r in current:
        if r.is_removal and holds(state, r.formula):
            r.move(GoalStatus.ACHIEVED)
    return agenda


def _spray_actions(domain: Domain, state: State) -> List[GroundAction]:
    task = ground(domain, Problem("intend", domain.name, OBJECTS, state))
    return [a for a in task.actions if a.name == "spray"]


def unsafe_removals(domain: Domain, state: State, goals: Iterable[Literal]) -> List[Literal]:
    """Removal goals no garden spray can achieve without killing a native,
    judged by projecting every spray grounding under ``domain``."""
    natives = {a for a in state if a.predicate == "native-at"}
    agent = next((a for a in state if a.predicate == "agent-at"), None)
    base = state - {agent} if agent is not None else state
    safe_kills = set()
    for a in _spray_actions(domain, state):
        hypothetical = base | {Atom("agent-at", (a.args[0],))}
        if not applicable(hypothetical, a):
            continue
        after = successor(hypothetical, a)
        if natives - after:
            continue
        safe_kills |= {x for x in hypothetical - after if x.predicate == "invasive-at"}
    return [g for g in goals
            if not g.positive and g.atom.predicate == "invasive-at"
            and g.atom in state and g.atom not in safe_kills]


def intend(agenda: Agenda, model: AgentModel, mode: str, ctx: CycleContext) -> Tuple[Literal, ...]:
    fp = model.domain.fingerprint
    if ctx.g_c:
        if mode == "learning" and fp != ctx.intended_fingerprint:
            # the action model changed since the last commitment: recheck
            current = [r.formula for r in agenda.with_status(GoalStatus.CURRENT)]
            for lit in unsafe_removals(model.domain, model.believed_state, current):
                agenda.get(lit).move(GoalStatus.REJECTED)
            ctx.g_c = tuple(r.formula for r in agenda.with_status(GoalStatus.CURRENT))
            ctx.intended_fingerprint = fp
        return ctx.g_c
    pending = [r.formula for r in agenda.with_status(GoalStatus.PENDING)]
    if mode == "learning":
        for lit in unsafe_removals(model.domain, model.believed_state, pending):
            agenda.get(lit).move(GoalStatus.REJECTED)
    for r in agenda.with_status(GoalStatus.PENDING):
        r.move(GoalStatus.CURRENT)
    ctx.g_c = tuple(r.formula for r in agenda.with_status(GoalStatus.CURRENT))
    ctx.intended_fingerprint = fp
    return ctx.g_c


def _addable(domain: Domain) -> set:
    preds = set()
    for s in domain.schemas:
        preds |= {l.atom.predicate for l in s.effects if l.positive}
        for ce in s.cond_effects:
            preds |= {l.atom.predicate for l in ce.effects if l.positive}
    return preds


def planning_goal(domain: Domain, state: State, g_c: Sequence[Literal], agenda: Agenda) -> GoalFormula:
    """``g_c`` minus achieved or rejected goals and positive goals no action can restore."""
    addable = _addable(domain)
    keep = []
    for lit in g_c:
        rec = agenda.get(lit)
        if rec is not None and rec.status in (GoalStatus.ACHIEVED, GoalStatus.REJECTED):
            continue
        if lit.positive and lit.atom not in state and lit.atom.predicate not in addable:
            continue
        keep.append(lit)
    return GoalFormula(tuple(keep))


def plan_phase(model: AgentModel, state: State, ctx: CycleContext, agenda: Agenda,
               cfg: SearchConfig = SearchConfig()) -> Optional[Plan]:
    if not ctx.g_c:
        raise ContractError("nothing to plan for: g_c is empty")
    goal = planning_goal(model.domain, state, ctx.g_c, agenda)
    ctx.cursor = 0
    ctx.plan_fingerprint = model.domain.fingerprint
    if not goal:
        ctx.plan = Plan(())
        return ctx.plan
    task = ground(model.domain, Problem("cycle", model.domain.name, OBJECTS, state, goal))
    result = search(task, cfg)
    if result is None:
        logger.info("no plan for %s; rejecting the remaining removal goals", goal)
        for r in agenda.with_status(GoalStatus.CURRENT):
            if r.is_removal and not holds(state, r.formula):
                r.move(GoalStatus.REJECTED)
        ctx.g_c = tuple(r.formula for r in agenda.with_status(GoalStatus.CURRENT))
        ctx.plan = Plan(())
        return ctx.plan
    ctx.plan = result
    return result


def act(ctx: CycleContext, model: AgentModel, world: GardenWorld) -> GardenWorld:
    if not ctx.has_next_step:
        return world
    step = ctx.plan[ctx.cursor]
    if not applicable(model.believed_state, step):
        logger.info("%s is not applicable; dropping the plan", step)
        ctx.plan = None
        return world
    ctx.expected = successor(model.believed_state, step)
    world = env_step(world, world_action(step.name, step.args))
    ctx.cursor += 1
    ctx.last_action = step
    return world


# --------------------------------------------------------------------------
# the agent

class CognitiveAgent:
    """A planning agent running the cognitive cycle, optionally with a meta hook.

    ``mode`` is ``"standard"`` (never rejects goals) or ``"learning"``
    (rejects removal goals that would cost a native under its current model).
    """

    def __init__(self, domain: Domain, mode: str = "standard", meta_hook: Optional[MetaHook] = None,
                 patterns: Sequence[CognitivePattern] = DEFAULT_PATTERNS, step_cap: int = STEP_CAP,
                 search: SearchConfig = SearchConfig()):
        if mode not in ("standard", "learning"):
            raise ValueError(f"unknown agent mode {mode!r}")
        self.mode = mode
        self.model = AgentModel(domain)
        self.meta_hook = meta_hook
        self.patterns = tuple(patterns)
        self.step_cap = step_cap
        self.search = search
        self.learn_events = 0
        self._reset()

    def _reset(self) -> None:
        self.ctx = CycleContext()
        self.agenda = Agenda()
        self.trace = Trace()
        self.history: List[ExecutionRecord] = []
        self.harvested = 0
        self.world: Optional[GardenWorld] = None
        self.worlds: List[GardenWorld] = []

    def snapshot(self) -> MentalState:
        c = self.ctx
        return MentalState(
            g_c=c.g_c,
            agenda=self.agenda.snapshot(),
            plan=tuple(str(s) for s in c.plan) if c.plan is not None else (),
            cursor=c.cursor,
            believed=self.model.believed_state,
            fingerprint=self.model.domain.fingerprint,
            D=c.D,
            E=str(c.E) if c.E is not None else None,
            last_action=str(c.last_action) if c.last_action is not None else None,
        )

    def _record(self, tag: MentalAction) -> None:
        pre = self.trace.last_state
        if pre is None:
            pre = self._initial
        self.trace.record(pre, tag, self.snapshot())

    def _hook(self, phase: str) -> None:
        if self.meta_hook is not None:
            self.meta_hook(self, phase)

    def install_domain(self, domain: Domain) -> None:
        if domain != self.model.domain:
            self.model.domain = domain
            self.learn_events += 1

    def run_episode(self, world: GardenWorld, goals: Iterable[Literal]) -> EpisodeResult:
        self._reset()
        goals = tuple(goals)
        self.world = world
        self.worlds.append(world)
        self._initial = self.snapshot()
        events_before = self.learn_events
        cycles = steps = 0
        capped = False
        first = True
        ctx = self.ctx
        try:
            while True:
                if cycles >= self.step_cap:
                    capped = True
                    logger.warning("episode stopped at the %d-cycle cap", self.step_cap)
                    break
                cycles += 1

                perceive(self.world, ctx)
                self.model.believed_state = ctx.observed
                if self.history and self.history[-1].after is None:
                    self.history[-1] = self.history[-1]._replace(after=ctx.observed)
                self._record(MentalAction.PERCEIVE)
                self._hook("Perceive")

                D = detect_discrepancies(ctx)
                self._record(MentalAction.DETECT)
                ctx.E = explain_cognitive(D, ctx, self.patterns) if D else None
                self._record(MentalAction.EXPLAIN)
                if first:
                    insert_goals(goals, self.agenda)
                    first = False
                self._record(MentalAction.INSERT)
                if D:
                    ctx.plan = None
                self._hook("Interpret")

                evaluate(ctx.observed, ctx, self.agenda)
                self._record(MentalAction.EVALUATE)
                self._hook("Evaluate")
                if not self.agenda.with_status(GoalStatus.PENDING) and not any(
                        r.is_removal for r in self.agenda.with_status(GoalStatus.CURRENT)):
                    break

                intend(self.agenda, self.model, self.mode, ctx)
                self._record(MentalAction.INTEND)
                self._hook("Intend")

                stale = ctx.plan_fingerprint != self.model.domain.fingerprint
                if ctx.g_c and (ctx.plan is None or not ctx.has_next_step or stale):
                    plan_phase(self.model, ctx.observed, ctx, self.agenda, self.search)
                self._record(MentalAction.PLAN)
                self._hook("Plan")

                before = self.model.believed_state
                new_world = act(ctx, self.model, self.world)
                if new_world is not self.world:
                    steps += 1
                    self.history.append(ExecutionRecord(self.world.clock, ctx.last_action, before, None))
                    self.world = new_world
                    self.worlds.append(new_world)
                self._record(MentalAction.ACT)
                self._hook("Act")
        except SearchLimitExceeded as exc:
            logger.warning("planner gave up after %d expansions; ending the episode", exc.expanded)
            capped = True

        return self._score(goals, steps, cycles, capped, self.learn_events - events_before)

    def _score(self, goals, steps, cycles, capped, learn_events) -> EpisodeResult:
        final = observe(self.world)
        achieved = rejected = 0
        for lit in goals:
            rec = self.agenda.get(lit)
            if rec is not None and rec.status is GoalStatus.REJECTED:
                rejected += 1
            elif holds(final, lit):
                achieved += 1
                if rec is not None and rec.status is GoalStatus.CURRENT:
                    rec.move(GoalStatus.ACHIEVED)
        return EpisodeResult(achieved, rejected, len(goals), steps, cycles, capped, self.trace,
                             learn_events, self.world)
