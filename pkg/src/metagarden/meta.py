"""The metacognitive cycle over the cognitive trace.

Monitor hands over the newest trace segment, metacognitive expectations
flag suspicious (state, action, state) triples, a Meta-XP explains the
failure, a learning goal is formulated and planned for in the meta domain,
and the controller executes the plan (here: operator repair).
"""

from __future__ import annotations

import json
import logging
from collections import deque
from dataclasses import dataclass, field
from importlib import resources
from typing import Callable, Deque, Dict, List, NamedTuple, Optional, Sequence, Tuple

from .learning import RuleLearner
from .logic import Atom, GoalFormula, Literal
from .pddl import Domain, Problem, parse_domain
from .planner import Plan, ground, plan as search
from .trace import PHASE_OF, MentalAction, MentalState, Trace, TraceSegment

logger = logging.getLogger(__name__)


def load_resource(name: str) -> str:
    return resources.files("metagarden").joinpath("domains", name).read_text()


def load_domain(name: str) -> Domain:
    return parse_domain(load_resource(name))


# --------------------------------------------------------------------------
# monitoring and expectations

def monitor(trace: Trace, since: int = 0) -> TraceSegment:
    """Actions ``since`` onward with their surrounding states."""
    since = max(0, min(since, len(trace.actions)))
    if since == len(trace.actions):
        return TraceSegment((), (), since)
    return TraceSegment(tuple(trace.states[since:]), tuple(trace.actions[since:]), since)


class Monitor:
    """Remembers how far into which trace it has already looked."""

    def __init__(self):
        self._trace: Optional[Trace] = None
        self._cursor = 0

    def __call__(self, trace: Trace) -> TraceSegment:
        if trace is not self._trace:
            self._trace, self._cursor = trace, 0
        seg = monitor(trace, self._cursor)
        self._cursor = len(trace.actions)
        return seg


_FIELD_TESTS: Dict[str, Callable[[object], bool]] = {
    "nonempty": lambda v: bool(v),
    "empty": lambda v: not v,
    "present": lambda v: v is not None,
    "absent": lambda v: v is None,
}


@dataclass(frozen=True)
class FieldCheck:
    field: str
    test: str

    def __post_init__(self) -> None:
        if self.test not in _FIELD_TESTS:
            raise ValueError(f"unknown field test {self.test!r}")
        if self.field not in MentalState.__dataclass_fields__:
            raise ValueError(f"mental states have no field {self.field!r}")

    def __call__(self, s: MentalState) -> bool:
        return _FIELD_TESTS[self.test](getattr(s, self.field))


@dataclass(frozen=True)
class MetaExpectation:
    id: str
    action: MentalAction
    pre: FieldCheck
    post: FieldCheck

    def violated(self, s: MentalState, a: MentalAction, s2: MentalState) -> bool:
        return a == self.action and self.pre(s) and not self.post(s2)


DEFAULT_EXPECTATIONS: Tuple[MetaExpectation, ...] = (
    # goals in hand, so planning should produce steps
    MetaExpectation("E1", MentalAction.PLAN, FieldCheck("g_c", "nonempty"), FieldCheck("plan", "nonempty")),
    # a discrepancy should come out of Explanation explained
    MetaExpectation("E2", MentalAction.EXPLAIN, FieldCheck("D", "nonempty"), FieldCheck("E", "present")),
)


class MetaDiscrepancy(NamedTuple):
    expectation: str
    pre: MentalState
    action: MentalAction
    post: MentalState
    index: int


def check_meta_expectations(segment: TraceSegment,
                            library: Sequence[MetaExpectation] = DEFAULT_EXPECTATIONS) -> List[MetaDiscrepancy]:
    found = []
    for i, (s, a, s2) in enumerate(segment.triples()):
        for e in library:
            if e.violated(s, a, s2):
                found.append(MetaDiscrepancy(e.id, s, a, s2, segment.offset + i + 1))
    return found


# --------------------------------------------------------------------------
# meta-explanation patterns

NODE_KINDS = ("pre-xp", "explains", "internal", "xp-asserted")


@dataclass(frozen=True)
class XPNode:
    id: str
    kind: str
    pattern: Tuple[Tuple[str, str], ...]

    @property
    def spec(self) -> Dict[str, str]:
        return dict(self.pattern)


@dataclass(frozen=True)
class MetaXP:
    id: str
    nodes: Tuple[XPNode, ...]
    links: Tuple[Tuple[str, str], ...]
    actionable: str
    goal_template: Tuple[str, Tuple[str, ...]]
    description: str = ""

    def __post_init__(self) -> None:
        ids = {n.id: n for n in self.nodes}
        if len(ids) != len(self.nodes):
            raise ValueError(f"{self.id}: duplicate node ids")
        for n in self.nodes:
            if n.kind not in NODE_KINDS:
                raise ValueError(f"{self.id}: node {n.id} has unknown kind {n.kind!r}")
        for a, b in self.links:
            if a not in ids or b not in ids:
                raise ValueError(f"{self.id}: link {a}->{b} names an unknown node")
        explains = [n for n in self.nodes if n.kind == "explains"]
        if len(explains) != 1:
            raise ValueError(f"{self.id}: needs exactly one explains node")
        for a, _ in self.links:
            if ids[a].kind in ("explains", "pre-xp"):
                raise ValueError(f"{self.id}: {ids[a].kind} node {a} must be a sink")
        if self.actionable not in ids or ids[self.actionable].kind != "xp-asserted":
            raise ValueError(f"{self.id}: the actionable node must be xp-asserted")
        target = explains[0].id
        for n in self.nodes:
            if n.kind == "xp-asserted" and not self._reaches(n.id, target):
                raise ValueError(f"{self.id}: {n.id} does not reach the explains node")

    def _reaches(self, src: str, dst: str) -> bool:
        seen, stack = set(), [src]
        while stack:
            x = stack.pop()
            if x == dst:
                return True
            if x in seen:
                continue
            seen.add(x)
            stack.extend(b for a, b in self.links if a == x)
        return False

    def of_kind(self, kind: str) -> List[XPNode]:
        return [n for n in self.nodes if n.kind == kind]

    @classmethod
    def from_json(cls, data: dict) -> "MetaXP":
        nodes = tuple(XPNode(n["id"], n["kind"], tuple(sorted(n.get("pattern", {}).items())))
                      for n in data["nodes"])
        tmpl = data["goal_template"]
        return cls(data["id"], nodes, tuple(tuple(l) for l in data["links"]), data["actionable"],
                   (tmpl["predicate"], tuple(tmpl["args"])), data.get("description", ""))


def load_xps(text: Optional[str] = None) -> Tuple[MetaXP, ...]:
    data = json.loads(text if text is not None else load_resource("meta_xps.json"))
    return tuple(MetaXP.from_json(x) for x in data["xps"])


@dataclass(frozen=True)
class MetaXPInstance:
    xp: MetaXP
    bindings: Tuple[Tuple[str, str], ...]
    discrepancy: MetaDiscrepancy

    def binding(self, var: str) -> str:
        return dict(self.bindings)[var]


def _action_name(text: Optional[str]) -> Optional[str]:
    if not text:
        return None
    return text.strip("()").split()[0]


def _node_holds(spec: Dict[str, str], md: MetaDiscrepancy, bindings: Dict[str, str],
                domain: Optional[Domain]) -> bool:
    test = spec.get("test", "asserted")
    s2 = md.post
    if test == "asserted":
        return True
    if test == "expectation":
        return md.expectation == spec["value"]
    if test == "phase":
        return PHASE_OF[md.action] == spec["value"]
    if test == "lost-preservation-goal":
        kept = {lit.atom for lit, _ in s2.agenda if lit.positive}
        return any(a in kept for a in s2.D.missing)
    if test == "explanation-absent":
        return s2.E is None
    if test == "no-other-agent":
        return not any(a.predicate == "other-agent-at" for a in s2.believed)
    if test == "last-action":
        name = _action_name(s2.last_action)
        if name is None:
            return False
        bindings[spec["bind"]] = name
        return True
    if test == "knowledge-incomplete":
        op = bindings.get(spec["var"])
        if op is None:
            return False
        return domain is None or any(s.name == op for s in domain.schemas)
    raise ValueError(f"unknown XP node test {test!r}")


def meta_explain(md: MetaDiscrepancy, segment: TraceSegment, xps: Sequence[MetaXP],
                 domain: Optional[Domain] = None) -> Optional[MetaXPInstance]:
    """First XP whose explains and pre-XP nodes match and whose asserted
    causes can be bound, instantiated with those bindings."""
    for xp in xps:
        bindings: Dict[str, str] = {"?state": f"s{md.index}"}
        gate = xp.of_kind("explains") + xp.of_kind("pre-xp")
        if not all(_node_holds(n.spec, md, bindings, domain) for n in gate):
            continue
        causes = xp.of_kind("xp-asserted") + xp.of_kind("internal")
        if not all(_node_holds(n.spec, md, bindings, domain) for n in causes):
            continue
        return MetaXPInstance(xp, tuple(sorted(bindings.items())), md)
    logger.info("no meta-explanation applies to %s", md.expectation)
    return None


# --------------------------------------------------------------------------
# meta goals, planning and control

class MetaGoal(NamedTuple):
    predicate: str
    op: str
    state: str

    def __str__(self) -> str:
        return f"({self.predicate} {self.op} {self.state})"


def formulate_meta_goal(inst: MetaXPInstance) -> MetaGoal:
    pred, args = inst.xp.goal_template
    b = dict(inst.bindings)
    values = [b[a] if a.startswith("?") else a for a in args]
    return MetaGoal(pred, values[0], values[1])


@dataclass
class MetaAgenda:
    entries: List[Tuple[MetaGoal, MetaXPInstance]] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.entries)

    def add(self, goal: MetaGoal, inst: MetaXPInstance) -> bool:
        if any(g.predicate == goal.predicate and g.op == goal.op for g, _ in self.entries):
            return False
        self.entries.append((goal, inst))
        return True

    def instance(self, goal: MetaGoal) -> MetaXPInstance:
        return next(i for g, i in self.entries if g == goal)

    def remove(self, goal: MetaGoal) -> None:
        self.entries = [(g, i) for g, i in self.entries if g != goal]


def meta_intend(agenda: MetaAgenda) -> Optional[MetaGoal]:
    return agenda.entries[0][0] if agenda.entries else None


def build_meta_problem(goal: MetaGoal, meta_domain: Domain,
                       inst: Optional[MetaXPInstance] = None) -> Problem:
    op = goal.op if inst is None else inst.binding("?op")
    init = frozenset({
        Atom("has-discrepancy", ("current-state",)),
        Atom("outdated", (op,)),
        Atom("caused_discrepancy", (op,)),
    })
    return Problem("meta-learning", meta_domain.name, ((op, "operator"), ("current-state", "state")), init,
                   GoalFormula((Literal(Atom(goal.predicate, (op, "current-state")), True),)))


def meta_plan(goal: MetaGoal, meta_domain: Domain, inst: Optional[MetaXPInstance] = None,
              problem: Optional[Problem] = None) -> Optional[Plan]:
    problem = problem if problem is not None else build_meta_problem(goal, meta_domain, inst)
    result = search(ground(meta_domain, problem))
    if result is None:
        logger.warning("no meta-plan achieves %s; dropping it", goal)
    return result


class Controller:
    """Runs meta-plans one step at a time through per-action executors."""

    def __init__(self, learner: Optional[RuleLearner] = None):
        self.learner = learner if learner is not None else RuleLearner()
        self.executors: Dict[str, Callable] = {"perform-learning": self._perform_learning}

    def _perform_learning(self, step, agent) -> bool:
        op = step.args[0]
        records = [r for r in agent.history[agent.harvested:] if r.after is not None]
        agent.harvested += len(records)
        repaired = self.learner.learn(op, agent.model.domain, records)
        if repaired is None:
            logger.info("learning %s produced no clauses; model unchanged", op)
            return False
        agent.install_domain(repaired)
        return True

    def control(self, plan: Plan, agent) -> bool:
        for step in plan:
            run = self.executors.get(step.name)
            if run is None:
                logger.warning("no executor for meta-action %s", step.name)
                return False
            if not run(step, agent):
                return False
        return True


class MetaEvent(NamedTuple):
    stage: str
    detail: object
    call: int = 0


class MetaCycle:
    """The meta hook: one full metacognitive cycle after each cognitive phase."""

    def __init__(self, learner: Optional[RuleLearner] = None,
                 expectations: Sequence[MetaExpectation] = DEFAULT_EXPECTATIONS,
                 xps: Optional[Sequence[MetaXP]] = None, meta_domain: Optional[Domain] = None,
                 keep_events: int = 200):
        self.expectations = tuple(expectations)
        self.xps = tuple(xps) if xps is not None else load_xps()
        self.meta_domain = meta_domain if meta_domain is not None else load_domain("meta.pddl")
        self.controller = Controller(learner)
        self.monitor = Monitor()
        self.agenda = MetaAgenda()
        self.events: Deque[MetaEvent] = deque(maxlen=keep_events)
        self.calls = 0

    @property
    def learner(self) -> RuleLearner:
        return self.controller.learner

    def _ready(self, agent) -> bool:
        # retry learning only when unharvested executions exist
        return any(r.action.name == "spray" and r.after is not None
                   for r in agent.history[agent.harvested:])

    def _log(self, stage: str, detail: object) -> None:
        self.events.append(MetaEvent(stage, detail, self.calls))

    def __call__(self, agent, phase: str = "") -> None:
        self.calls += 1
        segment = self.monitor(agent.trace)
        for md in check_meta_expectations(segment, self.expectations):
            self._log("violation", md)
            inst = meta_explain(md, segment, self.xps, agent.model.domain)
            if inst is None:
                continue
            self._log("explanation", inst)
            goal = formulate_meta_goal(inst)
            if self.agenda.add(goal, inst):
                self._log("goal", goal)
        goal = meta_intend(self.agenda)
        if goal is None or not self._ready(agent):
            return
        plan = meta_plan(goal, self.meta_domain, self.agenda.instance(goal))
        if plan is None:
            self.agenda.remove(goal)
            return
        self._log("plan", plan)
        if self.controller.control(plan, agent):
            self._log("repair", agent.model.domain)
            self.agenda.remove(goal)
