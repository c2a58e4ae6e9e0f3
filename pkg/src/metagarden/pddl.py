"""Reader and canonical printer for a small PDDL subset.

Supported: ``:strips :typing :negative-preconditions :conditional-effects
:universal-effects``.  Anything else (numeric fluents, durative actions,
derived predicates, disjunctive preconditions...) is rejected with a
:class:`PDDLError` that carries the line and column of the offending form.

The printer is canonical: lowercase keywords, one literal per line, and
conditional effects kept in a stable sorted order, so that
``parse_domain(render_domain(d)) == d`` holds exactly.
"""

from __future__ import annotations

import hashlib
import re
from dataclasses import dataclass, field, replace
from functools import cached_property
from typing import Dict, Iterable, List, Optional, Sequence, Tuple, Union

from .logic import Atom, GoalFormula, Literal, State, is_variable

SUPPORTED_REQUIREMENTS = (
    ":strips",
    ":typing",
    ":negative-preconditions",
    ":conditional-effects",
    ":universal-effects",
)

Params = Tuple[Tuple[str, str], ...]


class PDDLError(ValueError):
    def __init__(self, message: str, line: int = 0, column: int = 0):
        self.message = message
        self.line = line
        self.column = column
        super().__init__(f"line {line}, column {column}: {message}")


# --------------------------------------------------------------------------
# s-expressions

@dataclass
class _Node:
    value: Union[str, List["_Node"]]
    line: int
    col: int

    @property
    def is_list(self) -> bool:
        return isinstance(self.value, list)

    def head(self) -> Optional[str]:
        if self.is_list and self.value and not self.value[0].is_list:
            return self.value[0].value
        return None

    def fail(self, message: str) -> PDDLError:
        return PDDLError(message, self.line, self.col)


_TOKEN = re.compile(r"\s+|;[^\n]*|\(|\)|[^\s();]+")
_SYMBOL = re.compile(r"^[:?]?[a-z][a-z0-9_\-]*$|^-$|^[0-9]+$")


def _read(text: str) -> _Node:
    stack: List[_Node] = []
    top: Optional[_Node] = None
    line, line_start = 1, 0
    for m in _TOKEN.finditer(text):
        tok = m.group()
        col = m.start() - line_start + 1
        if tok[0].isspace() or tok[0] == ";":
            nl = tok.count("\n")
            if nl:
                line += nl
                line_start = m.start() + tok.rindex("\n") + 1
            continue
        if tok == "(":
            node = _Node([], line, col)
            if stack:
                stack[-1].value.append(node)
            elif top is not None:
                raise PDDLError("unexpected content after top-level form", line, col)
            stack.append(node)
        elif tok == ")":
            if not stack:
                raise PDDLError("unbalanced ')'", line, col)
            node = stack.pop()
            if not stack:
                top = node
        else:
            sym = tok.lower()
            if not _SYMBOL.match(sym):
                raise PDDLError(f"illegal token {tok!r}", line, col)
            if not stack:
                raise PDDLError(f"symbol {tok!r} outside any form", line, col)
            stack[-1].value.append(_Node(sym, line, col))
    if stack:
        raise PDDLError("unbalanced '(' (form never closed)", stack[-1].line, stack[-1].col)
    if top is None:
        raise PDDLError("empty input", line, 1)
    return top


def _symbols(node: _Node, what: str) -> List[_Node]:
    if not node.is_list:
        raise node.fail(f"expected a list of {what}")
    for item in node.value:
        if item.is_list:
            raise item.fail(f"expected a symbol in {what}")
    return node.value


def _typed_list(items: Sequence[_Node], allow_untyped: bool = True) -> List[Tuple[str, str, _Node]]:
    out: List[Tuple[str, str, _Node]] = []
    pending: List[_Node] = []
    i = 0
    while i < len(items):
        item = items[i]
        if item.value == "-":
            if i + 1 >= len(items) or not pending:
                raise item.fail("dangling '-' in typed list")
            tnode = items[i + 1]
            if tnode.is_list:
                raise tnode.fail("'either' types are not supported")
            out.extend((p.value, tnode.value, p) for p in pending)
            pending = []
            i += 2
            continue
        pending.append(item)
        i += 1
    if pending:
        if not allow_untyped:
            raise pending[0].fail("missing type annotation")
        out.extend((p.value, "object", p) for p in pending)
    return out


# --------------------------------------------------------------------------
# domain model

@dataclass(frozen=True)
class ConditionalEffect:
    quantified: Params
    condition: Tuple[Literal, ...]
    effects: Tuple[Literal, ...]

    def sort_key(self) -> Tuple:
        return (
            tuple(_lit_key(l) for l in self.condition),
            self.quantified,
            tuple(_lit_key(l) for l in self.effects),
        )


def _lit_key(lit: Literal) -> Tuple:
    return (lit.atom.predicate, lit.atom.args, not lit.positive)


@dataclass(frozen=True)
class ActionSchema:
    name: str
    params: Params
    precondition: Tuple[Literal, ...] = ()
    effects: Tuple[Literal, ...] = ()
    cond_effects: Tuple[ConditionalEffect, ...] = ()

    def __post_init__(self) -> None:
        ordered = tuple(sorted(set(self.cond_effects), key=ConditionalEffect.sort_key))
        object.__setattr__(self, "cond_effects", ordered)
        param_vars = {v for v, _ in self.params}
        for lit in self.precondition + self.effects:
            for arg in lit.atom.args:
                if is_variable(arg) and arg not in param_vars:
                    raise ValueError(f"{self.name}: free variable {arg} in {lit}")
        for ce in self.cond_effects:
            scope = param_vars | {v for v, _ in ce.quantified}
            for lit in ce.condition + ce.effects:
                for arg in lit.atom.args:
                    if is_variable(arg) and arg not in scope:
                        raise ValueError(f"{self.name}: free variable {arg} in {lit}")
        polarity: Dict[Atom, bool] = {}
        for lit in self.effects:
            if polarity.setdefault(lit.atom, lit.positive) != lit.positive:
                raise ValueError(f"{self.name}: effect {lit.atom} given with both polarities")


@dataclass(frozen=True)
class Domain:
    name: str
    requirements: Tuple[str, ...] = ()
    types: Tuple[Tuple[str, str], ...] = ()
    predicates: Tuple[Tuple[str, Params], ...] = ()
    schemas: Tuple[ActionSchema, ...] = ()

    def __post_init__(self) -> None:
        names = [s.name for s in self.schemas]
        if len(names) != len(set(names)):
            raise ValueError("duplicate action schema names")

    @cached_property
    def predicate_params(self) -> Dict[str, Params]:
        return dict(self.predicates)

    @cached_property
    def _parents(self) -> Dict[str, str]:
        return dict(self.types)

    @cached_property
    def fingerprint(self) -> str:
        return hashlib.sha1(render_domain(self).encode()).hexdigest()[:12]

    @cached_property
    def static_predicates(self) -> frozenset:
        """Predicates no schema ever adds or deletes."""
        touched = set()
        for s in self.schemas:
            touched.update(l.atom.predicate for l in s.effects)
            for ce in s.cond_effects:
                touched.update(l.atom.predicate for l in ce.effects)
        return frozenset(p for p, _ in self.predicates if p not in touched)

    def type_names(self) -> set:
        return {"object"} | {t for t, _ in self.types} | {p for _, p in self.types}

    def is_subtype(self, kind: str, ancestor: str) -> bool:
        seen = set()
        while kind not in seen:
            if kind == ancestor or ancestor == "object":
                return True
            seen.add(kind)
            kind = self._parents.get(kind, "object")
        return False

    def schema(self, name: str) -> ActionSchema:
        for s in self.schemas:
            if s.name == name:
                return s
        raise KeyError(name)

    def with_schema(self, schema: ActionSchema) -> "Domain":
        return replace(self, schemas=tuple(schema if s.name == schema.name else s for s in self.schemas))


@dataclass(frozen=True)
class Problem:
    name: str
    domain_name: str
    objects: Tuple[Tuple[str, str], ...]
    init: State
    goal: GoalFormula = field(default_factory=lambda: GoalFormula(()))

    @cached_property
    def object_kinds(self) -> Dict[str, str]:
        return dict(self.objects)


# --------------------------------------------------------------------------
# parsing

_UNSUPPORTED_SECTIONS = {
    ":functions": "numeric fluents",
    ":durative-action": "durative actions",
    ":derived": "derived predicates",
    ":axiom": "axioms",
    ":constants": "domain constants",
    ":metric": "plan metrics",
    ":constraints": "constraints",
    ":timed-initial-literals": "timed initial literals",
}
_UNSUPPORTED_FORMULAS = {
    "or": "disjunctive conditions",
    "imply": "implications",
    "exists": "existential conditions",
    "forall": "universal preconditions",
    "=": "equality",
    ">": "numeric comparisons",
    "<": "numeric comparisons",
    ">=": "numeric comparisons",
    "<=": "numeric comparisons",
    "increase": "numeric fluents",
    "decrease": "numeric fluents",
    "assign": "numeric fluents",
    "scale-up": "numeric fluents",
    "scale-down": "numeric fluents",
    "at": "timed literals",
    "over": "timed literals",
}


class _DomainBuilder:
    def __init__(self, node: _Node):
        self.root = node
        self.name = ""
        self.requirements: List[str] = []
        self.types: List[Tuple[str, str]] = []
        self.predicates: Dict[str, Params] = {}
        self.schemas: List[ActionSchema] = []

    def build(self) -> Domain:
        root = self.root
        if root.head() != "define":
            raise root.fail("expected (define ...)")
        items = root.value[1:]
        if not items or items[0].head() != "domain" or len(items[0].value) != 2:
            raise root.fail("expected (domain <name>)")
        self.name = items[0].value[1].value
        for section in items[1:]:
            key = section.head()
            if key == ":requirements":
                self._requirements(section)
            elif key == ":types":
                self._types(section)
            elif key == ":predicates":
                self._predicates(section)
            elif key == ":action":
                self.schemas.append(self._action(section))
            elif key in _UNSUPPORTED_SECTIONS:
                raise section.fail(f"unsupported construct: {_UNSUPPORTED_SECTIONS[key]} ({key})")
            else:
                raise section.fail(f"unknown domain section {key!r}")
        names = [s.name for s in self.schemas]
        for i, s in enumerate(self.schemas):
            if s.name in names[:i]:
                raise root.fail(f"duplicate action {s.name!r}")
        return Domain(self.name, tuple(self.requirements), tuple(self.types),
                      tuple(self.predicates.items()), tuple(self.schemas))

    def _requirements(self, node: _Node) -> None:
        for req in _symbols(node, "requirements")[1:]:
            if req.value not in SUPPORTED_REQUIREMENTS:
                raise req.fail(f"unsupported requirement {req.value}")
            self.requirements.append(req.value)

    def _types(self, node: _Node) -> None:
        entries = _typed_list(_symbols(node, "types")[1:])
        declared = {t for t, _, _ in entries} | {"object"}
        for t, parent, n in entries:
            if parent not in declared:
                raise n.fail(f"undeclared parent type {parent!r}")
            self.types.append((t, parent))

    def _known_type(self, kind: str, node: _Node) -> str:
        if kind != "object" and kind not in {t for t, _ in self.types}:
            raise node.fail(f"undeclared type {kind!r}")
        return kind

    def _params(self, node: _Node) -> Params:
        out = []
        for var, kind, n in _typed_list(_symbols(node, "parameters")):
            if not is_variable(var):
                raise n.fail(f"parameter {var!r} must start with '?'")
            out.append((var, self._known_type(kind, n)))
        return tuple(out)

    def _predicates(self, node: _Node) -> None:
        for decl in node.value[1:]:
            if not decl.is_list or not decl.value or decl.value[0].is_list:
                raise decl.fail("malformed predicate declaration")
            name = decl.value[0].value
            if name in self.predicates:
                raise decl.fail(f"predicate {name!r} declared twice")
            self.predicates[name] = self._params(_Node(decl.value[1:], decl.line, decl.col))

    def _action(self, node: _Node) -> ActionSchema:
        items = node.value
        if len(items) < 2 or items[1].is_list:
            raise node.fail("action needs a name")
        name = items[1].value
        fields: Dict[str, _Node] = {}
        i = 2
        while i < len(items):
            key = items[i]
            if key.is_list or not key.value.startswith(":"):
                raise key.fail("expected an action keyword")
            if key.value not in (":parameters", ":precondition", ":effect"):
                raise key.fail(f"unsupported action field {key.value}")
            if i + 1 >= len(items):
                raise key.fail(f"{key.value} without a value")
            fields[key.value] = items[i + 1]
            i += 2
        params = self._params(fields[":parameters"]) if ":parameters" in fields else ()
        scope = dict(params)
        pre = self._conjunction(fields[":precondition"], scope) if ":precondition" in fields else ()
        effects: List[Literal] = []
        conds: List[ConditionalEffect] = []
        if ":effect" in fields:
            self._effect(fields[":effect"], scope, (), effects, conds)
        try:
            return ActionSchema(name, params, tuple(pre), tuple(effects), tuple(conds))
        except ValueError as exc:
            raise node.fail(str(exc)) from None

    def _literal(self, node: _Node, scope: Dict[str, str]) -> Literal:
        head = node.head()
        if head == "not":
            if len(node.value) != 2 or not node.value[1].is_list:
                raise node.fail("(not ...) takes exactly one atom")
            inner = node.value[1]
            if inner.head() in ("not", "and"):
                raise inner.fail("only negated atoms are supported")
            return Literal(self._atom(inner, scope), False)
        return Literal(self._atom(node, scope), True)

    def _atom(self, node: _Node, scope: Dict[str, str]) -> Atom:
        head = node.head()
        if head is None:
            raise node.fail("expected an atom")
        if head in _UNSUPPORTED_FORMULAS:
            raise node.fail(f"unsupported construct: {_UNSUPPORTED_FORMULAS[head]} ({head})")
        if head not in self.predicates:
            raise node.fail(f"undeclared predicate {head!r}")
        args = node.value[1:]
        decl = self.predicates[head]
        if len(args) != len(decl):
            raise node.fail(f"arity mismatch for {head}: expected {len(decl)}, got {len(args)}")
        names = []
        for arg, (_, kind) in zip(args, decl):
            if arg.is_list:
                raise arg.fail("nested terms are not supported")
            if not is_variable(arg.value):
                raise arg.fail(f"constant {arg.value!r} in a domain (constants are not supported)")
            if arg.value not in scope:
                raise arg.fail(f"undeclared variable {arg.value}")
            if not _subtype(self.types, scope[arg.value], kind):
                raise arg.fail(f"{arg.value} of type {scope[arg.value]} used where {kind} is expected")
            names.append(arg.value)
        return Atom(head, tuple(names))

    def _conjunction(self, node: _Node, scope: Dict[str, str]) -> List[Literal]:
        if not node.is_list:
            raise node.fail("expected a formula")
        if not node.value:
            return []
        if node.head() == "and":
            out = []
            for part in node.value[1:]:
                if part.head() == "and":
                    out.extend(self._conjunction(part, scope))
                else:
                    out.append(self._literal(part, scope))
            return out
        return [self._literal(node, scope)]

    def _effect(self, node: _Node, scope: Dict[str, str], quantified: Params,
                plain: List[Literal], conds: List[ConditionalEffect]) -> None:
        head = node.head()
        if not node.is_list:
            raise node.fail("expected an effect")
        if not node.value:
            return
        if head == "and":
            for part in node.value[1:]:
                self._effect(part, scope, quantified, plain, conds)
        elif head == "forall":
            if len(node.value) != 3:
                raise node.fail("(forall (vars) effect) expected")
            extra = self._params(node.value[1])
            inner_scope = dict(scope)
            for v, k in extra:
                if v in inner_scope:
                    raise node.value[1].fail(f"variable {v} shadows an outer variable")
                inner_scope[v] = k
            self._effect(node.value[2], inner_scope, quantified + extra, plain, conds)
        elif head == "when":
            if len(node.value) != 3:
                raise node.fail("(when condition effect) expected")
            cond = self._conjunction(node.value[1], scope)
            inner: List[Literal] = []
            nested: List[ConditionalEffect] = []
            self._effect(node.value[2], scope, (), inner, nested)
            if nested:
                raise node.fail("nested conditional effects are not supported")
            conds.append(ConditionalEffect(quantified, tuple(cond), tuple(inner)))
        else:
            lit = self._literal(node, scope)
            if quantified:
                conds.append(ConditionalEffect(quantified, (), (lit,)))
            else:
                plain.append(lit)


def _subtype(types: Sequence[Tuple[str, str]], kind: str, ancestor: str) -> bool:
    parents = dict(types)
    seen = set()
    while kind not in seen:
        if kind == ancestor or ancestor == "object":
            return True
        seen.add(kind)
        kind = parents.get(kind, "object")
    return False


def parse_domain(text: str) -> Domain:
    return _DomainBuilder(_read(text)).build()


def parse_problem(text: str, domain: Domain) -> Problem:
    root = _read(text)
    if root.head() != "define":
        raise root.fail("expected (define ...)")
    items = root.value[1:]
    if not items or items[0].head() != "problem" or len(items[0].value) != 2:
        raise root.fail("expected (problem <name>)")
    name = items[0].value[1].value
    domain_name = ""
    objects: List[Tuple[str, str]] = []
    init: List[Atom] = []
    goal: List[Literal] = []
    kinds: Dict[str, str] = {}

    def ground_atom(node: _Node) -> Atom:
        head = node.head()
        if head is None:
            raise node.fail("expected an atom")
        if head in _UNSUPPORTED_FORMULAS:
            raise node.fail(f"unsupported construct: {_UNSUPPORTED_FORMULAS[head]} ({head})")
        if head not in domain.predicate_params:
            raise node.fail(f"undeclared predicate {head!r}")
        decl = domain.predicate_params[head]
        args = node.value[1:]
        if len(args) != len(decl):
            raise node.fail(f"arity mismatch for {head}: expected {len(decl)}, got {len(args)}")
        for arg, (_, kind) in zip(args, decl):
            if arg.is_list:
                raise arg.fail("nested terms are not supported")
            if arg.value not in kinds:
                raise arg.fail(f"unknown object {arg.value!r}")
            if not domain.is_subtype(kinds[arg.value], kind):
                raise arg.fail(f"object {arg.value} of type {kinds[arg.value]} used where {kind} is expected")
        return Atom(head, tuple(a.value for a in args))

    def goal_literal(node: _Node) -> Literal:
        if node.head() == "not":
            if len(node.value) != 2:
                raise node.fail("(not ...) takes exactly one atom")
            return Literal(ground_atom(node.value[1]), False)
        return Literal(ground_atom(node), True)

    for section in items[1:]:
        key = section.head()
        if key == ":domain":
            domain_name = section.value[1].value
            if domain_name != domain.name:
                raise section.fail(f"problem is for domain {domain_name!r}, not {domain.name!r}")
        elif key == ":requirements":
            for req in _symbols(section, "requirements")[1:]:
                if req.value not in SUPPORTED_REQUIREMENTS:
                    raise req.fail(f"unsupported requirement {req.value}")
        elif key == ":objects":
            for obj, kind, n in _typed_list(_symbols(section, "objects")[1:]):
                if kind not in domain.type_names():
                    raise n.fail(f"undeclared type {kind!r}")
                if obj in kinds:
                    raise n.fail(f"object {obj!r} declared twice")
                kinds[obj] = kind
                objects.append((obj, kind))
        elif key == ":init":
            for fact in section.value[1:]:
                if fact.head() == "not":
                    raise fact.fail("negative literals are not allowed in :init")
                init.append(ground_atom(fact))
        elif key == ":goal":
            if len(section.value) != 2:
                raise section.fail("(:goal formula) expected")
            body = section.value[1]
            if body.head() == "and":
                parts = body.value[1:]
            elif body.is_list and not body.value:
                parts = []
            else:
                parts = [body]
            for part in parts:
                goal.append(goal_literal(part))
        elif key in _UNSUPPORTED_SECTIONS:
            raise section.fail(f"unsupported construct: {_UNSUPPORTED_SECTIONS[key]} ({key})")
        else:
            raise section.fail(f"unknown problem section {key!r}")
    try:
        goal_formula = GoalFormula(tuple(goal))
    except ValueError as exc:
        raise root.fail(str(exc)) from None
    return Problem(name, domain_name or domain.name, tuple(objects), frozenset(init), goal_formula)


# --------------------------------------------------------------------------
# printing

def _fmt_atom(a: Atom) -> str:
    return "(" + " ".join((a.predicate,) + a.args) + ")"


def _fmt_lit(lit: Literal) -> str:
    return _fmt_atom(lit.atom) if lit.positive else f"(not {_fmt_atom(lit.atom)})"


def _fmt_params(params: Params) -> str:
    return " ".join(f"{v} - {k}" for v, k in params)


def _fmt_block(lits: Iterable[str], indent: str) -> List[str]:
    lits = list(lits)
    if not lits:
        return [f"{indent}(and )"]
    lines = [f"{indent}(and"]
    lines.extend(f"{indent}  {l}" for l in lits)
    lines[-1] += ")"
    return lines


def _fmt_cond_effect(ce: ConditionalEffect, indent: str) -> List[str]:
    cond = "(and " + " ".join(_fmt_lit(l) for l in ce.condition) + ")"
    effs = "(and " + " ".join(_fmt_lit(l) for l in ce.effects) + ")"
    if ce.quantified:
        return [
            f"{indent}(forall ({_fmt_params(ce.quantified)})",
            f"{indent}  (when {cond}",
            f"{indent}    {effs}))",
        ]
    return [f"{indent}(when {cond}", f"{indent}  {effs})"]


def render_schema(s: ActionSchema, indent: str = "  ") -> List[str]:
    lines = [f"{indent}(:action {s.name}", f"{indent}  :parameters ({_fmt_params(s.params)})"]
    lines.append(f"{indent}  :precondition")
    lines.extend(_fmt_block((_fmt_lit(l) for l in s.precondition), indent + "  "))
    lines.append(f"{indent}  :effect")
    body = [_fmt_lit(l) for l in s.effects]
    if not body and not s.cond_effects:
        lines.append(f"{indent}  (and )")
    else:
        lines.append(f"{indent}  (and")
        lines.extend(f"{indent}    {l}" for l in body)
        for ce in s.cond_effects:
            lines.extend(_fmt_cond_effect(ce, indent + "    "))
        lines[-1] += ")"
    lines[-1] += ")"
    return lines


def render_domain(d: Domain) -> str:
    lines = [f"(define (domain {d.name})"]
    if d.requirements:
        lines.append(f"  (:requirements {' '.join(d.requirements)})")
    if d.types:
        lines.append("  (:types " + " ".join(_typed_runs(d.types, object_default=True)) + ")")
    lines.append("  (:predicates")
    for name, params in d.predicates:
        lines.append(f"    ({name}{' ' + _fmt_params(params) if params else ''})")
    lines[-1] += ")"
    for s in d.schemas:
        lines.append("")
        lines.extend(render_schema(s))
    lines.append(")")
    return "\n".join(lines) + "\n"


def _typed_runs(pairs: Sequence[Tuple[str, str]], object_default: bool = False,
                per_line: int = 0) -> List[str]:
    runs: List[Tuple[str, List[str]]] = []
    for name, kind in pairs:
        if runs and runs[-1][0] == kind:
            runs[-1][1].append(name)
        else:
            runs.append((kind, [name]))
    out = []
    for kind, names in runs:
        suffix = "" if (object_default and kind == "object") else f" - {kind}"
        if per_line:
            chunks = [names[i:i + per_line] for i in range(0, len(names), per_line)]
            for chunk in chunks[:-1]:
                out.append(" ".join(chunk))
            out.append(" ".join(chunks[-1]) + suffix)
        else:
            out.append(" ".join(names) + suffix)
    return out


def render_problem(p: Problem) -> str:
    lines = [f"(define (problem {p.name})", f"  (:domain {p.domain_name})"]
    lines.append("  (:objects")
    lines.extend(f"    {run}" for run in _typed_runs(p.objects, per_line=10))
    lines[-1] += ")"
    lines.append("  (:init")
    lines.extend(f"    {_fmt_atom(a)}" for a in sorted(p.init))
    lines[-1] += ")"
    lines.append("  (:goal")
    lines.extend(_fmt_block((_fmt_lit(l) for l in p.goal), "    "))
    lines[-1] += ")"
    lines.append(")")
    return "\n".join(lines) + "\n"
