"""Ground relational logic shared by every other module.

Atoms are plain named tuples of symbols so that states (frozensets of atoms)
hash quickly; variables are symbols starting with ``?``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, FrozenSet, Iterable, Mapping, NamedTuple, Tuple, Union


class ContractError(ValueError):
    """A caller broke an operation's precondition."""


class SubstitutionError(KeyError):
    """A literal mentions a variable that the binding leaves unbound."""


@dataclass(frozen=True)
class Object:
    name: str
    kind: str = "object"


class Atom(NamedTuple):
    predicate: str
    args: Tuple[str, ...] = ()

    def __str__(self) -> str:
        if not self.args:
            return self.predicate
        return f"{self.predicate}({', '.join(self.args)})"

    @property
    def ground(self) -> bool:
        return not any(is_variable(a) for a in self.args)


class Literal(NamedTuple):
    atom: Atom
    positive: bool = True

    def __str__(self) -> str:
        return str(self.atom) if self.positive else f"¬{self.atom}"

    @property
    def ground(self) -> bool:
        return self.atom.ground

    def negate(self) -> "Literal":
        return Literal(self.atom, not self.positive)


State = FrozenSet[Atom]
Binding = Mapping[str, str]


def is_variable(symbol: str) -> bool:
    return symbol.startswith("?")


def atom(predicate: str, *args: str) -> Atom:
    return Atom(predicate, tuple(args))


def pos(predicate: str, *args: str) -> Literal:
    return Literal(Atom(predicate, tuple(args)), True)


def neg(predicate: str, *args: str) -> Literal:
    return Literal(Atom(predicate, tuple(args)), False)


def state(atoms: Iterable[Atom] = ()) -> State:
    return frozenset(atoms)


@dataclass(frozen=True)
class GoalFormula:
    """A conjunction of ground literals, kept in insertion order."""

    conjuncts: Tuple[Literal, ...]

    def __post_init__(self) -> None:
        seen: Dict[Atom, bool] = {}
        unique = []
        for lit in self.conjuncts:
            if seen.get(lit.atom, lit.positive) != lit.positive:
                raise ContractError(f"contradictory goal conjuncts on {lit.atom}")
            if lit.atom not in seen:
                unique.append(lit)
            seen[lit.atom] = lit.positive
        object.__setattr__(self, "conjuncts", tuple(unique))

    @classmethod
    def of(cls, literals: Iterable[Literal]) -> "GoalFormula":
        return cls(tuple(literals))

    def __iter__(self):
        return iter(self.conjuncts)

    def __len__(self) -> int:
        return len(self.conjuncts)

    def __contains__(self, lit: object) -> bool:
        return lit in self.conjuncts

    def __str__(self) -> str:
        return " ∧ ".join(str(c) for c in self.conjuncts) or "⊤"

    def as_set(self) -> FrozenSet[Literal]:
        return frozenset(self.conjuncts)


class Discrepancy(NamedTuple):
    """Expected-vs-observed difference: ``missing`` were expected but absent."""

    missing: FrozenSet[Atom] = frozenset()
    extra: FrozenSet[Atom] = frozenset()

    def __bool__(self) -> bool:
        return bool(self.missing or self.extra)


def holds(s: State, lit: Literal) -> bool:
    return (lit.atom in s) == lit.positive


def entails(s: State, goal: Union[GoalFormula, Iterable[Literal]]) -> bool:
    """Closed-world check that every conjunct of ``goal`` holds in ``s``."""
    for lit in goal:
        if not lit.ground:
            raise ContractError(f"goal conjunct {lit} is not ground")
        if (lit.atom in s) != lit.positive:
            return False
    return True


def diff_states(expected: State, observed: State) -> Discrepancy:
    return Discrepancy(frozenset(expected - observed), frozenset(observed - expected))


def substitute_atom(a: Atom, binding: Binding) -> Atom:
    try:
        return Atom(a.predicate, tuple(binding[x] if x[0] == "?" else x for x in a.args))
    except KeyError as exc:
        raise SubstitutionError(f"unbound variable {exc.args[0]} in {a}") from None


def substitute(lit: Literal, binding: Binding) -> Literal:
    """Ground ``lit`` under ``binding``; predicate and polarity are kept."""
    return Literal(substitute_atom(lit.atom, binding), lit.positive)
