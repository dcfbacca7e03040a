"""First-order terms, literals, clauses and the leveled instantiation step.

Variables are clause-local de Bruijn ordinals: within a well-formed clause
they are numbered 0..n-1 by first occurrence (left-to-right over literals,
depth-first through arguments).  This makes alpha-equivalence structural
equality and makes fresh-variable generation a renumbering, with printable
names (X0, X1, ...) produced only at serialization time.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator, Union

FUNCTION = "function"
PREDICATE = "predicate"

# instances may be at most this deep (two instantiation passes)
MAX_LEVEL = 2


class MalformedAssignmentError(ValueError):
    """Head assignment does not cover the clause's variables or misuses symbols."""


@dataclass(frozen=True)
class Symbol:
    name: str
    arity: int
    kind: str  # FUNCTION or PREDICATE

    def __post_init__(self):
        if not self.name:
            raise ValueError("symbol name must be non-empty")
        if self.arity < 0:
            raise ValueError(f"negative arity for {self.name}")
        if self.kind not in (FUNCTION, PREDICATE):
            raise ValueError(f"bad symbol kind {self.kind!r}")

    @property
    def is_constant(self) -> bool:
        return self.kind == FUNCTION and self.arity == 0


@dataclass(frozen=True)
class Var:
    ordinal: int


@dataclass(frozen=True)
class App:
    head: Symbol
    args: tuple[Term, ...] = ()

    def __post_init__(self):
        if self.head.kind != FUNCTION:
            raise ValueError(f"{self.head.name} is not a function symbol")
        if len(self.args) != self.head.arity:
            raise ValueError(
                f"{self.head.name}/{self.head.arity} applied to {len(self.args)} args"
            )


Term = Union[Var, App]


@dataclass(frozen=True)
class Pred:
    head: Symbol
    args: tuple[Term, ...] = ()

    def __post_init__(self):
        if self.head.kind != PREDICATE:
            raise ValueError(f"{self.head.name} is not a predicate symbol")
        if len(self.args) != self.head.arity:
            raise ValueError(
                f"{self.head.name}/{self.head.arity} applied to {len(self.args)} args"
            )


@dataclass(frozen=True)
class Eq:
    left: Term
    right: Term


Atom = Union[Pred, Eq]


@dataclass(frozen=True)
class Literal:
    positive: bool
    atom: Atom

    def negated(self) -> Literal:
        return Literal(not self.positive, self.atom)


@dataclass(frozen=True)
class HeadAssignment:
    """One level's head-symbol choice per variable of one clause, in variable order."""

    clause_id: str
    heads: tuple[Symbol, ...]

    def __post_init__(self):
        for s in self.heads:
            if s.kind != FUNCTION:
                raise MalformedAssignmentError(f"{s.name} is not a function symbol")


class Stop:
    """Whole-clause skip marker a policy may return instead of an assignment."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "STOP"


STOP = Stop()

Proposal = Union[HeadAssignment, Stop]


@dataclass(frozen=True)
class Instance:
    """Provenance of a derived clause: one deepen step from `parent`."""

    parent: str
    level: int
    assignment: HeadAssignment

    def __post_init__(self):
        if not 1 <= self.level <= MAX_LEVEL:
            raise ValueError(f"instance level {self.level} outside 1..{MAX_LEVEL}")


@dataclass(frozen=True)
class Clause:
    id: str
    literals: tuple[Literal, ...]
    origin: Instance | None = None  # None means input clause

    @property
    def level(self) -> int:
        return 0 if self.origin is None else self.origin.level


@dataclass(frozen=True)
class Signature:
    functions: tuple[Symbol, ...]
    predicates: tuple[Symbol, ...]

    def __post_init__(self):
        names = [s.name for s in self.functions + self.predicates]
        if len(names) != len(set(names)):
            raise ValueError("duplicate symbol name in signature")

    def constants(self) -> tuple[Symbol, ...]:
        return tuple(s for s in self.functions if s.arity == 0)

    def function(self, name: str) -> Symbol | None:
        for s in self.functions:
            if s.name == name:
                return s
        return None


def _atom_terms(atom: Atom) -> tuple[Term, ...]:
    if isinstance(atom, Eq):
        return (atom.left, atom.right)
    return atom.args


def iter_terms(clause: Clause) -> Iterator[Term]:
    """All term positions of the clause, depth-first, in literal order."""
    for lit in clause.literals:
        stack = list(reversed(_atom_terms(lit.atom)))
        while stack:
            t = stack.pop()
            yield t
            if isinstance(t, App):
                stack.extend(reversed(t.args))


def variables_in_order(clause: Clause) -> list[int]:
    """Variable ordinals by first occurrence (the decoding order for policies)."""
    seen: dict[int, None] = {}
    for t in iter_terms(clause):
        if isinstance(t, Var):
            seen.setdefault(t.ordinal, None)
    return list(seen)


def is_ground(clause: Clause) -> bool:
    return not any(isinstance(t, Var) for t in iter_terms(clause))


def is_ground_term(term: Term) -> bool:
    if isinstance(term, Var):
        return False
    return all(is_ground_term(a) for a in term.args)


def _map_term(term: Term, subst: dict[int, Term]) -> Term:
    if isinstance(term, Var):
        return subst.get(term.ordinal, term)
    if not term.args:
        return term
    return App(term.head, tuple(_map_term(a, subst) for a in term.args))


def _map_literals(literals: tuple[Literal, ...], subst: dict[int, Term]) -> tuple[Literal, ...]:
    out = []
    for lit in literals:
        atom = lit.atom
        if isinstance(atom, Eq):
            new_atom: Atom = Eq(_map_term(atom.left, subst), _map_term(atom.right, subst))
        else:
            new_atom = Pred(atom.head, tuple(_map_term(a, subst) for a in atom.args))
        out.append(Literal(lit.positive, new_atom))
    return tuple(out)


def renumber(literals: tuple[Literal, ...]) -> tuple[Literal, ...]:
    """Renumber variables to 0..n-1 by first occurrence."""
    probe = Clause("_", literals)
    order = variables_in_order(probe)
    if order == list(range(len(order))):
        return literals
    mapping: dict[int, Term] = {v: Var(i) for i, v in enumerate(order)}
    return _map_literals(literals, mapping)


def deepen(clause: Clause, assignment: HeadAssignment, new_id: str) -> Clause:
    """Replace every variable by its assigned head symbol applied to fresh variables.

    The fresh variables are allocated past the clause's own ordinals, then the
    result is renumbered back to canonical 0..m-1 form, so the new ordinals
    list fresh variables in the order their parent variables occurred.
    """
    order = variables_in_order(clause)
    if len(assignment.heads) != len(order):
        raise MalformedAssignmentError(
            f"clause {clause.id}: assignment covers {len(assignment.heads)} of "
            f"{len(order)} variables"
        )
    if not order:
        # ground clause, empty assignment: identity (no instantiation happened)
        return clause
    subst: dict[int, Term] = {}
    next_fresh = max(order) + 1
    for v, head in zip(order, assignment.heads):
        fresh = tuple(Var(next_fresh + i) for i in range(head.arity))
        next_fresh += head.arity
        subst[v] = App(head, fresh)
    literals = renumber(_map_literals(clause.literals, subst))
    return Clause(new_id, literals, Instance(clause.id, clause.level + 1, assignment))


def canonical_key(clause: Clause) -> tuple:
    """Hashable key equal for clauses that differ only by variable renaming."""
    return tuple(_literal_key(lit) for lit in renumber(clause.literals))


def _term_key(t: Term) -> tuple:
    if isinstance(t, Var):
        return ("v", t.ordinal)
    return ("f", t.head.name, t.head.arity, tuple(_term_key(a) for a in t.args))


def _literal_key(lit: Literal) -> tuple:
    atom = lit.atom
    if isinstance(atom, Eq):
        return (lit.positive, "=", _term_key(atom.left), _term_key(atom.right))
    return (lit.positive, atom.head.name, tuple(_term_key(a) for a in atom.args))


def term_text(t: Term) -> str:
    """Canonical printed form of a term (used for ordering and display)."""
    if isinstance(t, Var):
        return f"X{t.ordinal}"
    if not t.args:
        return t.head.name
    return f"{t.head.name}({','.join(term_text(a) for a in t.args)})"


def literal_text(lit: Literal) -> str:
    atom = lit.atom
    if isinstance(atom, Eq):
        op = "=" if lit.positive else "!="
        return f"{term_text(atom.left)} {op} {term_text(atom.right)}"
    body = atom.head.name
    if atom.args:
        body += f"({','.join(term_text(a) for a in atom.args)})"
    return body if lit.positive else f"~{body}"


def clause_text(clause: Clause) -> str:
    return " | ".join(literal_text(lit) for lit in clause.literals)
