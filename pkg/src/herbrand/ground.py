"""Ground (un)satisfiability with equality: SAT abstraction + congruence closure.

Ground atoms are abstracted to propositional variables; the SAT core
enumerates models of the abstraction and each model is checked against the
equality properties by congruence closure.  Violations come back as blocking
clauses until either a model survives (sat) or the abstraction runs out of
models (unsat).  Unsat cores are extracted through per-clause selector
assumptions and can be shrunk to 1-minimality by deletion.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .congruence import CongruenceClosure
from .fol import App, Atom, Clause, Eq, Pred, Term, is_ground, term_text
from .sat import Budget, BudgetExceeded, CdclSolver


class NonGroundError(ValueError):
    pass


class AtomTable:
    """Bijection between normalized ground atoms and propositional variables."""

    def __init__(self):
        self.atoms: list[Atom] = []  # index i <-> variable i+1
        self.index: dict[tuple, int] = {}

    @staticmethod
    def normalize(atom: Atom) -> Atom:
        if isinstance(atom, Eq) and term_text(atom.left) > term_text(atom.right):
            return Eq(atom.right, atom.left)
        return atom

    @staticmethod
    def _key(atom: Atom) -> tuple:
        if isinstance(atom, Eq):
            return ("=", term_text(atom.left), term_text(atom.right))
        return (atom.head.name, tuple(term_text(a) for a in atom.args))

    def var_of(self, atom: Atom) -> int:
        atom = self.normalize(atom)
        key = self._key(atom)
        var = self.index.get(key)
        if var is None:
            self.atoms.append(atom)
            var = len(self.atoms)
            self.index[key] = var
        return var

    def atom_of(self, var: int) -> Atom:
        return self.atoms[var - 1]

    def __len__(self) -> int:
        return len(self.atoms)


def abstract(clauses: list[Clause]) -> tuple[list[list[int]], AtomTable]:
    """Propositional CNF of ground clauses; polarity preserved, atoms shared."""
    table = AtomTable()
    cnf = []
    for c in clauses:
        if not is_ground(c):
            raise NonGroundError(f"clause {c.id} is not ground")
        cnf.append([
            (1 if lit.positive else -1) * table.var_of(lit.atom)
            for lit in c.literals
        ])
    return cnf, table


@dataclass
class CheckResult:
    consistent: bool
    blocking: list[int] | None = None
    classes: list[list[str]] | None = None
    merges: int = 0


def congruence_check(model: dict[int, bool], table: AtomTable) -> CheckResult:
    """Check a total propositional model against the equality properties.

    Conflicts yield a blocking clause that is entailed by the equality axioms
    and falsified by `model`; explanations from the proof forest keep it small.
    """
    cc = CongruenceClosure()
    term_id: dict[int, tuple] = {}  # atom var -> interned ids of its terms

    def intern(t: Term) -> int:
        return cc.add_term(t)

    for i, atom in enumerate(table.atoms):
        var = i + 1
        if isinstance(atom, Eq):
            term_id[var] = (intern(atom.left), intern(atom.right))
        else:
            term_id[var] = tuple(intern(a) for a in atom.args)
    for i, atom in enumerate(table.atoms):
        var = i + 1
        if isinstance(atom, Eq) and model[var]:
            left, right = term_id[var]
            cc.merge(left, right, var)

    # (a) reflexivity and (b) falsified equalities joined by the closure
    for i, atom in enumerate(table.atoms):
        var = i + 1
        if not isinstance(atom, Eq) or model[var]:
            continue
        left, right = term_id[var]
        if left == right:
            return CheckResult(False, blocking=[var], merges=cc.merges)
        if cc.are_equal(left, right):
            tags = cc.explain(left, right)
            blocking = sorted(-t for t in tags) + [var]
            return CheckResult(False, blocking=blocking, merges=cc.merges)

    # (c) congruent predicate atoms with opposite truth values
    groups: dict[tuple, list[int]] = {}
    for i, atom in enumerate(table.atoms):
        var = i + 1
        if isinstance(atom, Eq):
            continue
        key = (atom.head.name,) + tuple(cc.find(t) for t in term_id[var])
        groups.setdefault(key, []).append(var)
    for key, members in groups.items():
        true_var = next((v for v in members if model[v]), None)
        false_var = next((v for v in members if not model[v]), None)
        if true_var is None or false_var is None:
            continue
        tags: set = set()
        for a, b in zip(term_id[true_var], term_id[false_var]):
            tags |= cc.explain(a, b)
        blocking = sorted(-t for t in tags) + [-true_var, false_var]
        return CheckResult(False, blocking=blocking, merges=cc.merges)

    names = {}
    def render(tid: int) -> str:
        if tid not in names:
            head, args = cc.term_of[tid]
            names[tid] = head if not args else f"{head}({','.join(render(a) for a in args)})"
        return names[tid]

    classes = [sorted(render(t) for t in members)
               for members in cc.classes().values() if len(members) > 0]
    return CheckResult(True, classes=sorted(classes), merges=cc.merges)


@dataclass
class GroundStats:
    models_enumerated: int = 0
    blocking_clauses: int = 0
    cc_merges: int = 0
    sat_conflicts: int = 0
    sat_decisions: int = 0


@dataclass
class GroundVerdict:
    status: str  # "unsat" | "sat" | "timeout"
    core: frozenset[str] | None = None
    model: dict[int, bool] | None = None
    classes: list[list[str]] | None = None
    stats: GroundStats = field(default_factory=GroundStats)


def decide_ground(clauses: list[Clause], budget_s: float | None = 30.0,
                  budget: Budget | None = None) -> GroundVerdict:
    """Decide a set of ground clauses with equality; default budget 30 s."""
    budget = budget or Budget(budget_s)
    stats = GroundStats()
    if not clauses:
        return GroundVerdict("sat", model={}, classes=[], stats=stats)
    cnf, table = abstract(clauses)
    n_atoms = len(table)
    solver = CdclSolver(n_atoms)
    selectors: dict[int, str] = {}
    assumptions = []
    for lits, clause in zip(cnf, clauses):
        sel = solver.new_var()
        selectors[sel] = clause.id
        solver.add_clause([-sel] + lits)
        assumptions.append(sel)
    try:
        while True:
            res = solver.solve(tuple(assumptions), budget)
            stats.sat_conflicts = solver.stats.conflicts
            stats.sat_decisions = solver.stats.decisions
            if not res.is_sat:
                core = frozenset(
                    selectors[l] for l in res.failed_assumptions if l in selectors
                )
                if not res.failed_assumptions:
                    # unsat from blocking clauses alone cannot happen: they are
                    # entailed by equality axioms, so the instances are to blame
                    core = frozenset(selectors.values())
                return GroundVerdict("unsat", core=core, stats=stats)
            stats.models_enumerated += 1
            assert res.model is not None
            atom_model = {v: res.model[v] for v in range(1, n_atoms + 1)}
            check = congruence_check(atom_model, table)
            stats.cc_merges += check.merges
            if check.consistent:
                return GroundVerdict("sat", model=atom_model,
                                     classes=check.classes, stats=stats)
            assert check.blocking
            solver.add_clause(check.blocking)
            stats.blocking_clauses += 1
            budget.check()
    except BudgetExceeded:
        return GroundVerdict("timeout", stats=stats)


@dataclass
class MinimizeResult:
    core: frozenset[str]
    complete: bool  # False when the budget ran out before 1-minimality


def minimize_core(clauses: list[Clause], core: frozenset[str],
                  budget_s: float | None = 30.0,
                  pinned: frozenset[str] = frozenset(),
                  budget: Budget | None = None) -> MinimizeResult:
    """Deletion-based shrink of an unsat core to 1-minimality within budget."""
    budget = budget or Budget(budget_s)
    by_id = {c.id: c for c in clauses}
    current = {cid for cid in core if cid in by_id}
    order = [c.id for c in clauses if c.id in current]
    complete = True
    for cid in order:
        if cid not in current or cid in pinned:
            continue
        if budget.expired():
            complete = False
            break
        trial = [by_id[i] for i in order if i in current and i != cid]
        verdict = decide_ground(trial, budget=budget)
        if verdict.status == "unsat":
            assert verdict.core is not None
            current = set(verdict.core)
        elif verdict.status == "timeout":
            complete = False
    return MinimizeResult(frozenset(current), complete)
