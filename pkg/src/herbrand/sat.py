"""Propositional SAT: a CDCL solver with watched literals, plus a DPLL fallback.

Literals are nonzero signed ints (variable v is 1-based; -v negates).  The
CDCL solver supports incremental clause addition and solving under
assumptions; on UNSAT under assumptions it reports the subset of assumptions
used, which the ground solver turns into clause cores via selector literals.
"""

from __future__ import annotations

import time
from dataclasses import dataclass


class BudgetExceeded(Exception):
    pass


class Budget:
    """Wall-clock budget shared across one solving task."""

    def __init__(self, seconds: float | None):
        self.deadline = None if seconds is None else time.monotonic() + seconds

    def check(self):
        if self.expired():
            raise BudgetExceeded()

    def expired(self) -> bool:
        return self.deadline is not None and time.monotonic() > self.deadline

    def remaining(self) -> float | None:
        if self.deadline is None:
            return None
        return max(0.0, self.deadline - time.monotonic())


@dataclass
class SatResult:
    status: str  # "sat" | "unsat"
    model: dict[int, bool] | None = None  # var -> value, total over solver vars
    failed_assumptions: frozenset[int] = frozenset()

    @property
    def is_sat(self) -> bool:
        return self.status == "sat"


@dataclass
class SatStats:
    conflicts: int = 0
    decisions: int = 0
    propagations: int = 0
    restarts: int = 0


_LUBY_BASE = 100


def _luby(i: int) -> int:
    # Luby restart sequence 1,1,2,1,1,2,4,... (1-based index)
    x = i - 1
    size, seq = 1, 0
    while size < x + 1:
        seq += 1
        size = 2 * size + 1
    while size - 1 != x:
        size = (size - 1) >> 1
        seq -= 1
        x = x % size
    return 1 << seq


class CdclSolver:
    """Conflict-driven clause learning with two watched literals and restarts."""

    def __init__(self, n_vars: int = 0):
        self.n_vars = 0
        self.watches: dict[int, list[list[int]]] = {}
        self.assign: list[int] = [0]  # per var: 0 unknown / 1 true / -1 false
        self.level: list[int] = [0]
        self.reason: list[list[int] | None] = [None]
        self.trail: list[int] = []
        self.trail_lim: list[int] = []
        self.activity: list[float] = [0.0]
        self.phase: list[bool] = [False]
        self.var_inc = 1.0
        self.qhead = 0
        self.ok = True  # False once the empty clause is derived
        self.stats = SatStats()
        for _ in range(n_vars):
            self.new_var()

    def new_var(self) -> int:
        self.n_vars += 1
        self.assign.append(0)
        self.level.append(0)
        self.reason.append(None)
        self.activity.append(0.0)
        self.phase.append(False)
        return self.n_vars

    def _ensure_vars(self, lits):
        need = max((abs(l) for l in lits), default=0)
        while self.n_vars < need:
            self.new_var()

    def value(self, lit: int) -> int:
        v = self.assign[abs(lit)]
        return v if lit > 0 else -v

    def decision_level(self) -> int:
        return len(self.trail_lim)

    def add_clause(self, lits) -> None:
        """Add a clause at decision level 0; duplicates and tautologies handled."""
        if self.trail_lim:
            raise RuntimeError("add_clause only at decision level 0")
        self._ensure_vars(lits)
        seen = set()
        out = []
        for l in lits:
            if -l in seen:
                return  # tautology
            if l in seen:
                continue
            if self.value(l) == 1:
                return  # satisfied at level 0
            if self.value(l) == -1:
                continue  # false at level 0, drop
            seen.add(l)
            out.append(l)
        if not out:
            self.ok = False
            return
        if len(out) == 1:
            if not self._enqueue(out[0], None) or self._propagate() is not None:
                self.ok = False
            return
        self._attach(out)

    def _attach(self, clause: list[int]) -> None:
        self.watches.setdefault(clause[0], []).append(clause)
        self.watches.setdefault(clause[1], []).append(clause)

    def _enqueue(self, lit: int, reason: list[int] | None) -> bool:
        v = self.value(lit)
        if v == 1:
            return True
        if v == -1:
            return False
        var = abs(lit)
        self.assign[var] = 1 if lit > 0 else -1
        self.level[var] = self.decision_level()
        self.reason[var] = reason
        self.phase[var] = lit > 0
        self.trail.append(lit)
        return True

    def _propagate(self) -> list[int] | None:
        """Unit propagation from the trail head; returns a conflicting clause."""
        while self.qhead < len(self.trail):
            lit = self.trail[self.qhead]
            self.qhead += 1
            self.stats.propagations += 1
            falsified = -lit
            watchlist = self.watches.get(falsified)
            if not watchlist:
                continue
            kept = []
            conflict = None
            for i, clause in enumerate(watchlist):
                if clause[0] == falsified:
                    clause[0], clause[1] = clause[1], clause[0]
                if self.value(clause[0]) == 1:
                    kept.append(clause)
                    continue
                moved = False
                for k in range(2, len(clause)):
                    if self.value(clause[k]) != -1:
                        clause[1], clause[k] = clause[k], clause[1]
                        self.watches.setdefault(clause[1], []).append(clause)
                        moved = True
                        break
                if moved:
                    continue
                kept.append(clause)
                if not self._enqueue(clause[0], clause):
                    kept.extend(watchlist[i + 1:])
                    conflict = clause
                    break
            self.watches[falsified] = kept
            if conflict is not None:
                self.qhead = len(self.trail)
                return conflict
        return None

    def _bump(self, var: int):
        self.activity[var] += self.var_inc
        if self.activity[var] > 1e100:
            for i in range(1, self.n_vars + 1):
                self.activity[i] *= 1e-100
            self.var_inc *= 1e-100

    def _analyze(self, conflict: list[int]) -> tuple[list[int], int]:
        """First-UIP conflict analysis; returns (learnt clause, backjump level).

        Relies on the invariant that a reason clause's first literal is the
        one it propagated.
        """
        learnt = [0]  # slot 0 for the asserting literal
        seen = [False] * (self.n_vars + 1)
        counter = 0
        lit = None  # literal whose reason we are expanding (None: the conflict)
        idx = len(self.trail) - 1
        cur_level = self.decision_level()
        reason = conflict
        while True:
            start = 0 if lit is None else 1  # skip the propagated literal
            for q in reason[start:]:
                var = abs(q)
                if not seen[var] and self.level[var] > 0:
                    seen[var] = True
                    self._bump(var)
                    if self.level[var] >= cur_level:
                        counter += 1
                    else:
                        learnt.append(q)
            while not seen[abs(self.trail[idx])]:
                idx -= 1
            p = self.trail[idx]
            seen[abs(p)] = False
            idx -= 1
            counter -= 1
            if counter == 0:
                learnt[0] = -p
                break
            lit = p
            reason = self.reason[abs(p)]
            assert reason is not None, "non-UIP literal must have a reason"
        # local minimization: drop literals whose whole reason is already there
        marked = {abs(l) for l in learnt}
        minimized = [learnt[0]]
        for l in learnt[1:]:
            r = self.reason[abs(l)]
            if r is not None and all(
                abs(q) in marked or self.level[abs(q)] == 0 for q in r[1:]
            ):
                continue
            minimized.append(l)
        learnt = minimized
        if len(learnt) == 1:
            return learnt, 0
        bt = max(self.level[abs(l)] for l in learnt[1:])
        for k in range(1, len(learnt)):
            if self.level[abs(learnt[k])] == bt:
                learnt[1], learnt[k] = learnt[k], learnt[1]
                break
        return learnt, bt

    def _cancel_until(self, target_level: int):
        if self.decision_level() <= target_level:
            return
        bound = self.trail_lim[target_level]
        for lit in reversed(self.trail[bound:]):
            var = abs(lit)
            self.assign[var] = 0
            self.reason[var] = None
        del self.trail[bound:]
        del self.trail_lim[target_level:]
        self.qhead = min(self.qhead, len(self.trail))

    def _decide(self) -> int | None:
        best, best_act = 0, -1.0
        for v in range(1, self.n_vars + 1):
            if self.assign[v] == 0 and self.activity[v] > best_act:
                best, best_act = v, self.activity[v]
        if best == 0:
            return None
        return best if self.phase[best] else -best

    def _analyze_final(self, p: int) -> frozenset[int]:
        """Assumption literals responsible for assumption p being false."""
        out = {p}
        seen = [False] * (self.n_vars + 1)
        seen[abs(p)] = True
        for tlit in reversed(self.trail):
            var = abs(tlit)
            if not seen[var]:
                continue
            r = self.reason[var]
            if r is None:
                if self.level[var] > 0:
                    out.add(tlit)  # decisions below free search are assumptions
            else:
                for q in r[1:]:
                    if self.level[abs(q)] > 0:
                        seen[abs(q)] = True
        return frozenset(out)

    def solve(self, assumptions: tuple[int, ...] = (),
              budget: Budget | None = None) -> SatResult:
        budget = budget or Budget(None)
        self._cancel_until(0)
        if not self.ok:
            return SatResult("unsat")
        self._ensure_vars(assumptions)
        if self._propagate() is not None:
            self.ok = False
            return SatResult("unsat")
        restart_idx = 1
        conflicts_until_restart = _LUBY_BASE * _luby(restart_idx)
        conflicts_here = 0
        loops = 0
        while True:
            loops += 1
            if loops % 256 == 0:
                budget.check()
            conflict = self._propagate()
            if conflict is not None:
                self.stats.conflicts += 1
                conflicts_here += 1
                if self.decision_level() == 0:
                    self.ok = False
                    return SatResult("unsat")
                learnt, bt = self._analyze(conflict)
                self._cancel_until(bt)
                if len(learnt) == 1:
                    self._cancel_until(0)
                    if not self._enqueue(learnt[0], None):
                        self.ok = False
                        return SatResult("unsat")
                else:
                    self._attach(learnt)
                    self._enqueue(learnt[0], learnt)
                self.var_inc /= 0.95
                if conflicts_here >= conflicts_until_restart:
                    restart_idx += 1
                    conflicts_until_restart += _LUBY_BASE * _luby(restart_idx)
                    self.stats.restarts += 1
                    self._cancel_until(0)
                continue
            if self.decision_level() < len(assumptions):
                # place the next assumption on its own decision level
                lit = assumptions[self.decision_level()]
                v = self.value(lit)
                if v == 1:
                    self.trail_lim.append(len(self.trail))  # vacuous level
                    continue
                if v == -1:
                    failed = self._analyze_final(lit)
                    self._cancel_until(0)
                    return SatResult(
                        "unsat",
                        failed_assumptions=failed & set(assumptions) | {lit},
                    )
                self.trail_lim.append(len(self.trail))
                self._enqueue(lit, None)
                continue
            lit = self._decide()
            if lit is None:
                model = {v: self.assign[v] == 1 for v in range(1, self.n_vars + 1)}
                self._cancel_until(0)
                return SatResult("sat", model=model)
            self.stats.decisions += 1
            self.trail_lim.append(len(self.trail))
            self._enqueue(lit, None)


def sat_solve(clauses, n_vars: int | None = None, assumptions: tuple[int, ...] = (),
              blocked=(), budget_s: float | None = None) -> SatResult:
    """One-shot CDCL solve over `clauses` plus extra `blocked` clauses."""
    solver = CdclSolver(n_vars or 0)
    for c in clauses:
        solver.add_clause(list(c))
    for c in blocked:
        solver.add_clause(list(c))
    return solver.solve(tuple(assumptions), Budget(budget_s))


def dpll_solve(clauses, n_vars: int | None = None,
               budget: Budget | None = None) -> SatResult:
    """Plain DPLL with unit propagation; verdict cross-check for the CDCL core."""
    budget = budget or Budget(None)
    if n_vars is None:
        n_vars = max((abs(l) for c in clauses for l in c), default=0)
    assign: dict[int, bool] = {}

    def simplify(cls: list[list[int]]) -> tuple[list[list[int]], bool]:
        changed = True
        while changed:
            changed = False
            new = []
            for c in cls:
                lits = []
                sat = False
                for l in c:
                    val = assign.get(abs(l))
                    if val is None:
                        lits.append(l)
                    elif val == (l > 0):
                        sat = True
                        break
                if sat:
                    continue
                if not lits:
                    return [], False
                if len(lits) == 1:
                    assign[abs(lits[0])] = lits[0] > 0
                    changed = True
                else:
                    new.append(lits)
            cls = new
        return cls, True

    def search(cls: list[list[int]]) -> bool:
        budget.check()
        cls, consistent = simplify(cls)
        if not consistent:
            return False
        if not cls:
            return True
        lit = cls[0][0]
        snapshot = dict(assign)
        for choice in (lit > 0, lit < 0):
            assign[abs(lit)] = choice
            if search(cls):
                return True
            assign.clear()
            assign.update(snapshot)
        return False

    if search([list(c) for c in clauses]):
        model = {v: assign.get(v, False) for v in range(1, n_vars + 1)}
        return SatResult("sat", model=model)
    return SatResult("unsat")
