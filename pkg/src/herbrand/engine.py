"""Two-pass leveled grounding over a head-symbol policy (random or external).

Pass 1 replaces each variable of each input clause by a sampled head symbol
with fresh variable arguments; pass 2 runs on the deduplicated union of the
pass-1 output and the originals and (for the random policy) grounds with
constants.  Only ground clauses survive, each carrying its derivation.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from typing import Protocol

from .fol import (
    STOP,
    Clause,
    HeadAssignment,
    MalformedAssignmentError,
    Proposal,
    Signature,
    canonical_key,
    deepen,
    is_ground,
    variables_in_order,
)
from .tptp import Problem


class NoConstantsError(Exception):
    """The grounding pass needs constants (or any functions) the signature lacks."""


class PolicyProtocolError(Exception):
    pass


@dataclass(frozen=True)
class PassConfig:
    level0_samples: int = 25
    level1_samples: int = 5
    grounding_pass_constants_only: bool = True

    def __post_init__(self):
        if self.level0_samples < 0 or self.level1_samples < 0:
            raise ValueError("sample counts must be non-negative")


class PolicyInterface(Protocol):
    def propose(self, problem: Problem, level: int, samples: int,
                constants_only: bool = False) -> dict[str, list[Proposal]]:
        """Per clause id, up to `samples` head assignments (or STOP markers)."""
        ...


def random_assignment(clause: Clause, signature: Signature, mode: str,
                      rng: random.Random) -> HeadAssignment:
    """Uniform head choice per variable; `mode` is any_function or constants_only."""
    order = variables_in_order(clause)
    if not order:
        return HeadAssignment(clause.id, ())
    if mode == "constants_only":
        pool = signature.constants()
        if not pool:
            raise NoConstantsError("signature has no constants to ground with")
    elif mode == "any_function":
        pool = signature.functions
        if not pool:
            raise NoConstantsError("signature has no function symbols to instantiate with")
    else:
        raise ValueError(f"unknown mode {mode!r}")
    heads = tuple(pool[rng.randrange(len(pool))] for _ in order)
    return HeadAssignment(clause.id, heads)


class RandomPolicy:
    """The baseline policy: uniform draws from the problem signature."""

    def __init__(self, seed: int | None = None):
        self.seed = seed
        self.rng = random.Random(seed)

    def propose(self, problem: Problem, level: int, samples: int,
                constants_only: bool = False) -> dict[str, list[Proposal]]:
        mode = "constants_only" if constants_only else "any_function"
        out: dict[str, list[Proposal]] = {}
        for clause in problem.clauses:
            if not variables_in_order(clause):
                continue
            out[clause.id] = [
                random_assignment(clause, problem.signature, mode, self.rng)
                for _ in range(samples)
            ]
        return out


def expand_pass(clauses: list[Clause], policy: PolicyInterface, level: int,
                samples: int, problem: Problem, used_ids: set[str],
                constants_only: bool = False) -> list[Clause]:
    """One instantiation pass; output deduplicated by alpha-equivalence."""
    targets = [c for c in clauses if variables_in_order(c)]
    if not targets or samples == 0:
        return []
    pass_problem = Problem(problem.name, tuple(clauses), problem.signature,
                           problem.family)
    proposals = policy.propose(pass_problem, level, samples, constants_only)
    out: list[Clause] = []
    seen: set = set()
    for clause in targets:
        per_clause = proposals.get(clause.id, [])
        if len(per_clause) > samples:
            raise PolicyProtocolError(
                f"clause {clause.id}: {len(per_clause)} proposals exceed cap {samples}"
            )
        counter = 0
        for prop in per_clause:
            if prop is STOP:
                continue
            assert isinstance(prop, HeadAssignment)
            if constants_only and any(s.arity != 0 for s in prop.heads):
                raise PolicyProtocolError(
                    f"clause {clause.id}: non-constant head in grounding pass"
                )
            try:
                inst = deepen(clause, prop, _fresh_id(clause.id, level + 1,
                                                      counter, used_ids))
            except MalformedAssignmentError as e:
                raise PolicyProtocolError(f"clause {clause.id}: {e}") from e
            key = canonical_key(inst)
            if key in seen:
                continue
            seen.add(key)
            used_ids.add(inst.id)
            counter += 1
            out.append(inst)
    return out


def _fresh_id(parent_id: str, level: int, counter: int, used: set[str]) -> str:
    cid = f"{parent_id}_L{level}_{counter}"
    while cid in used:
        counter += 1
        cid = f"{parent_id}_L{level}_{counter}"
    return cid


@dataclass
class GroundingResult:
    problem: Problem
    ground: list[Clause]  # the ground problem, deduplicated
    index: dict[str, Clause]  # every clause seen, by id (for provenance walks)

    def derivation(self, clause: Clause) -> tuple[str, list[HeadAssignment]]:
        """Root input clause id and the deepen chain leading to `clause`."""
        chain: list[HeadAssignment] = []
        cur = clause
        while cur.origin is not None:
            chain.append(cur.origin.assignment)
            cur = self.index[cur.origin.parent]
        chain.reverse()
        return cur.id, chain

    def instances_per_input(self) -> dict[str, int]:
        counts = {c.id: 0 for c in self.problem.clauses}
        for c in self.ground:
            if c.origin is not None:
                root, _ = self.derivation(c)
                counts[root] += 1
        return counts


def two_pass_ground(problem: Problem, policy: PolicyInterface,
                    config: PassConfig = PassConfig()) -> GroundingResult:
    """The leveled grounding procedure; per input clause the ground instances
    are bounded by (level0_samples + 1) * level1_samples."""
    used_ids = {c.id for c in problem.clauses}
    index = {c.id: c for c in problem.clauses}

    pass1 = expand_pass(list(problem.clauses), policy, 0, config.level0_samples,
                        problem, used_ids)
    for c in pass1:
        index[c.id] = c

    union: dict = {}
    for c in list(problem.clauses) + pass1:
        union.setdefault(canonical_key(c), c)
    union_clauses = list(union.values())

    pass2 = expand_pass(union_clauses, policy, 1, config.level1_samples,
                        problem, used_ids,
                        constants_only=config.grounding_pass_constants_only)
    for c in pass2:
        index[c.id] = c

    final: dict = dict(union)
    for c in pass2:
        final.setdefault(canonical_key(c), c)
    ground = [c for c in final.values() if is_ground(c)]
    return GroundingResult(problem, ground, index)
