"""Experiment orchestration: dataset splits, sweeps, the self-improvement loop,
coverage evaluation and reporting."""

from __future__ import annotations

import hashlib
import json
import random
import time
from dataclasses import dataclass, field
from pathlib import Path

from .engine import (
    NoConstantsError,
    PassConfig,
    PolicyInterface,
    PolicyProtocolError,
    RandomPolicy,
    two_pass_ground,
)
from .fol import STOP, Clause, HeadAssignment, clause_text, deepen, variables_in_order
from .ground import decide_ground, minimize_core
from .sat import Budget
from .solutions import (
    InstanceRecord,
    SolutionRecord,
    append_record,
    read_store,
    replay_record,
)
from .tptp import Problem
from .wire import PolicyTransportError

DEFAULT_BUDGET_S = 30.0  # ground-solver time limit per problem


def stable_hash(text: str) -> int:
    return int.from_bytes(hashlib.sha256(text.encode("utf-8")).digest()[:8], "big")


def attempt_seed(base_seed: int, run: int, problem_name: str) -> int:
    return stable_hash(f"{base_seed}:{run}:{problem_name}") % (2**31)


@dataclass(frozen=True)
class DatasetSplit:
    train: tuple[str, ...]
    dev: tuple[str, ...]
    test: tuple[str, ...]
    seed: int

    def part_of(self, family: str) -> str:
        if family in self.test:
            return "test"
        if family in self.dev:
            return "dev"
        return "train"


def _round_half_up(x: float) -> int:
    return int(x + 0.5)


def split_dataset(problems: list[Problem], seed: int) -> DatasetSplit:
    """Family-granular 10% test split, then 5% of the remainder as dev."""
    families = sorted({p.family for p in problems})
    if len(families) < 3:
        raise ValueError(f"need at least 3 families, got {len(families)}")
    rng = random.Random(seed)
    rng.shuffle(families)
    n_test = max(1, _round_half_up(0.10 * len(families)))
    rest = families[n_test:]
    n_dev = max(1, _round_half_up(0.05 * len(rest)))
    return DatasetSplit(
        train=tuple(sorted(rest[n_dev:])),
        dev=tuple(sorted(rest[:n_dev])),
        test=tuple(sorted(families[:n_test])),
        seed=seed,
    )


def _instance_records(grounding, core_ids: frozenset[str]) -> tuple[InstanceRecord, ...]:
    out = []
    for clause in grounding.ground:
        if clause.id not in core_ids or clause.origin is None:
            continue
        root_id, chain = grounding.derivation(clause)
        cur = grounding.problem.clause(root_id)
        levels = []
        for step, assignment in enumerate(chain):
            order = variables_in_order(cur)
            levels.append({f"X{v}": assignment.heads[i].name for i, v in enumerate(order)})
            cur = deepen(cur, assignment, f"{root_id}#emit{step}")
        out.append(InstanceRecord(root_id, tuple(levels), clause_text(clause)))
    return tuple(out)


def run_attempt(problem: Problem, policy: PolicyInterface, config: PassConfig,
                budget_s: float = DEFAULT_BUDGET_S, policy_label: str = "random",
                seed: int | None = None) -> SolutionRecord:
    """Ground, decide, and on unsat minimize; failures become records, not raises."""
    t0 = time.perf_counter()

    def finish(status, instances=(), reason=None):
        return SolutionRecord(problem.name, status, policy_label, seed,
                              round(time.perf_counter() - t0, 6), tuple(instances),
                              reason)

    try:
        grounding = two_pass_ground(problem, policy, config)
    except NoConstantsError as e:
        return finish("skipped", reason=f"no-constants: {e}")
    except PolicyProtocolError as e:
        return finish("skipped", reason=f"policy-protocol: {e}")

    bound = (config.level0_samples + 1) * config.level1_samples
    for root, count in grounding.instances_per_input().items():
        if count > bound:
            raise AssertionError(
                f"{problem.name}: clause {root} produced {count} > {bound} instances"
            )

    verdict = decide_ground(grounding.ground, budget_s)
    if verdict.status == "timeout":
        return finish("timeout")
    if verdict.status == "sat":
        return finish("sat")
    assert verdict.core is not None
    mini = minimize_core(grounding.ground, verdict.core, budget_s)
    return finish("unsat", instances=_instance_records(grounding, mini.core))


def make_policy(kind: str, seed: int | None = None, endpoint: str | None = None):
    if kind == "random":
        return RandomPolicy(seed)
    if kind == "external":
        from .wire import ExternalPolicy
        if not endpoint:
            raise ValueError("external policy needs an endpoint")
        return ExternalPolicy(endpoint, seed=seed)
    raise ValueError(f"unknown policy kind {kind!r}")


@dataclass
class SweepReport:
    runs: int
    per_run_solved: list[int]
    cumulative_solved: list[int]
    solved: list[str]
    attempted: int

    def to_dict(self) -> dict:
        return {
            "runs": self.runs,
            "per_run_solved": self.per_run_solved,
            "cumulative_solved": self.cumulative_solved,
            "solved": self.solved,
            "attempted": self.attempted,
        }


def sweep(problems: list[Problem], runs: int, store_path: str | Path,
          base_seed: int = 0, policy_kind: str = "random",
          endpoint: str | None = None, config: PassConfig = PassConfig(),
          budget_s: float = DEFAULT_BUDGET_S, stop_after: int | None = None,
          policy_label: str | None = None) -> SweepReport:
    """Seeded passes over all problems; resumes from whatever the store holds.

    `stop_after` aborts after that many fresh attempts (used to exercise
    kill-and-resume behaviour).
    """
    store_path = Path(store_path)
    existing = read_store(store_path)
    done = {(r.problem, r.seed) for r in existing}
    label = policy_label or policy_kind
    attempts_made = 0
    problems = sorted(problems, key=lambda p: p.name)
    aborted = False
    for run in range(runs):
        for problem in problems:
            seed = attempt_seed(base_seed, run, problem.name)
            if (problem.name, seed) in done:
                continue
            if stop_after is not None and attempts_made >= stop_after:
                aborted = True
                break
            if policy_kind == "random":
                policy = RandomPolicy(seed)
            else:
                policy = make_policy(policy_kind, seed=seed, endpoint=endpoint)
            record = run_attempt(problem, policy, config, budget_s, label, seed)
            append_record(store_path, record)
            done.add((problem.name, seed))
            attempts_made += 1
        if aborted:
            break
    # report from the full store (covers resumed and fresh attempts alike)
    records = read_store(store_path)
    per_run, cumulative, union = [], [], set()
    for run in range(runs):
        solved = set()
        for problem in problems:
            seed = attempt_seed(base_seed, run, problem.name)
            for r in records:
                if r.problem == problem.name and r.seed == seed and r.status == "unsat":
                    solved.add(problem.name)
                    break
        per_run.append(len(solved))
        union |= solved
        cumulative.append(len(union))
    return SweepReport(runs, per_run, cumulative, sorted(union), attempts_made)


@dataclass
class LoopConfig:
    attempts_per_iter: int = 1000
    train_samples_per_iter: int = 1000
    eval_every: int = 10
    train_steps: int = 1
    samples: tuple[int, int] = (25, 5)
    budget_s: float = DEFAULT_BUDGET_S


@dataclass
class LoopState:
    iteration: int = 0
    solved: dict[str, int] = field(default_factory=dict)  # problem -> unsat records
    checkpoint: str = ""
    test_solved_history: list[list] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "iteration": self.iteration,
            "solved": self.solved,
            "checkpoint": self.checkpoint,
            "test_solved_history": self.test_solved_history,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "LoopState":
        return cls(d["iteration"], dict(d["solved"]), d.get("checkpoint", ""),
                   [list(x) for x in d.get("test_solved_history", [])])


def load_loop_state(path: str | Path) -> LoopState:
    p = Path(path)
    if not p.exists():
        return LoopState()
    return LoopState.from_dict(json.loads(p.read_text()))


def save_loop_state(state: LoopState, path: str | Path) -> None:
    Path(path).write_text(json.dumps(state.to_dict(), indent=1))


def self_improve_loop(problems: list[Problem], split: DatasetSplit, policy,
                      store_path: str | Path, state_path: str | Path,
                      config: LoopConfig, iterations: int, rng_seed: int = 0,
                      policy_label: str = "neural") -> LoopState:
    """Attempt / append / train iterations with periodic test-set evaluation.

    The policy object must expose propose() and train(); only proofs of
    train-split families are ever sent to train().
    """
    by_name = {p.name: p for p in problems}
    train_pool = sorted(p.name for p in problems if split.part_of(p.family) == "train")
    test_pool = sorted(p.name for p in problems if split.part_of(p.family) == "test")
    state = load_loop_state(state_path)
    pass_config = PassConfig(config.samples[0], config.samples[1],
                             grounding_pass_constants_only=False)
    train_log_path = Path(state_path).with_suffix(".trainlog")
    for _ in range(iterations):
        it = state.iteration + 1
        rng = random.Random(stable_hash(f"loop:{rng_seed}:{it}"))
        n = min(config.attempts_per_iter, len(train_pool))
        batch = rng.sample(train_pool, n)
        try:
            for name in batch:
                seed = attempt_seed(rng_seed, it, name)
                record = run_attempt(by_name[name], policy, pass_config,
                                     config.budget_s, policy_label, seed)
                append_record(store_path, record)
                if record.status == "unsat":
                    state.solved[name] = state.solved.get(name, 0) + 1
            # train on uniformly chosen previous proofs from train families
            proofs = [
                r for r in read_store(store_path)
                if r.status == "unsat"
                and r.problem in by_name
                and split.part_of(by_name[r.problem].family) == "train"
            ]
            if proofs and config.train_samples_per_iter > 0:
                k = min(config.train_samples_per_iter, len(proofs))
                chosen = [proofs[i] for i in sorted(rng.sample(range(len(proofs)), k))]
                policy.train(chosen, config.train_steps)
                with open(train_log_path, "a") as f:
                    f.write(json.dumps({
                        "iteration": it,
                        "problems": sorted({r.problem for r in chosen}),
                    }) + "\n")
            if config.eval_every and it % config.eval_every == 0:
                solved_now = []
                for name in test_pool:
                    seed = attempt_seed(rng_seed, -it, name)
                    record = run_attempt(by_name[name], policy, pass_config,
                                         config.budget_s, policy_label + ":eval", seed)
                    append_record(store_path, record)
                    if record.status == "unsat":
                        solved_now.append(name)
                        state.solved[name] = state.solved.get(name, 0) + 1
                state.test_solved_history.append([it, len(solved_now)])
        except PolicyTransportError:
            save_loop_state(state, state_path)
            raise
        state.iteration = it
        save_loop_state(state, state_path)
    return state


def restart_fresh_model(policy, state_path: str | Path) -> None:
    """Reinitialize the policy's model; all stored solutions are kept."""
    policy.reset()
    state = load_loop_state(state_path)
    state.checkpoint = f"{state.checkpoint}+restart@{state.iteration}"
    save_loop_state(state, state_path)


DEFAULT_GRID = (1, 2, 3, 5, 7, 10, 15, 20, 25)
QUANTILES = (0.1, 0.5, 0.9)


def _quantile(values: list[float], q: float) -> float:
    xs = sorted(values)
    if not xs:
        return float("nan")
    pos = q * (len(xs) - 1)
    lo = int(pos)
    hi = min(lo + 1, len(xs) - 1)
    frac = pos - lo
    return xs[lo] * (1 - frac) + xs[hi] * frac


def _needed_assignments(problem: Problem, record: SolutionRecord):
    """Reference head choices per level, plus the level-1 clauses of the proof."""
    needed0: dict[str, set[tuple[str, ...]]] = {}
    needed1: dict[str, set[tuple[str, ...]]] = {}
    mid_clauses: dict[str, Clause] = {}
    for k, inst in enumerate(record.instances):
        root = problem.clause(inst.parent)
        if len(inst.levels) == 2:
            order = variables_in_order(root)
            heads0 = tuple(inst.levels[0][f"X{v}"] for v in order)
            needed0.setdefault(root.id, set()).add(heads0)
            sym_heads = []
            for h in heads0:
                sym = problem.signature.function(h)
                if sym is None:
                    raise ValueError(f"record references unknown symbol {h!r}")
                sym_heads.append(sym)
            mid = deepen(root, HeadAssignment(root.id, tuple(sym_heads)),
                         f"{root.id}_ref{k}")
            # share one node per distinct level-1 clause of the same parent
            key_id = next(
                (cid for cid, c in mid_clauses.items()
                 if c.literals == mid.literals and c.origin.parent == root.id),
                None,
            )
            if key_id is None:
                mid_clauses[mid.id] = mid
                key_id = mid.id
            order1 = variables_in_order(mid_clauses[key_id])
            needed1.setdefault(key_id, set()).add(
                tuple(inst.levels[1][f"X{v}"] for v in order1))
        elif len(inst.levels) == 1:
            order = variables_in_order(root)
            needed1.setdefault(root.id, set()).add(
                tuple(inst.levels[0][f"X{v}"] for v in order))
    return needed0, needed1, list(mid_clauses.values())


def coverage_for_problem(problem: Problem, record: SolutionRecord,
                         policy: PolicyInterface, grid: tuple[int, ...],
                         constants_only_level1: bool = True) -> dict[int, list[float] | None]:
    """Fraction of the proof's assignments covered by k-sample proposals.

    Returns {level: per-grid fractions}, or None for a level with no
    reference assignments.  Prefix sampling makes each row non-decreasing.
    """
    needed0, needed1, mid_clauses = _needed_assignments(problem, record)
    max_k = max(grid)
    result: dict[int, list[float] | None] = {}

    def covered(needed: dict[str, set[tuple[str, ...]]],
                proposals: dict[str, list]) -> list[float] | None:
        total = sum(len(v) for v in needed.values())
        if total == 0:
            return None
        row = []
        for k in grid:
            hit = 0
            for cid, want in needed.items():
                got = set()
                for prop in proposals.get(cid, [])[:k]:
                    if prop is not STOP:
                        got.add(tuple(s.name for s in prop.heads))
                hit += len(want & got)
            row.append(hit / total)
        return row

    props0 = policy.propose(problem, 0, max_k) if needed0 else {}
    result[0] = covered(needed0, props0)

    if needed1:
        e2 = Problem(problem.name, problem.clauses + tuple(mid_clauses),
                     problem.signature, problem.family)
        props1 = policy.propose(e2, 1, max_k, constants_only=constants_only_level1)
        result[1] = covered(needed1, props1)
    else:
        result[1] = None
    return result


@dataclass
class CoverageTable:
    grid: tuple[int, ...]
    quantiles: tuple[float, ...]
    rows: dict  # (level, q) -> list of values per grid entry
    problems_per_level: dict[int, int]

    def render(self) -> str:
        width = 6
        head = "samples/clause".ljust(18) + "".join(str(k).rjust(width) for k in self.grid)
        lines = [head]
        for level in (0, 1):
            for q in self.quantiles:
                row = self.rows.get((level, q))
                label = f"level{level} q={q}".ljust(18)
                if row is None:
                    lines.append(label + "(no reference data)")
                else:
                    lines.append(label + "".join(f"{v:.2f}".rjust(width) for v in row))
        return "\n".join(lines)

    def to_dict(self) -> dict:
        return {
            "grid": list(self.grid),
            "quantiles": list(self.quantiles),
            "rows": {f"level{l}:q{q}": v for (l, q), v in self.rows.items()},
            "problems_per_level": {str(k): v for k, v in self.problems_per_level.items()},
        }


def coverage_eval(problems: list[Problem], records: list[SolutionRecord],
                  policy: PolicyInterface, grid: tuple[int, ...] = DEFAULT_GRID,
                  quantiles: tuple[float, ...] = QUANTILES,
                  constants_only_level1: bool = True,
                  choice_seed: int = 0) -> CoverageTable:
    """Table-style coverage quantiles across problems, one record per problem."""
    by_problem: dict[str, list[SolutionRecord]] = {}
    for r in records:
        if r.status == "unsat":
            by_problem.setdefault(r.problem, []).append(r)
    per_level: dict[int, list[list[float]]] = {0: [], 1: []}
    name_index = {p.name: p for p in problems}
    rng = random.Random(choice_seed)
    for name in sorted(by_problem):
        problem = name_index.get(name)
        if problem is None:
            continue
        record = rng.choice(by_problem[name])
        rows = coverage_for_problem(problem, record, policy, grid,
                                    constants_only_level1)
        for level in (0, 1):
            if rows[level] is not None:
                per_level[level].append(rows[level])
    out_rows = {}
    for level in (0, 1):
        series = per_level[level]
        for q in quantiles:
            if not series:
                out_rows[(level, q)] = None
            else:
                out_rows[(level, q)] = [
                    _quantile([row[i] for row in series], q) for i in range(len(grid))
                ]
    return CoverageTable(grid, quantiles, out_rows,
                         {0: len(per_level[0]), 1: len(per_level[1])})


def store_report(store_path: str | Path, problems: list[Problem] | None = None) -> dict:
    """Summary of a solution store: counts, instance stats, replay health."""
    records = read_store(store_path)
    by_status: dict[str, int] = {}
    for r in records:
        by_status[r.status] = by_status.get(r.status, 0) + 1
    solved = sorted({r.problem for r in records if r.status == "unsat"})
    instance_counts = [len(r.instances) for r in records if r.status == "unsat"]
    avg_instances = (sum(instance_counts) / len(instance_counts)) if instance_counts else 0.0
    cumulative = []
    seen: set[str] = set()
    for r in records:
        if r.status == "unsat":
            seen.add(r.problem)
        cumulative.append(len(seen))
    replay_failures = []
    if problems is not None:
        index = {p.name: p for p in problems}
        for i, r in enumerate(records):
            if r.status == "unsat" and r.problem in index:
                try:
                    replay_record(r, index[r.problem])
                except Exception as e:  # noqa: BLE001 - report, don't crash
                    replay_failures.append({"record": i, "error": str(e)})
    return {
        "records": len(records),
        "by_status": by_status,
        "solved_problems": solved,
        "avg_instances_per_solution": round(avg_instances, 3),
        "max_instances": max(instance_counts, default=0),
        "cumulative_solved_by_record": cumulative,
        "replay_failures": replay_failures,
    }


def write_report_files(report: dict, out_dir: str | Path,
                       sweep_report: SweepReport | None = None) -> list[Path]:
    """Emit machine-readable tables and a cumulative-curve plot."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    report_path = out / "report.json"
    payload = dict(report)
    if sweep_report is not None:
        payload["sweep"] = sweep_report.to_dict()
    report_path.write_text(json.dumps(payload, indent=1))
    written.append(report_path)

    curve = (sweep_report.cumulative_solved if sweep_report is not None
             else report["cumulative_solved_by_record"])
    if curve:
        import matplotlib
        matplotlib.use("Agg")
        import matplotlib.pyplot as plt
        fig, ax = plt.subplots(figsize=(5, 3.2))
        xs = list(range(1, len(curve) + 1))
        ax.step(xs, curve, where="post")
        ax.set_xlabel("run" if sweep_report is not None else "record")
        ax.set_ylabel("problems solved (cumulative)")
        ax.set_title("Cumulative solutions")
        fig.tight_layout()
        plot_path = out / "cumulative.png"
        fig.savefig(plot_path, dpi=120)
        plt.close(fig)
        written.append(plot_path)
    return written
