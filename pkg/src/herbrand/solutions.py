"""Line-delimited solution store: one self-contained JSON record per line.

Appends are whole-line writes so concurrent attempt workers can share one
store file; analysis reads the file front to back.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

from .fol import Clause, HeadAssignment, clause_text, deepen, is_ground, variables_in_order
from .tptp import Problem

STATUSES = ("unsat", "sat", "timeout", "skipped")


class StoreError(ValueError):
    pass


class ReplayError(ValueError):
    pass


@dataclass(frozen=True)
class InstanceRecord:
    """A ground instance: root input clause plus the per-level head choices."""

    parent: str
    levels: tuple[dict, ...]  # one {var_name: symbol_name} dict per deepen step
    ground_clause: str


@dataclass(frozen=True)
class SolutionRecord:
    problem: str
    status: str
    policy: str
    seed: int | None
    wall_time_s: float
    instances: tuple[InstanceRecord, ...] = ()
    reason: str | None = None

    def __post_init__(self):
        if self.status not in STATUSES:
            raise StoreError(f"unknown status {self.status!r}")
        if self.status != "unsat" and self.instances:
            raise StoreError(f"status {self.status} must not carry instances")


def record_to_dict(record: SolutionRecord) -> dict:
    d = {
        "problem": record.problem,
        "status": record.status,
        "policy": record.policy,
        "seed": record.seed,
        "wall_time_s": record.wall_time_s,
        "instances": [
            {"parent": i.parent, "levels": list(i.levels), "ground_clause": i.ground_clause}
            for i in record.instances
        ],
    }
    if record.reason is not None:
        d["reason"] = record.reason
    return d


def record_from_dict(d: dict) -> SolutionRecord:
    try:
        instances = tuple(
            InstanceRecord(i["parent"], tuple(i["levels"]), i["ground_clause"])
            for i in d["instances"]
        )
        return SolutionRecord(
            problem=d["problem"],
            status=d["status"],
            policy=d["policy"],
            seed=d["seed"],
            wall_time_s=d["wall_time_s"],
            instances=instances,
            reason=d.get("reason"),
        )
    except KeyError as e:
        raise StoreError(f"missing field {e}") from e


def write_solution(record: SolutionRecord) -> bytes:
    return (json.dumps(record_to_dict(record), ensure_ascii=False) + "\n").encode("utf-8")


def read_solution(data: bytes) -> SolutionRecord:
    try:
        return record_from_dict(json.loads(data.decode("utf-8")))
    except json.JSONDecodeError as e:
        raise StoreError(f"malformed record: {e}") from e


def append_record(path: str | Path, record: SolutionRecord) -> None:
    with open(path, "ab") as f:
        f.write(write_solution(record))


def read_store(path: str | Path) -> list[SolutionRecord]:
    records = []
    p = Path(path)
    if not p.exists():
        return records
    with open(p, "rb") as f:
        for idx, line in enumerate(f):
            if not line.strip():
                continue
            try:
                records.append(read_solution(line))
            except StoreError as e:
                raise StoreError(f"record {idx}: {e}") from e
    return records


def solved_problems(records: list[SolutionRecord]) -> set[str]:
    return {r.problem for r in records if r.status == "unsat"}


def replay_record(record: SolutionRecord, problem: Problem) -> list[Clause]:
    """Re-derive every instance via deepen; raises ReplayError on any mismatch."""
    out = []
    for k, inst in enumerate(record.instances):
        try:
            clause = problem.clause(inst.parent)
        except KeyError:
            raise ReplayError(f"instance {k}: unknown parent {inst.parent}") from None
        for step, level in enumerate(inst.levels):
            order = variables_in_order(clause)
            heads = []
            for v in order:
                name = level.get(f"X{v}")
                if name is None:
                    raise ReplayError(f"instance {k} level {step}: no head for X{v}")
                sym = problem.signature.function(name)
                if sym is None:
                    raise ReplayError(f"instance {k} level {step}: unknown symbol {name}")
                heads.append(sym)
            clause = deepen(clause, HeadAssignment(clause.id, tuple(heads)),
                            f"{inst.parent}#replay{k}.{step}")
        if not is_ground(clause):
            raise ReplayError(f"instance {k}: replay did not reach a ground clause")
        if clause_text(clause) != inst.ground_clause:
            raise ReplayError(
                f"instance {k}: replay produced {clause_text(clause)!r}, "
                f"record says {inst.ground_clause!r}"
            )
        out.append(clause)
    return out
