"""Offline atomicity checking of single-writer register traces.

With one sequential writer and pairwise-distinct written values, a trace is
linearizable exactly when (a) every read returns a value that is not older
than the last write completed before the read began and was invoked before
the read ended, and (b) reads never invert the writer order across a
happens-before edge.  Both checks run over any suffix of the trace in
completed-operation order, which lets ``find_stabilization`` locate the
earliest point from which the system behaves like an atomic register.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Optional

from .protocol import INITIAL_VALUE


class TraceError(ValueError):
    """Structurally malformed trace."""


@dataclass
class Operation:
    op_id: str
    proc: int
    kind: str  # "write" | "read"
    invoke_pos: int
    invoke_step: int
    value: Optional[str] = None  # written value / returned value
    aborted: bool = False
    response_pos: Optional[int] = None
    response_step: Optional[int] = None
    widx: int = -1  # writer-order index for writes; mapping target for reads

    @property
    def completed(self) -> bool:
        return self.response_pos is not None


@dataclass
class Violation:
    rule: str
    op_ids: tuple[str, ...]
    detail: str

    def to_dict(self) -> dict:
        return {"rule": self.rule, "ops": list(self.op_ids), "detail": self.detail}


@dataclass
class Verdict:
    atomic_from: Optional[int]  # completed-op index; None = never
    violations: list[Violation]
    stats: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "atomic_from": self.atomic_from if self.atomic_from is not None else "never",
            "violations": [v.to_dict() for v in self.violations],
            "stats": self.stats,
        }


@dataclass
class Trace:
    config: dict
    operations: list[Operation]  # all, in invocation order

    @property
    def completed(self) -> list[Operation]:
        """Completed operations sorted by completion order."""
        return sorted(
            (op for op in self.operations if op.completed),
            key=lambda op: op.response_pos,
        )


def parse_trace(lines) -> Trace:
    """Parse JSONL trace lines, enforcing per-processor invoke/response alternation."""
    config: dict = {}
    ops: dict[str, Operation] = {}
    order: list[Operation] = []
    pending: dict[int, Operation] = {}
    write_count = 0
    for pos, line in enumerate(lines):
        line = line.strip()
        if not line:
            continue
        try:
            event = json.loads(line)
        except json.JSONDecodeError:
            raise TraceError(f"event {pos}: not valid JSON") from None
        if event.get("type") == "header":
            config = event.get("config", {})
            continue
        try:
            kind = event["event"]
            proc = event["proc"]
            step = event["step"]
            op_id = event["op_id"]
        except KeyError as exc:
            raise TraceError(f"event {pos}: missing field {exc}") from None
        if kind in ("write_invoke", "read_invoke"):
            if proc in pending:
                raise TraceError(
                    f"event {pos}: processor {proc} invoked {op_id} while "
                    f"{pending[proc].op_id} is outstanding"
                )
            op = Operation(op_id, proc, kind.split("_")[0], pos, step,
                           value=event.get("value"))
            if op.kind == "write":
                op.widx = write_count
                write_count += 1
            ops[op_id] = op
            order.append(op)
            pending[proc] = op
        elif kind in ("write_response", "read_response"):
            op = pending.pop(proc, None)
            if op is None or op.op_id != op_id:
                raise TraceError(
                    f"event {pos}: response {op_id} without matching invocation"
                )
            op.response_pos = pos
            op.response_step = step
            if kind == "read_response":
                op.aborted = bool(event.get("abort"))
                op.value = event.get("value")
        else:
            raise TraceError(f"event {pos}: unknown event kind {kind!r}")
    return Trace(config, order)


def _map_reads(trace: Trace) -> None:
    """Resolve each read's writer-order index from its returned value."""
    by_value = {op.value: op.widx for op in trace.operations if op.kind == "write"}
    for op in trace.operations:
        if op.kind == "read" and op.completed and not op.aborted:
            op.widx = by_value.get(op.value, -1)


def _checkable_reads(suffix: list[Operation]) -> list[Operation]:
    return [op for op in suffix if op.kind == "read" and not op.aborted]


def check_regularity(trace: Trace, suffix_start: int = 0) -> list[Violation]:
    """Reads must return the latest completed write's value, or newer.

    Values written before the suffix (or by nothing at all: the initial or a
    corrupted value) are tolerated only until the first in-suffix write
    completes before the read begins.
    """
    _map_reads(trace)
    completed = trace.completed
    suffix = completed[suffix_start:]
    write_by_widx = {
        op.widx: op for op in trace.operations if op.kind == "write"
    }
    suffix_writes = sorted(
        (op for op in suffix if op.kind == "write"), key=lambda op: op.response_pos
    )
    violations = []
    for read in _checkable_reads(suffix):
        latest = None
        for w in suffix_writes:
            if w.response_pos < read.invoke_pos:
                if latest is None or w.widx > latest.widx:
                    latest = w
            else:
                break
        if latest is not None and read.widx < latest.widx:
            violations.append(Violation(
                "regularity",
                (read.op_id, latest.op_id),
                f"read {read.op_id} returned {read.value!r} although write "
                f"{latest.op_id} completed before it",
            ))
            continue
        source = write_by_widx.get(read.widx) if read.widx >= 0 else None
        if source is not None and source.invoke_pos > read.response_pos:
            violations.append(Violation(
                "regularity",
                (read.op_id, source.op_id),
                f"read {read.op_id} returned a value written only later",
            ))
    return violations


def check_no_inversion(trace: Trace, suffix_start: int = 0) -> list[Violation]:
    """Across a happens-before edge, reads must not go back in writer order."""
    _map_reads(trace)
    reads = _checkable_reads(trace.completed[suffix_start:])
    by_response = sorted(reads, key=lambda op: op.response_pos)
    by_invoke = sorted(reads, key=lambda op: op.invoke_pos)
    violations = []
    best: Optional[Operation] = None  # completed read with max widx so far
    i = 0
    for read in by_invoke:
        while i < len(by_response) and by_response[i].response_pos < read.invoke_pos:
            prev = by_response[i]
            if best is None or prev.widx > best.widx:
                best = prev
            i += 1
        if best is not None and read.widx < best.widx:
            violations.append(Violation(
                "new-old-inversion",
                (best.op_id, read.op_id),
                f"read {read.op_id} returned older value than earlier read "
                f"{best.op_id}",
            ))
    return violations


def check_suffix(trace: Trace, suffix_start: int = 0) -> list[Violation]:
    return check_regularity(trace, suffix_start) + check_no_inversion(trace, suffix_start)


def find_stabilization(trace: Trace, metrics: Optional[dict] = None) -> Verdict:
    """Earliest completed-operation index whose suffix passes both checks."""
    completed = trace.completed
    full_violations = check_suffix(trace, 0)
    atomic_from: Optional[int] = None
    for start in range(0, max(len(completed) - 1, 1)):
        if len(completed) - start < 2:
            break
        if not check_suffix(trace, start):
            atomic_from = start
            break
    stats = {
        "completed_operations": len(completed),
        "writes_before_stabilization": (
            sum(1 for op in completed[:atomic_from] if op.kind == "write")
            if atomic_from is not None
            else None
        ),
        "aborted_reads": sum(
            1 for op in trace.operations if op.kind == "read" and op.aborted
        ),
        "initial_value": INITIAL_VALUE,
    }
    if metrics:
        stats["epoch_changes"] = metrics.get("epoch_changes")
    return Verdict(atomic_from, full_violations, stats)
