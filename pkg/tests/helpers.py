"""Shared test helpers: brute-force linearization and random trace fixtures.

The brute-force check enumerates linearizations respecting real-time order
and register semantics directly; it is deliberately independent of the
checker's write-index characterization so the two can cross-validate.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass

from stabreg.protocol import INITIAL_VALUE


@dataclass(frozen=True)
class Op:
    kind: str  # "write" | "read"
    value: str
    invoke: int
    response: int


def linearizable_swmr(ops: list[Op], initial: str = INITIAL_VALUE) -> bool:
    """Exhaustive search for a legal sequential ordering of the operations."""
    memo: dict[tuple[frozenset, str], bool] = {}

    def dfs(remaining: frozenset[Op], current: str) -> bool:
        if not remaining:
            return True
        key = (remaining, current)
        if key in memo:
            return memo[key]
        result = False
        for op in remaining:
            # op can go first only if no other remaining op precedes it
            if any(q.response < op.invoke for q in remaining if q is not op):
                continue
            if op.kind == "read":
                if op.value != current:
                    continue
                if dfs(remaining - {op}, current):
                    result = True
                    break
            else:
                if dfs(remaining - {op}, op.value):
                    result = True
                    break
        memo[key] = result
        return result

    return dfs(frozenset(ops), initial)


def make_trace_lines(ops_by_proc: dict[int, list[Op]]) -> list[str]:
    """Serialize per-processor operation streams into JSONL trace lines."""
    events = []
    counter = 0
    for proc, ops in ops_by_proc.items():
        for op in ops:
            counter += 1
            op_id = f"p{proc}op{counter}"
            if op.kind == "write":
                events.append((op.invoke, {"step": op.invoke, "proc": proc,
                                           "event": "write_invoke",
                                           "op_id": op_id, "value": op.value}))
                events.append((op.response, {"step": op.response, "proc": proc,
                                             "event": "write_response",
                                             "op_id": op_id}))
            else:
                events.append((op.invoke, {"step": op.invoke, "proc": proc,
                                           "event": "read_invoke",
                                           "op_id": op_id}))
                events.append((op.response, {"step": op.response, "proc": proc,
                                             "event": "read_response",
                                             "op_id": op_id, "value": op.value}))
    events.sort(key=lambda pair: pair[0])
    return [json.dumps(event) for _t, event in events]


def random_ops(seed: int, max_ops: int = 8) -> dict[int, list[Op]]:
    """Random SWMR history: sequential writer, two sequential readers.

    Read values are drawn from already-invoked writes, the initial value,
    and occasionally a deliberately bogus choice, so both linearizable and
    non-linearizable histories appear.
    """
    rng = random.Random(seed)
    n_writes = rng.randint(0, min(4, max_ops))
    n_reads = rng.randint(0, max_ops - n_writes)
    # interleave: per-proc streams of (kind, count)
    streams: dict[int, int] = {0: 2 * n_writes}
    reads_left = n_reads
    r1 = rng.randint(0, reads_left)
    streams[1] = 2 * r1
    streams[2] = 2 * (reads_left - r1)

    time = 0
    open_op: dict[int, int] = {}  # proc -> invoke time
    ops_by_proc: dict[int, list[Op]] = {0: [], 1: [], 2: []}
    write_values = []
    while any(streams.values()):
        proc = rng.choice([p for p, left in streams.items() if left > 0])
        streams[proc] -= 1
        time += 1
        if proc not in open_op:
            open_op[proc] = time
            if proc == 0:
                write_values.append(f"v#{len(write_values) + 1}")
        else:
            invoke = open_op.pop(proc)
            if proc == 0:
                ops_by_proc[0].append(Op("write", write_values[len(ops_by_proc[0])],
                                         invoke, time))
            else:
                choices = [INITIAL_VALUE] + write_values
                value = rng.choice(choices)
                ops_by_proc[proc].append(Op("read", value, invoke, time))
    return {p: ops for p, ops in ops_by_proc.items() if ops}


def all_ops(ops_by_proc: dict[int, list[Op]]) -> list[Op]:
    return [op for ops in ops_by_proc.values() for op in ops]
