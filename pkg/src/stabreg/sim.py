"""Deterministic discrete-event simulator of the asynchronous system model.

n fully connected processors communicate over per-directed-edge bounded
message *sets* (capacity c, non-FIFO): each scheduler step lets one
processor perform a single send or receive.  Sends into a full link evict a
random message from the union; receives may return null even on nonempty
links; messages can be lost spontaneously; processors can crash (always a
minority).  Runs are byte-identical for identical (scenario, seed).
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, field, asdict
from typing import Optional

from .labels import Label, incomparable_family, random_label
from .protocol import (
    INITIAL_VALUE,
    QR_RESP,
    QW_REQ,
    BoundedReader,
    BoundedWriter,
    Message,
    OracleReader,
    OracleWriter,
    ProtocolParams,
    WRITER_ID,
)
from .timestamps import EpochsQueue, Timestamp, format_timestamp

CORRUPTION_MODES = ("none", "random", "near-wrap", "hidden-epoch")
PROTOCOLS = ("bounded", "oracle")

ABORT = "__abort__"


class ScenarioError(ValueError):
    """Invalid scenario configuration."""


@dataclass
class ScenarioConfig:
    n: int
    seed: int
    steps: int
    writes: int
    c: int = 1
    r: int = 64
    k_override: int = 0
    loss_prob: float = 0.0
    corruption: str = "none"
    protocol: str = "bounded"
    crashes: list[tuple[int, int]] = field(default_factory=list)  # (step, pid)
    read_retry_cap: int = 64
    read_backoff: int = 2

    def validate(self) -> None:
        if self.n < 3:
            raise ScenarioError("n must be >= 3")
        if self.c < 1:
            raise ScenarioError("c must be >= 1")
        if self.r < 1:
            raise ScenarioError("r must be >= 1")
        if self.steps < 1 or self.writes < 0:
            raise ScenarioError("steps must be >= 1 and writes >= 0")
        if not 0.0 <= self.loss_prob < 1.0:
            raise ScenarioError("loss_prob must be in [0, 1) to preserve fairness")
        if self.corruption not in CORRUPTION_MODES:
            raise ScenarioError(f"unknown corruption mode {self.corruption!r}")
        if self.protocol not in PROTOCOLS:
            raise ScenarioError(f"unknown protocol {self.protocol!r}")
        if len({pid for _s, pid in self.crashes}) >= (self.n + 1) // 2:
            raise ScenarioError(
                "crash schedule must keep a majority of processors alive"
            )
        for _step, pid in self.crashes:
            if not 0 <= pid < self.n:
                raise ScenarioError(f"crash of unknown processor {pid}")

    def protocol_params(self) -> ProtocolParams:
        return ProtocolParams(self.n, self.c, self.r, self.k_override or None)


REQUIRED_KEYS = ("n", "seed", "steps", "writes")

_KEY_TYPES = {
    "n": int, "seed": int, "steps": int, "writes": int, "c": int, "r": int,
    "k_override": int, "loss_prob": float, "corruption": str, "protocol": str,
    "crashes": str, "read_retry_cap": int, "read_backoff": int,
}


def parse_scenario(text: str) -> ScenarioConfig:
    """Parse the flat ``key = value`` scenario format."""
    raw: dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ScenarioError(f"line {lineno}: expected 'key = value'")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in _KEY_TYPES:
            raise ScenarioError(f"line {lineno}: unknown key {key!r}")
        raw[key] = value
    for key in REQUIRED_KEYS:
        if key not in raw:
            raise ScenarioError(f"missing required config key {key!r}")
    kwargs = {}
    for key, value in raw.items():
        if key == "crashes":
            kwargs[key] = _parse_crashes(value)
        else:
            try:
                kwargs[key] = _KEY_TYPES[key](value.strip('"'))
            except ValueError:
                raise ScenarioError(f"bad value for {key!r}: {value!r}") from None
    config = ScenarioConfig(**kwargs)
    config.validate()
    return config


def _parse_crashes(value: str) -> list[tuple[int, int]]:
    crashes = []
    for chunk in value.split(","):
        chunk = chunk.strip()
        if not chunk:
            continue
        try:
            pid, step = chunk.split("@")
            crashes.append((int(step), int(pid)))
        except ValueError:
            raise ScenarioError(f"bad crash entry {chunk!r}, want pid@step") from None
    return sorted(crashes)


def scenario_to_dict(config: ScenarioConfig) -> dict:
    d = asdict(config)
    d["crashes"] = [f"{pid}@{step}" for step, pid in config.crashes]
    return d


# ---------------------------------------------------------------------------


class Simulation:
    """One seeded run: owns all processor state, link sets, and the trace."""

    def __init__(self, config: ScenarioConfig, audit: bool = False):
        config.validate()
        self.config = config
        self.params = config.protocol_params()
        self.rng = random.Random(config.seed)
        self.step_count = 0
        self.events: list[dict] = []
        self.crashed: set[int] = set()
        self.audit = audit
        self._audit_ids: set[int] = set()
        self.pid_history: list[int] = []  # populated only under audit

        n = config.n
        self.links: dict[tuple[int, int], list[Message]] = {
            (i, j): [] for i in range(n) for j in range(n) if i != j
        }
        self.outboxes: list[list[Message]] = [[] for _ in range(n)]
        self._send_toggle = [False] * n
        self._schedule: list[int] = []

        self.procs = self._build_processors()
        self._corrupt_links()
        if audit:
            for box in self.links.values():
                self._audit_ids.update(id(m) for m in box)

        self.writes_done = 0
        self._write_counter = 0
        self._read_counters = [0] * n
        self._abort_streak = [0] * n
        self._reader_wait = [0] * n
        self.reads_aborted = 0
        self.reads_done = 0
        self.message_sends = 0
        self.dropped_messages = 0

        # oracle potential-function tracking
        self.g_violations: list[int] = []
        self.g_strict_violations: list[int] = []
        self._g_prev: Optional[int] = None

    # -- construction --------------------------------------------------

    def _record(self, pid: int, kind: str, op_id: str, value, ts=None):
        event = {"step": self.step_count, "proc": pid, "event": kind, "op_id": op_id}
        if kind == "read_response" and value == ABORT:
            event["abort"] = True
        elif value is not None:
            event["value"] = value
        if ts is not None:
            event["timestamp"] = ts
        self.events.append(event)

    def _build_processors(self):
        cfg, params, rng = self.config, self.params, self.rng
        rec = self._record
        if cfg.protocol == "oracle":
            procs = [OracleWriter(params, rec)]
            procs += [OracleReader(pid, params, rec) for pid in range(1, cfg.n)]
            if cfg.corruption != "none":
                for proc in procs:
                    proc.max_seq = rng.randint(0, 10 * cfg.writes + 10)
                    proc.value = f"corrupt#{proc.pid}"
            return procs

        lp = params.label_params
        initial = params.initial_timestamp()
        if cfg.corruption == "none":
            ml = {pid: initial for pid in range(cfg.n)}
            cl = {pid: None for pid in range(cfg.n)}
        elif cfg.corruption == "near-wrap":
            ml = {pid: Timestamp(initial.epoch, cfg.r) for pid in range(cfg.n)}
            cl = {pid: None for pid in range(cfg.n)}
        elif cfg.corruption == "hidden-epoch":
            ml = {pid: initial for pid in range(cfg.n)}
            cl = {pid: None for pid in range(cfg.n)}
        else:  # random
            ml = {
                pid: Timestamp(random_label(rng, lp), rng.randint(0, cfg.r))
                for pid in range(cfg.n)
            }
            cl = {
                pid: (
                    None
                    if rng.random() < 0.4
                    else Timestamp(random_label(rng, lp), rng.randint(0, cfg.r))
                )
                for pid in range(cfg.n)
            }
        values = {
            pid: INITIAL_VALUE if cfg.corruption in ("none", "hidden-epoch")
            else f"corrupt#{pid}"
            for pid in range(cfg.n)
        }

        epochs = EpochsQueue(params.queue_capacity)
        if cfg.corruption == "random":
            for _ in range(rng.randint(0, 4)):
                epochs.enqueue(random_label(rng, lp))
        writer = BoundedWriter(params, rec, ml=ml[WRITER_ID],
                               value=values[WRITER_ID], epochs=epochs)
        procs = [writer]
        procs += [
            BoundedReader(pid, params, rec, ml=ml[pid], cl=cl[pid], value=values[pid])
            for pid in range(1, cfg.n)
        ]
        return procs

    def _corrupt_links(self):
        cfg, rng = self.config, self.rng
        if cfg.protocol == "oracle" or cfg.corruption in ("none", "near-wrap"):
            return
        lp = self.params.label_params
        if cfg.corruption == "hidden-epoch":
            total_slots = len(self.links) * cfg.c
            # stings drawn from 1..k sit inside the writer's initial antisting
            # set, keeping the crafted labels incomparable to its epoch too
            family = incomparable_family(
                min(total_slots, lp.k), lp, rng, sting_pool=range(1, lp.k + 1)
            )
            idx = 0
            for (i, j), box in sorted(self.links.items()):
                for _ in range(cfg.c):
                    label = family[idx % len(family)]
                    idx += 1
                    ts = Timestamp(label, rng.randint(0, cfg.r))
                    box.append(
                        Message(QW_REQ, (i, 0), i, j, (ts, f"forged#{idx}"))
                    )
            return
        # random corruption: forged quorum traffic up to capacity
        for (i, j), box in sorted(self.links.items()):
            for slot in range(cfg.c):
                if rng.random() < 0.3:
                    continue
                ts = Timestamp(random_label(rng, lp), rng.randint(0, cfg.r))
                if rng.random() < 0.75:
                    box.append(
                        Message(QW_REQ, (i, 0), i, j, (ts, f"forged#{i}.{j}.{slot}"))
                    )
                else:
                    cl = None if rng.random() < 0.5 else Timestamp(
                        random_label(rng, lp), rng.randint(0, cfg.r)
                    )
                    box.append(
                        Message(QR_RESP, (i, 0), i, j, (ts, cl, f"forged#{i}.{j}.{slot}"))
                    )

    # -- scheduling ----------------------------------------------------

    def _next_proc(self) -> Optional[int]:
        # Round-based fairness floor: every non-crashed processor appears
        # once per shuffled round, so any window of 2 * n steps covers all.
        while True:
            if not self._schedule:
                alive = [p for p in range(self.config.n) if p not in self.crashed]
                if not alive:
                    return None
                self._schedule = alive[:]
                self.rng.shuffle(self._schedule)
            pid = self._schedule.pop()
            if pid not in self.crashed:
                return pid

    def _apply_crashes(self):
        for step, pid in self.config.crashes:
            if step <= self.step_count:
                self.crashed.add(pid)

    def _poll_client(self, pid: int):
        proc = self.procs[pid]
        if not proc.idle:
            return
        if pid == WRITER_ID:
            if self._write_counter < self.config.writes:
                self._write_counter += 1
                proc.start_write(f"v#{self._write_counter}", f"w{self._write_counter}")
        else:
            if self.writes_done >= self.config.writes:
                return  # run is winding down, no fresh reads
            if self._reader_wait[pid] > 0:
                self._reader_wait[pid] -= 1
                return
            self._read_counters[pid] += 1
            proc.start_read(f"p{pid}r{self._read_counters[pid]}")

    # -- the step relation ---------------------------------------------

    def step(self) -> None:
        self.step_count += 1
        self._apply_crashes()
        pid = self._next_proc()
        if pid is None:
            return
        if self.audit:
            self.pid_history.append(pid)
        self._poll_client(pid)
        proc = self.procs[pid]

        outbox = self.outboxes[pid]
        do_send = False
        if outbox or not proc.idle:
            self._send_toggle[pid] = not self._send_toggle[pid]
            do_send = self._send_toggle[pid]

        if do_send:
            msg = outbox.pop(0) if outbox else proc.next_send()
            if msg is not None:
                self._deliver_to_link(msg)
                return
        self._receive(pid, proc)

    def _deliver_to_link(self, msg: Message) -> None:
        self.message_sends += 1
        if self.audit:
            self._audit_ids.add(id(msg))
        if self.rng.random() < self.config.loss_prob:
            self.dropped_messages += 1
            return
        box = self.links[(msg.sender, msg.dest)]
        box.append(msg)
        if len(box) > self.config.c:
            # full link: evict a random message from the union
            box.pop(self.rng.randrange(len(box)))
            self.dropped_messages += 1

    def _receive(self, pid: int, proc) -> None:
        senders = [s for s in range(self.config.n) if s != pid]
        nonempty = [s for s in senders if self.links[(s, pid)]]
        # mostly drain nonempty links, but keep null receives possible
        if nonempty and self.rng.random() < 0.9:
            sender = self.rng.choice(nonempty)
        else:
            sender = self.rng.choice(senders)
        box = self.links[(sender, pid)]
        if not box:
            return  # null message
        msg = box.pop(self.rng.randrange(len(box)))
        replies = proc.on_message(msg)
        self.outboxes[pid].extend(replies)
        self._note_completions(pid)

    def _note_completions(self, pid: int) -> None:
        # track completed ops via events appended during this step
        for event in reversed(self.events):
            if event["step"] != self.step_count:
                break
            if event["event"] == "write_response":
                self.writes_done += 1
            elif event["event"] == "read_response":
                if event.get("abort"):
                    self.reads_aborted += 1
                    self._abort_streak[pid] += 1
                    backoff = self.config.read_backoff
                    if self._abort_streak[pid] >= self.config.read_retry_cap:
                        backoff *= 10
                        self._abort_streak[pid] = 0
                    self._reader_wait[pid] = backoff
                else:
                    self.reads_done += 1
                    self._abort_streak[pid] = 0

    # -- oracle potential function -------------------------------------

    def _oracle_g(self) -> int:
        writer_seq = self.procs[WRITER_ID].max_seq
        seqs: set[int] = set()
        for proc in self.procs:
            seqs.update(proc.held_seqs())
        for box in self.links.values():
            for msg in box:
                if msg.kind in (QW_REQ, QR_RESP):
                    seqs.add(msg.payload[0])
        for box in self.outboxes:
            for msg in box:
                if msg.kind in (QW_REQ, QR_RESP):
                    seqs.add(msg.payload[0])
        return sum(1 for s in seqs if s > writer_seq)

    def _check_oracle_g(self):
        g = self._oracle_g()
        writer = self.procs[WRITER_ID]
        if self._g_prev is not None and g > self._g_prev:
            self.g_violations.append(self.step_count)
        if writer.observed_larger:
            if self._g_prev is None or g >= self._g_prev:
                self.g_strict_violations.append(self.step_count)
            writer.observed_larger = False
        self._g_prev = g

    # -- run loop ------------------------------------------------------

    def run(self) -> dict:
        cfg = self.config
        oracle = cfg.protocol == "oracle"
        if oracle:
            self._g_prev = self._oracle_g()
        while self.step_count < cfg.steps:
            self.step()
            if oracle:
                self._check_oracle_g()
            if self.audit:
                self._check_audit()
            if self.writes_done >= cfg.writes and all(
                p.idle for i, p in enumerate(self.procs) if i not in self.crashed
            ):
                break
        return self.metrics()

    def _check_audit(self):
        for (i, j), box in self.links.items():
            assert len(box) <= self.config.c, f"capacity violated on link {(i, j)}"
            for msg in box:
                assert id(msg) in self._audit_ids, "fabricated message in link"

    def metrics(self) -> dict:
        phase_reqs = []
        phase_resps = []
        for proc in self.procs:
            for _kind, reqs, resps in proc.phase_log:
                phase_reqs.append(reqs)
                phase_resps.append(resps)
        writer = self.procs[WRITER_ID]
        return {
            "steps": self.step_count,
            "writes_completed": self.writes_done,
            "reads_completed": self.reads_done,
            "reads_aborted": self.reads_aborted,
            "message_sends": self.message_sends,
            "dropped_messages": self.dropped_messages,
            "epoch_changes": getattr(writer, "epoch_changes", 0),
            "max_phase_requests": max(phase_reqs, default=0),
            "max_phase_responses": max(phase_resps, default=0),
            "completed_phases": len(phase_reqs),
            "g_violations": self.g_violations,
            "g_strict_violations": self.g_strict_violations,
            "crashed": sorted(self.crashed),
        }


def run_scenario(config: ScenarioConfig, audit: bool = False):
    """Run one scenario; returns (trace_lines, metrics).

    The first trace line is a header embedding the resolved config; each
    following line is one invocation/response event.
    """
    sim = Simulation(config, audit=audit)
    metrics = sim.run()
    header = {"type": "header", "config": scenario_to_dict(config)}
    lines = [json.dumps(header, sort_keys=True)]
    lines += [json.dumps(e, sort_keys=True) for e in sim.events]
    return lines, metrics
