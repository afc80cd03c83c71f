"""State-machine level tests with a perfect synchronous network."""

import pytest

from stabreg.labels import make_label
from stabreg.protocol import (
    INITIAL_VALUE,
    Message,
    BoundedReader,
    BoundedWriter,
    OracleReader,
    OracleWriter,
    ProtocolParams,
    QR_RESP,
    QW_REQ,
    WRITER_ID,
)
from stabreg.timestamps import Timestamp, precedes_e


def make_system(n=3, r=8, k_override=8, corruption=None):
    params = ProtocolParams(n, c=1, r=r, k_override=k_override)
    events = []

    def rec(pid, kind, op_id, value, ts=None):
        events.append((pid, kind, op_id, value))

    writer = BoundedWriter(params, rec)
    procs = [writer] + [BoundedReader(pid, params, rec) for pid in range(1, n)]
    return params, procs, events


def pump(procs, max_iters=10_000):
    """Deliver every outstanding request instantly until all procs go idle."""
    for _ in range(max_iters):
        for proc in procs:
            msg = proc.next_send()
            guard = 0
            while msg is not None:
                for reply in procs[msg.dest].on_message(msg):
                    procs[reply.dest].on_message(reply)
                msg = proc.next_send()
                guard += 1
                assert guard < 1000, "phase failed to make progress"
        if all(p.idle for p in procs):
            return
    raise AssertionError("system did not quiesce")


def test_derived_parameters():
    params = ProtocolParams(5, c=3, r=64)
    assert params.hidden_epoch_bound == 2 * 5 + 4 * 3 * 5 * 4
    assert params.k == 2 * params.hidden_epoch_bound
    assert params.queue_capacity == params.k
    assert params.quorum == 3
    init = params.initial_timestamp()
    assert init.seq == 0
    assert init.epoch == make_label(1, set(range(1, params.k + 1)))


def test_params_validation():
    with pytest.raises(ValueError):
        ProtocolParams(2)
    with pytest.raises(ValueError):
        ProtocolParams(3, c=0)


def test_clean_write_installs_on_all_replicas():
    params, procs, events = make_system()
    writer = procs[0]
    writer.start_write("v#1", "w1")
    pump(procs)
    assert (WRITER_ID, "write_response", "w1", None) in events
    assert writer.ml.seq == 1
    # the install is guaranteed on a majority, not necessarily everyone
    holders = [p for p in procs if p.value == "v#1"]
    assert len(holders) >= params.quorum
    for proc in holders:
        assert proc.ml == writer.ml


def test_seq_wrap_opens_fresh_epoch():
    params, procs, events = make_system(r=2)
    writer = procs[0]
    old_epoch = writer.ml.epoch
    for i in range(1, 4):  # third write exhausts seq bound 2
        writer.start_write(f"v#{i}", f"w{i}")
        pump(procs)
    assert writer.ml.seq == 0
    assert writer.ml.epoch != old_epoch
    assert writer.epoch_changes == 1
    assert precedes_e(Timestamp(old_epoch, params.r), writer.ml)


def test_writer_overtakes_corrupt_replica():
    params, procs, events = make_system()
    writer = procs[0]
    rogue = Timestamp(make_label(2, {1, 3, 4, 5, 6, 7, 8, 9}), 5)
    procs[1].ml = rogue
    procs[1].value = "corrupt#1"
    writer.start_write("v#1", "w1")
    pump(procs)
    assert precedes_e(rogue, writer.ml)
    assert sum(1 for p in procs if p.value == "v#1") >= params.quorum


def test_replica_adopts_newer_timestamp():
    params, procs, _ = make_system()
    replica = procs[1]
    newer = Timestamp(replica.ml.epoch, 3)
    replica.apply_quorum_write((newer, "fresh"))
    assert replica.ml == newer
    assert replica.cl is None
    assert replica.value == "fresh"


def test_replica_records_canceling_evidence():
    params, procs, _ = make_system()
    replica = procs[1]
    before = replica.ml
    # epoch incomparable with the replica's own: not adoptable, not dismissible
    stranger = Timestamp(make_label(3, {1, 3, 4, 5, 6, 7, 8, 9}), 0)
    replica.apply_quorum_write((stranger, "weird"))
    assert replica.ml == before
    assert replica.value == INITIAL_VALUE
    assert replica.cl == stranger


def test_canceling_evidence_blocks_adoption():
    params, procs, _ = make_system()
    replica = procs[1]
    stranger = Timestamp(make_label(3, {1, 3, 4, 5, 6, 7, 8, 9}), 0)
    replica.cl = stranger
    newer = Timestamp(replica.ml.epoch, 3)  # above ml but not above cl
    replica.apply_quorum_write((newer, "fresh"))
    assert replica.value == INITIAL_VALUE
    assert replica.cl == newer  # the attempt itself becomes the evidence


def test_strictly_old_timestamp_fully_ignored():
    params, procs, _ = make_system()
    replica = procs[1]
    replica.ml = Timestamp(replica.ml.epoch, 5)
    stale = Timestamp(replica.ml.epoch, 2)
    # same epoch: not below in the label order, so it lands in cl
    replica.apply_quorum_write((stale, "old"))
    assert replica.ml.seq == 5
    assert replica.value == INITIAL_VALUE


def test_read_returns_latest_written_value():
    params, procs, events = make_system()
    procs[0].start_write("v#1", "w1")
    pump(procs)
    procs[1].start_read("r1")
    pump(procs)
    assert (1, "read_response", "r1", "v#1") in events


def test_read_aborts_on_incomparable_views():
    params, procs, events = make_system(n=3)
    a = Timestamp(make_label(2, {1, 3, 4, 5, 6, 7, 8, 9}), 0)
    b = Timestamp(make_label(3, {1, 2, 4, 5, 6, 7, 8, 9}), 0)
    procs[1].ml, procs[1].value = a, "va"
    procs[2].ml, procs[2].value = b, "vb"
    procs[1].start_read("r1")
    # force the quorum to be exactly the two divided replicas
    resp = Message(QR_RESP, procs[1].phase.nonce, 2, 1, procs[2].snapshot())
    procs[1].on_message(resp)
    assert (1, "read_response", "r1", "__abort__") in events
    assert procs[1].idle


def test_read_writeback_never_downgrades_replica():
    params, procs, _ = make_system()
    reader = procs[1]
    reader.start_read("r1")
    low = Timestamp(reader.ml.epoch, 0)
    reader._writeback = (low, "stale")
    reader.phase = None
    reader.ml = Timestamp(reader.ml.epoch, 4)  # newer write arrived meanwhile
    reader.value = "newer"
    reader._begin_phase(QW_REQ, payload=(low, "stale"))
    reader.phase.responses = {0: True, 1: True}
    reader.on_quorum_write_done()
    assert reader.ml.seq == 4
    assert reader.value == "newer"


def test_stale_nonce_response_discarded():
    params, procs, _ = make_system()
    writer = procs[0]
    writer.start_write("v#1", "w1")
    bogus = Message(QR_RESP, (1, 999), 1, 0, procs[1].snapshot())
    assert writer.on_message(bogus) == []
    assert len(writer.phase.responses) == 1  # only the self response


def test_writer_as_member_banks_foreign_epoch():
    params, procs, _ = make_system()
    writer = procs[0]
    foreign = Timestamp(make_label(2, {1, 3, 4, 5, 6, 7, 8, 9}), 0)
    before = writer.ml
    replies = writer.on_message(Message(QW_REQ, (1, 1), 1, 0, (foreign, "x")))
    assert writer.ml == before  # the writer never adopts
    assert foreign.epoch in writer.epochs
    assert len(replies) == 1 and replies[0].kind == "QW_ACK"


def test_phase_log_counts_requests_and_responses():
    params, procs, _ = make_system(n=5)
    procs[0].start_write("v#1", "w1")
    pump(procs)
    assert len(procs[0].phase_log) == 2
    for kind, reqs, resps in procs[0].phase_log:
        assert reqs <= 2 * params.n
        assert resps <= 2 * params.n


def test_oracle_write_read_cycle():
    params = ProtocolParams(3, k_override=4)
    events = []
    rec = lambda pid, kind, op_id, value, ts=None: events.append(
        (pid, kind, op_id, value)
    )
    procs = [OracleWriter(params, rec)] + [
        OracleReader(pid, params, rec) for pid in (1, 2)
    ]
    procs[1].max_seq = 41  # corrupted high value
    procs[0].start_write("v#1", "w1")
    pump(procs)
    assert procs[0].observed_larger is True
    assert procs[0].max_seq == 42
    procs[2].start_read("r1")
    pump(procs)
    assert (2, "read_response", "r1", "v#1") in events
    assert procs[2].max_seq == 42
