"""Reference model of the channel contract and a random operation driver.

The model is a plain dict of (ledger, {timestamp: value}) per stream; the
driver applies one random operation sequence to a real channel and to the
model and compares every result, including the exception class raised.
"""
import random

from conftest import S
from streamflow.errors import (
    DuplicateTimestamp,
    NotComputed,
    StreamExists,
    TimestampOutsideCover,
    UnknownStream,
)
from streamflow.stream import StreamInstance, make_stream_id
from streamflow.timeline import EMPTY, TimeInterval

IDS = [make_stream_id("a"), make_stream_id("b", [("house", "1")]), make_stream_id("b", [("house", "2")])]
GRID = 100


class Model:
    def __init__(self):
        self.streams = {}

    def create(self, sid):
        if sid in self.streams:
            raise StreamExists(str(sid))
        self.streams[sid] = (EMPTY, {})

    def write(self, sid, instances, cover):
        if sid not in self.streams:
            raise UnknownStream(str(sid))
        ledger, data = self.streams[sid]
        prev = None
        for t, _ in sorted(instances, key=lambda i: i[0]):
            if not cover.member(t):
                raise TimestampOutsideCover(str(t))
            if t == prev:
                raise DuplicateTimestamp(str(t))
            if t in data:
                raise DuplicateTimestamp(str(t))
            prev = t
        data = dict(data)
        data.update(dict(instances))
        self.streams[sid] = (ledger | cover, data)

    def read(self, sid, interval):
        if sid not in self.streams:
            raise UnknownStream(str(sid))
        ledger, data = self.streams[sid]
        if not ledger.contains(interval):
            raise NotComputed(sid, S((interval.start, interval.end)) - ledger)
        return [StreamInstance(t, data[t]) for t in sorted(data) if t in interval]

    def purge(self, sid):
        if sid not in self.streams:
            raise UnknownStream(str(sid))
        self.streams[sid] = (EMPTY, {})

    def ledger(self, sid):
        if sid not in self.streams:
            raise UnknownStream(str(sid))
        return self.streams[sid][0]


def _value(rng):
    return rng.choice([
        rng.uniform(-1e6, 1e6),
        rng.randint(-(2**63), 2**63 - 1),
        None,
        "séa ice",
        [1.5, [], {"k": True}],
        {"angle": rng.random(), "uid": "w1"},
    ])


def _cover(rng):
    pairs = []
    for _ in range(rng.randint(1, 3)):
        a = rng.randint(0, GRID - 1)
        pairs.append((a, min(GRID, a + rng.randint(1, 30))))
    return S(*pairs)


def random_op(rng, model):
    sid = rng.choice(IDS)
    r = rng.random()
    if r < 0.15:
        return ("create", sid)
    if r < 0.6:
        cover = _cover(rng)
        existing = model.streams.get(sid, (EMPTY, {}))[1]
        free = [t for t in range(1, GRID + 1) if cover.member(t) and t not in existing]
        ts = rng.sample(free, min(len(free), rng.randint(0, 6)))
        bad = rng.random()
        if bad < 0.08:
            ts.append(rng.randint(1, GRID))  # maybe outside cover or duplicate
        elif bad < 0.12 and existing:
            ts.append(rng.choice(sorted(existing)))
        return ("write", sid, [(t, _value(rng)) for t in ts], cover)
    if r < 0.85:
        a = rng.randint(0, GRID - 1)
        return ("read", sid, TimeInterval(a, rng.randint(a + 1, GRID)))
    if r < 0.93:
        return ("purge", sid)
    return ("reopen",)


def _apply(target, op):
    kind = op[0]
    if kind == "create":
        target.create(op[1]) if isinstance(target, Model) else target.create_stream(op[1])
        return None
    if kind == "write":
        target.write(op[1], op[2], op[3])
        return None
    if kind == "read":
        return target.read(op[1], op[2])
    if kind == "purge":
        target.purge(op[1])
        return None
    raise AssertionError(kind)


def _outcome(target, op):
    try:
        return ("ok", _apply(target, op))
    except Exception as exc:  # compared by class
        return ("error", type(exc).__name__)


def run_sequence(make_channel, seed, length=25):
    """Apply one random sequence; returns the list of mismatches (empty when conformant)."""
    rng = random.Random(seed)
    model = Model()
    channel = make_channel()
    mismatches = []
    try:
        for step in range(length):
            op = random_op(rng, model)
            if op[0] == "reopen":
                if channel.capabilities.persistent:
                    channel.close()
                    channel = make_channel()
                continue
            expected = _outcome(model, op)
            got = _outcome(channel, op)
            if expected != got:
                mismatches.append((seed, step, op, expected, got))
                break
        for sid in IDS:
            has = channel.has_stream(sid)
            if has != (sid in model.streams):
                mismatches.append((seed, "final", sid, "has_stream"))
            elif has and channel.get_record(sid).calculated_intervals != model.ledger(sid):
                mismatches.append((seed, "final", sid, "ledger"))
        listed = [r.id for r in channel.list_streams()]
        if listed != sorted(model.streams, key=str):
            mismatches.append((seed, "final", "list_streams"))
    finally:
        channel.close()
    return mismatches


# crash injection for the file channel

FAULT_STEPS = ("instances_appended", "instances_synced", "ledger_tmp_written", "ledger_replaced")


class Crash(BaseException):
    """Simulated process death: not an Exception, so no cleanup handler runs."""


def crash_scenario(root, seed):
    """Random committed writes, then one write killed at a random step.

    A crash before the instance fsync may also tear the unsynced tail.
    Returns a list of invariant violations after reopening the directory.
    """
    from streamflow.channels import FileChannel

    class Crashing(FileChannel):
        crash_at = None

        def _fault(self, step):
            if step == self.crash_at:
                raise Crash(step)

    rng = random.Random(seed)
    sid = rng.choice(IDS)
    ch = Crashing(root=root, durable=False)
    ch.create_stream(sid)
    model = Model()
    model.create(sid)
    for _ in range(rng.randint(0, 4)):
        op = random_op(rng, model)
        if op[0] == "write":
            op = ("write", sid, op[2], op[3])
            if _outcome(model, op)[0] == "ok":  # applied to the model on success
                ch.write(sid, op[2], op[3])
    cover = _cover(rng)
    data = model.streams[sid][1]
    free = [t for t in range(1, GRID + 1) if cover.member(t) and t not in data]
    batch = [(t, _value(rng)) for t in rng.sample(free, min(len(free), rng.randint(1, 6)))]
    step = rng.choice(FAULT_STEPS)
    ch.crash_at = step
    try:
        ch.write(sid, batch, cover)
    except Crash:
        pass
    if step == "instances_appended" and rng.random() < 0.5:
        path = root / str(sid) / "instances.jsonl"
        raw = path.read_bytes()
        path.write_bytes(raw[: len(raw) - rng.randint(1, 40)])
    if step == "ledger_replaced":
        model.write(sid, batch, cover)

    problems = []
    after = FileChannel(root=root, durable=False)
    ledger = after.get_record(sid).calculated_intervals
    if ledger != model.ledger(sid):
        problems.append((seed, step, "ledger", ledger, model.ledger(sid)))
    for part in ledger:
        if after.read(sid, part) != model.read(sid, part):
            problems.append((seed, step, "instances", part))
    after._load(sid)  # loading is lazy; force recovery before inspecting the file
    kept = (root / str(sid) / "instances.jsonl").read_text().splitlines()
    if len(kept) != len(model.streams[sid][1]):
        problems.append((seed, step, "orphan lines kept", len(kept)))
    return problems
