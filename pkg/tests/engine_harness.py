"""Workflows exercising each built-in tool, plus snapshot and partition helpers."""
import random

from streamflow.channels import ChannelSet, FileChannel, MemoryChannel, StoreChannel
from streamflow.engine import Engine
from streamflow.stream import dumps
from streamflow.timeline import TimeInterval, TimeIntervalSet
from streamflow.workflow import WorkflowBuilder

SPAN = (0, 1000)


def write_inputs(root, seed=11):
    """Small CSVs with epoch-ms timestamps inside SPAN (and a little before it)."""
    rng = random.Random(seed)
    root.mkdir(parents=True, exist_ok=True)
    ts = sorted(rng.sample(range(-120, SPAN[1] + 1), 160))
    with open(root / "lists.csv", "w") as f:
        f.write("t,a,b,c\n")
        for t in ts:
            cells = [f"{rng.uniform(-50, 50):.4f}" if rng.random() < 0.7 else "" for _ in range(3)]
            f.write(f"{t},{','.join(cells)}\n")
    for house in ("1", "2"):
        with open(root / f"house_{house}.csv", "w") as f:
            f.write("t,uid,v\n")
            for t in sorted(rng.sample(range(-120, SPAN[1] + 1), 150)):
                uid = rng.choice(["a", "b", "c"] if house == "1" else ["a", "d"])
                v = f"{rng.uniform(-90, 90):.3f}" if rng.random() < 0.95 else ""
                f.write(f"{t},{uid},{v}\n")


def channels(tmp):
    return ChannelSet([
        MemoryChannel(),
        FileChannel(root=tmp / "streams", durable=False),
        StoreChannel(path=tmp / "store.sqlite", durable=False),
    ])


def _csv(b, sink, path, record=False, plate=None, channel="memory"):
    node = b.create_node(sink, plate=plate, channel=channel)
    b.create_factor("csv_import", {"path": path, "time_column": "t", "time_format": "epoch_ms",
                                   "as_record": record}, sink=node)
    return node


def tool_workflows() -> dict:
    """One workflow per built-in tool, keyed by tool name."""
    out = {}

    b = WorkflowBuilder("w_clock")
    b.create_factor("clock", {"stride": 7}, sink=b.create_node("ticks", channel="file"))
    out["clock"] = b.build()

    b = WorkflowBuilder("w_window")
    b.create_factor("sliding_window", {"width": 30, "stride": 11}, sink=b.create_node("windows", channel="store"))
    out["sliding_window"] = b.build()

    b = WorkflowBuilder("w_csv")
    _csv(b, "rows", "lists.csv", channel="file")
    out["csv_import"] = b.build()

    b = WorkflowBuilder("w_sum")
    rows = _csv(b, "rows", "lists.csv")
    b.create_factor("sum_list", sources=[rows], sink=b.create_node("sums", channel="store"))
    out["sum_list"] = b.build()

    b = WorkflowBuilder("w_component")
    rec = _csv(b, "recs", "house_1.csv", record=True)
    b.create_factor("component", {"field": "v"}, sources=[rec], sink=b.create_node("vs", channel="file"))
    out["component"] = b.build()

    b = WorkflowBuilder("w_apply")
    rec = _csv(b, "recs", "house_1.csv", record=True)
    short = b.create_node("short", channel="memory")
    long = b.create_node("long", channel="store")
    b.create_factor("sliding_apply", {"width": 50, "stride": 13, "field": "v", "aggregate": "sum"},
                    sources=[rec], sink=short)
    b.create_factor("sliding_apply", {"width": 120, "stride": 30, "aggregate": "mean"}, sources=[short], sink=long)
    out["sliding_apply"] = b.build()

    b = WorkflowBuilder("w_split")
    for h in ("1", "2"):
        b.meta_data.add("house", h)
    hp = b.create_plate("H", "house")
    wp = b.create_plate("W", "wearable", parent_plate=hp)
    raw = _csv(b, "raw", "house_{house}.csv", record=True, plate=hp)
    split = b.create_node("split", plate=wp, channel="file")
    smooth = b.create_node("smooth", plate=wp, channel="store")
    b.create_factor("splitter", {"key_field": "uid", "output_key": "wearable"}, sources=[raw], sink=split)
    b.create_factor("sliding_apply", {"width": 40, "stride": 20, "field": "v", "aggregate": "max"},
                    sources=[split], sink=smooth)
    out["splitter"] = b.build()
    return out


def snapshot(chans) -> dict:
    """Canonical text of every stream's ledger and instances in the writable channels."""
    out = {}
    for name in ("memory", "file", "store"):
        ch = chans[name]
        for rec in ch.list_streams():
            ledger = rec.calculated_intervals
            items = [ch.read(rec.id, iv) for iv in ledger]
            out[f"{name}:{rec.id}"] = dumps({"ledger": ledger.to_value(),
                                             "instances": [[t, v] for part in items for t, v in part]})
    return out


def random_partition(rng, span=SPAN, max_parts=5) -> list:
    k = rng.randint(1, max_parts)
    cuts = sorted(rng.sample(range(span[0] + 1, span[1]), k - 1))
    bounds = [span[0]] + cuts + [span[1]]
    return [TimeIntervalSet([TimeInterval(a, b)]) for a, b in zip(bounds, bounds[1:])]


def run_pieces(workflow, pieces, tmp, base_dir) -> dict:
    chans = channels(tmp)
    engine = Engine(chans, base_dir=base_dir)
    for piece in pieces:
        report = engine.run(workflow, piece)
        assert report.ok, [e.error for e in report.failures]
    snap = snapshot(chans)
    chans.close()
    return snap
