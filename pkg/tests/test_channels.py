import json
import threading

import pytest

from channel_contract import FAULT_STEPS, IDS, crash_scenario, run_sequence
from conftest import S, iv
from streamflow.channels import (
    AssetsChannel,
    ChannelSet,
    FileChannel,
    MemoryChannel,
    StoreChannel,
    ToolChannel,
    open_channels,
)
from streamflow.errors import (
    DuplicateTimestamp,
    NotComputed,
    StreamExists,
    TimestampOutsideCover,
    UnknownChannel,
    UnknownStream,
    Unsupported,
    ValueModelError,
)
from streamflow.stream import make_stream_id, provenance_for
from streamflow.tools import default_registry
from streamflow.channels.tool import ALWAYS

SID = make_stream_id("sea_ice")


def test_create_write_read(channel_factory):
    ch = channel_factory()
    ch.create_stream(SID)
    with pytest.raises(StreamExists):
        ch.create_stream(SID)
    ch.write(SID, [(5, [1.0]), (3, "x")], S((0, 10)))
    assert ch.read(SID, iv(0, 10)) == [(3, "x"), (5, [1.0])]
    assert ch.read(SID, iv(3, 5)) == [(5, [1.0])]
    assert ch.get_record(SID).calculated_intervals == S((0, 10))


def test_empty_write_marks_coverage(channel_factory):
    ch = channel_factory()
    ch.create_stream(SID)
    ch.write(SID, [], S((0, 10)))
    assert ch.read(SID, iv(2, 8)) == []


def test_contract_errors(channel_factory):
    ch = channel_factory()
    with pytest.raises(UnknownStream):
        ch.read(SID, iv(0, 1))
    ch.create_stream(SID)
    with pytest.raises(TimestampOutsideCover):
        ch.write(SID, [(11, 1)], S((0, 10)))
    with pytest.raises(TimestampOutsideCover):
        ch.write(SID, [(0, 1)], S((0, 10)))  # half-open: 0 is outside
    with pytest.raises(DuplicateTimestamp):
        ch.write(SID, [(1, 1), (1, 2)], S((0, 10)))
    ch.write(SID, [(1, 1)], S((0, 10)))
    with pytest.raises(DuplicateTimestamp):
        ch.write(SID, [(1, 2)], S((0, 20)))
    with pytest.raises(ValueModelError):
        ch.write(SID, [(2, float("nan"))], S((0, 20)))
    with pytest.raises(NotComputed) as err:
        ch.read(SID, iv(5, 15))
    assert err.value.missing == S((10, 15))
    # failed writes leave nothing behind
    assert ch.read(SID, iv(0, 10)) == [(1, 1)]
    assert ch.get_record(SID).calculated_intervals == S((0, 10))


def test_purge(channel_factory):
    ch = channel_factory()
    ch.create_stream(SID)
    ch.write(SID, [(1, 1)], S((0, 10)))
    ch.purge(SID)
    assert ch.get_record(SID).calculated_intervals == S()
    ch.write(SID, [(1, 2)], S((0, 10)))
    assert ch.read(SID, iv(0, 10)) == [(1, 2)]


def test_writer_provenance_kept(channel_factory):
    ch = channel_factory()
    ch.create_stream(SID)
    p = provenance_for("sum_list", "1.0.0", {})
    ch.write(SID, [], S((0, 1)), writer=p)
    assert ch.get_record(SID).writer == p
    if ch.capabilities.persistent:
        ch.close()
        assert channel_factory().get_record(SID).writer == p


def test_persistence_across_reopen(channel_factory):
    ch = channel_factory()
    for sid in IDS:
        ch.create_stream(sid)
        ch.write(sid, [(2, {"v": 1}), (7, None)], S((0, 5), (6, 9)))
    ch.close()
    again = channel_factory()
    if not again.capabilities.persistent:
        assert again.list_streams() == []
        return
    assert [r.id for r in again.list_streams()] == sorted(IDS, key=str)
    for sid in IDS:
        assert again.read(sid, iv(6, 9)) == [(7, None)]
        assert again.get_record(sid).calculated_intervals == S((0, 5), (6, 9))


@pytest.mark.parametrize("seed", range(40))
def test_random_sequences_match_model(channel_factory, tmp_path, seed):
    assert run_sequence(channel_factory, seed) == []


def test_concurrent_writers_to_distinct_streams(channel_factory):
    ch = channel_factory()
    sids = [make_stream_id("s", [("k", str(i))]) for i in range(4)]
    for sid in sids:
        ch.create_stream(sid)

    def work(sid):
        for j in range(25):
            ch.write(sid, [(j * 10 + 5, j)], S((j * 10, j * 10 + 10)))

    threads = [threading.Thread(target=work, args=(s,)) for s in sids]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    for sid in sids:
        assert len(ch.read(sid, iv(0, 250))) == 25


def test_file_layout(tmp_path):
    ch = FileChannel(root=tmp_path, durable=False)
    sid = make_stream_id("x", [("house", "1")])
    ch.create_stream(sid)
    ch.write(sid, [(1483228800000, 1.5)], S((0, 1483228800000)))
    d = tmp_path / "x(house=1)"
    assert (d / "instances.jsonl").read_text() == '{"timestamp":"2017-01-01T00:00:00.000Z","value":1.5}\n'
    ledger = json.loads((d / "ledger.json").read_text())
    assert ledger["calculated_intervals"] == [{"start": "1970-01-01T00:00:00.000Z", "end": "2017-01-01T00:00:00.000Z"}]


def test_file_torn_and_orphan_lines_discarded(tmp_path):
    ch = FileChannel(root=tmp_path, durable=False)
    ch.create_stream(SID)
    ch.write(SID, [(1, "a")], S((0, 5)))
    path = tmp_path / "sea_ice" / "instances.jsonl"
    with open(path, "a") as f:
        f.write('{"timestamp":"1970-01-01T00:00:00.007Z","value":"orphan"}\n{"timestamp":"1970-01-01T0')
    again = FileChannel(root=tmp_path, durable=False)
    assert again.read(SID, iv(0, 5)) == [(1, "a")]
    again.write(SID, [(7, "b")], S((5, 10)))
    assert again.read(SID, iv(0, 10)) == [(1, "a"), (7, "b")]
    assert FileChannel(root=tmp_path).read(SID, iv(0, 10)) == [(1, "a"), (7, "b")]


@pytest.mark.parametrize("seed", range(60))
def test_crash_never_leaves_coverage_without_instances(tmp_path, seed):
    assert crash_scenario(tmp_path, seed) == []


def test_crash_scenarios_cover_every_step(tmp_path):
    import random
    steps = {random.Random(seed).choice(FAULT_STEPS) for seed in range(60)}
    assert steps == set(FAULT_STEPS)


def test_failed_append_is_rolled_back(tmp_path):
    class Failing(FileChannel):
        def _fault(self, step):
            if step == "instances_synced":
                raise OSError("disk full")

    ch = Failing(root=tmp_path, durable=False)
    ch.create_stream(SID)
    with pytest.raises(OSError):
        ch.write(SID, [(1, "a")], S((0, 5)))
    assert (tmp_path / "sea_ice" / "instances.jsonl").read_text() == ""
    assert ch.get_record(SID).calculated_intervals == S()


def test_store_kv(tmp_path):
    st = StoreChannel(path=tmp_path / "s.sqlite")
    st.kv_put("meta_data/x", {"house": {"1": {}}})
    st.close()
    assert StoreChannel(path=tmp_path / "s.sqlite").kv_get("meta_data/x") == {"house": {"1": {}}}


def test_assets_channel_is_read_only(tmp_path):
    rw = FileChannel(root=tmp_path, durable=False)
    rw.create_stream(SID)
    rw.write(SID, [(1, 1)], S((0, 5)))
    assets = AssetsChannel(root=tmp_path)
    assert assets.read(SID, iv(0, 5)) == [(1, 1)]
    with pytest.raises(Unsupported):
        assets.write(SID, [], S((5, 6)))
    with pytest.raises(Unsupported):
        assets.purge(SID)


def test_tool_channel_lists_registry():
    reg = default_registry()
    ch = ToolChannel(registry=reg)
    names = [r.id.name for r in ch.list_streams()]
    assert "sum_list" in names and "splitter" in names
    rec = [r for r in ch.list_streams() if r.id.name == "sum_list"][0]
    assert rec.calculated_intervals == ALWAYS
    (doc,) = ch.read(rec.id, iv(-1, 1))
    assert doc.value["name"] == "sum_list"
    assert ch.resolve_tool("sum_list", "^1.0.0").name == "sum_list"
    with pytest.raises(Unsupported):
        ch.create_stream(make_stream_id("new"))


def test_channel_set(tmp_path):
    chans = open_channels({"scratch": {"type": "memory"}}, tmp_path)
    assert {"memory", "file", "store", "assets", "tools", "scratch"} <= set(chans)
    assert isinstance(chans["store"], StoreChannel)
    with pytest.raises(UnknownChannel):
        chans["nope"]
    with pytest.raises(UnknownChannel):
        open_channels({"x": {"type": "tape"}}, tmp_path)
    assert "tools" in ChannelSet([MemoryChannel()])
    chans.close()
