"""Directory-per-stream file channel.

Layout under ``root``::

    <canonical stream id>/instances.jsonl   one {"timestamp", "value"} object per line, append-only
    <canonical stream id>/ledger.json       {"id", "calculated_intervals", "writer", "instances_bytes"}

A write appends and syncs the instance lines before atomically replacing
the ledger, so a crash can leave uncommitted lines after the ledger's
``instances_bytes`` mark but never a ledger claiming instances that are
missing.  The uncommitted tail (orphan or torn lines) is cut off when the
stream is next loaded.
"""
from __future__ import annotations

import json
import logging
import os
import shutil
from pathlib import Path

from ..errors import ChannelError
from ..stream import Provenance, StreamId, StreamInstance, StreamRecord, dumps
from ..timeline import TimeIntervalSet, format_timestamp, parse_timestamp
from .base import Capabilities, Channel, insert_sorted, slice_sorted

log = logging.getLogger(__name__)

INSTANCES = "instances.jsonl"
LEDGER = "ledger.json"


def _fsync_dir(path: Path) -> None:
    try:
        fd = os.open(path, os.O_RDONLY)
    except OSError:
        return
    try:
        os.fsync(fd)
    except OSError:
        pass
    finally:
        os.close(fd)


def encode_instance(inst: StreamInstance) -> str:
    return dumps({"timestamp": format_timestamp(inst.timestamp), "value": inst.value})


class FileChannel(Channel):
    capabilities = Capabilities(persistent=True, supports_purge=True)

    def __init__(self, name: str = "file", root="streams", durable: bool = True):
        super().__init__(name)
        self.root = Path(root)
        self.durable = durable
        self.root.mkdir(parents=True, exist_ok=True)
        self._recs = {}
        self._sizes = {}  # StreamId -> committed length of instances.jsonl, None if unknown
        self._cache = {}  # StreamId -> (timestamps, values)
        self._scan()

    def _fault(self, step: str) -> None:
        """Test hook called between the steps of a write."""

    def _dir(self, stream_id: StreamId) -> Path:
        return self.root / str(stream_id)

    def _scan(self):
        for entry in sorted(self.root.iterdir()):
            ledger = entry / LEDGER
            if not ledger.is_file():
                continue
            try:
                data = json.loads(ledger.read_text("utf-8"))
                record = StreamRecord(
                    StreamId.from_value(data["id"]),
                    self.name,
                    TimeIntervalSet.from_value(data["calculated_intervals"]),
                    Provenance.from_value(data.get("writer")),
                )
            except (ValueError, KeyError, TypeError) as exc:
                raise ChannelError(f"{self.name}: corrupt ledger {ledger}: {exc}") from None
            self._recs[record.id] = record
            self._sizes[record.id] = data.get("instances_bytes")

    def _records(self):
        return self._recs

    def _load(self, stream_id: StreamId):
        cached = self._cache.get(stream_id)
        if cached is not None:
            return cached
        ledger = self._recs[stream_id].calculated_intervals
        path = self._dir(stream_id) / INSTANCES
        timestamps, values = [], {}
        if path.exists():
            raw = path.read_bytes()
            committed = self._sizes.get(stream_id)
            if committed is None:  # ledger written without a size mark
                committed = raw.rfind(b"\n") + 1
            dirty = len(raw) != committed
            kept = []
            for line in raw[:committed].decode("utf-8").splitlines():
                try:
                    obj = json.loads(line)
                    t = parse_timestamp(obj["timestamp"])
                    value = obj["value"]
                except (ValueError, KeyError, TypeError):
                    raise ChannelError(f"{self.name}: corrupt committed line in {path}") from None
                if not ledger.member(t) or t in values:
                    dirty = True
                    continue
                kept.append(StreamInstance(t, value))
                values[t] = value
            kept.sort(key=lambda i: i.timestamp)
            timestamps = [i.timestamp for i in kept]
            if dirty and self.capabilities.writable:
                log.warning("%s: discarding uncommitted instance lines for %s", self.name, stream_id)
                size = self._rewrite_instances(path, kept)
                self._sizes[stream_id] = size
                self._write_ledger(self._recs[stream_id])
        self._cache[stream_id] = (timestamps, values)
        return timestamps, values

    def _rewrite_instances(self, path: Path, instances) -> int:
        tmp = path.with_suffix(".tmp")
        data = "".join(encode_instance(inst) + "\n" for inst in instances).encode("utf-8")
        with open(tmp, "wb") as f:
            f.write(data)
            f.flush()
            if self.durable:
                os.fsync(f.fileno())
        os.replace(tmp, path)
        return len(data)

    def _timestamps(self, stream_id):
        return self._load(stream_id)[0]

    def _write_ledger(self, record: StreamRecord):
        path = self._dir(record.id) / LEDGER
        tmp = path.with_suffix(".tmp")
        payload = {
            "id": record.id.to_value(),
            "calculated_intervals": record.calculated_intervals.to_value(),
            "writer": record.writer.to_value() if record.writer else None,
            "instances_bytes": self._sizes.get(record.id, 0),
        }
        with open(tmp, "w", encoding="utf-8") as f:
            f.write(dumps(payload))
            f.flush()
            if self.durable:
                os.fsync(f.fileno())
        self._fault("ledger_tmp_written")
        os.replace(tmp, path)
        if self.durable:
            _fsync_dir(path.parent)

    def _store_new(self, record):
        d = self._dir(record.id)
        d.mkdir(parents=True, exist_ok=True)
        (d / INSTANCES).write_bytes(b"")
        self._sizes[record.id] = 0
        self._write_ledger(record)
        self._recs[record.id] = record
        self._cache[record.id] = ([], {})

    def _store_write(self, record, instances):
        timestamps, values = self._load(record.id)
        path = self._dir(record.id) / INSTANCES
        size = self._sizes.get(record.id, 0)
        if instances:
            data = "".join(encode_instance(i) + "\n" for i in instances).encode("utf-8")
            try:
                with open(path, "ab") as f:
                    f.write(data)
                    f.flush()
                    self._fault("instances_appended")
                    if self.durable:
                        os.fsync(f.fileno())
                self._fault("instances_synced")
            except Exception:
                self._truncate(path, size)
                raise
            size += len(data)
        old_size = self._sizes.get(record.id, 0)
        self._sizes[record.id] = size
        try:
            self._write_ledger(record)
        except Exception:
            self._sizes[record.id] = old_size
            self._truncate(path, old_size)
            raise
        self._fault("ledger_replaced")
        insert_sorted(timestamps, values, instances)
        self._recs[record.id] = record

    @staticmethod
    def _truncate(path: Path, size: int):
        try:
            with open(path, "r+b") as f:
                f.truncate(size)
        except OSError:
            pass  # orphans are dropped on the next load

    def _load_range(self, stream_id, interval):
        timestamps, values = self._load(stream_id)
        lo, hi = slice_sorted(timestamps, interval)
        return [StreamInstance(t, values[t]) for t in timestamps[lo:hi]]

    def _store_purge(self, record):
        # ledger first: a crash in between leaves orphans, not phantom coverage
        self._sizes[record.id] = 0
        self._write_ledger(record)
        with open(self._dir(record.id) / INSTANCES, "w", encoding="utf-8") as f:
            f.flush()
            if self.durable:
                os.fsync(f.fileno())
        self._recs[record.id] = record
        self._cache[record.id] = ([], {})

    def drop_stream(self, stream_id: StreamId) -> None:
        """Remove a stream entirely (not part of the channel contract)."""
        with self._lock:
            self.get_record(stream_id)
            shutil.rmtree(self._dir(stream_id))
            self._recs.pop(stream_id, None)
            self._sizes.pop(stream_id, None)
            self._cache.pop(stream_id, None)


class AssetsChannel(FileChannel):
    """Read-only file channel over a directory of prepared streams."""

    capabilities = Capabilities(persistent=True, supports_purge=False, writable=False)

    def __init__(self, name: str = "assets", root="assets"):
        super().__init__(name, root, durable=False)
