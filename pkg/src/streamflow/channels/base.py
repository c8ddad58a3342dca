from __future__ import annotations

import bisect
import threading
from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

from ..errors import (
    DuplicateTimestamp,
    NotComputed,
    StreamExists,
    TimestampOutsideCover,
    Unsupported,
    UnknownStream,
)
from ..stream import Provenance, StreamId, StreamInstance, StreamRecord, check_value, extend_ledger
from ..timeline import TimeInterval, TimeIntervalSet, difference


@dataclass(frozen=True)
class Capabilities:
    persistent: bool
    supports_purge: bool
    writable: bool = True


class Channel(ABC):
    """Where the computed ranges of streams live.

    Subclasses provide storage primitives (``_load_*``/``_store_*``); the
    contract checks (unknown streams, duplicate timestamps, cover rules,
    not-computed reads) live here so every backend behaves identically.
    One writer per stream at a time; the channel lock serialises writers.
    """

    capabilities = Capabilities(persistent=False, supports_purge=True)

    def __init__(self, name: str):
        self.name = name
        self._lock = threading.RLock()

    def __repr__(self):
        return f"{type(self).__name__}({self.name!r})"

    # storage primitives

    @abstractmethod
    def _records(self) -> dict:
        """Mapping StreamId -> StreamRecord for every stream in the channel."""

    @abstractmethod
    def _timestamps(self, stream_id: StreamId) -> list:
        """Sorted list of stored timestamps for one stream."""

    @abstractmethod
    def _store_new(self, record: StreamRecord) -> None: ...

    @abstractmethod
    def _store_write(self, record: StreamRecord, instances: list) -> None:
        """Persist instances first, then the (already extended) record."""

    @abstractmethod
    def _load_range(self, stream_id: StreamId, interval: TimeInterval) -> list: ...

    @abstractmethod
    def _store_purge(self, record: StreamRecord) -> None: ...

    # contract

    def has_stream(self, stream_id: StreamId) -> bool:
        with self._lock:
            return stream_id in self._records()

    def get_record(self, stream_id: StreamId) -> StreamRecord:
        with self._lock:
            try:
                return self._records()[stream_id]
            except KeyError:
                raise UnknownStream(f"{self.name}: unknown stream {stream_id}") from None

    def create_stream(self, stream_id: StreamId) -> StreamRecord:
        self._require_writable()
        with self._lock:
            if stream_id in self._records():
                raise StreamExists(f"{self.name}: stream {stream_id} already exists")
            record = StreamRecord(stream_id, self.name)
            self._store_new(record)
            return record

    def ensure_stream(self, stream_id: StreamId) -> StreamRecord:
        with self._lock:
            if stream_id in self._records():
                return self._records()[stream_id]
            return self.create_stream(stream_id)

    def write(
        self,
        stream_id: StreamId,
        instances: Sequence[StreamInstance],
        covered: TimeIntervalSet,
        writer: Optional[Provenance] = None,
    ) -> StreamRecord:
        self._require_writable()
        instances = sorted((StreamInstance(int(t), v) for t, v in instances), key=lambda i: i.timestamp)
        with self._lock:
            record = self.get_record(stream_id)
            stored = self._timestamps(stream_id)
            prev = None
            for inst in instances:
                if not covered.member(inst.timestamp):
                    raise TimestampOutsideCover(
                        f"{stream_id}: instance at {inst.timestamp} outside cover {covered!r}")
                if inst.timestamp == prev:
                    raise DuplicateTimestamp(f"{stream_id}: timestamp {inst.timestamp} repeated in batch")
                i = bisect.bisect_left(stored, inst.timestamp)
                if i < len(stored) and stored[i] == inst.timestamp:
                    raise DuplicateTimestamp(f"{stream_id}: timestamp {inst.timestamp} already stored")
                check_value(inst.value)
                prev = inst.timestamp
            new = extend_ledger(record, covered)
            if writer is not None:
                new = StreamRecord(new.id, new.channel, new.calculated_intervals, writer)
            self._store_write(new, instances)
            return new

    def read(self, stream_id: StreamId, interval: TimeInterval) -> list:
        with self._lock:
            record = self.get_record(stream_id)
            missing = difference(TimeIntervalSet([interval]), record.calculated_intervals)
            if missing:
                raise NotComputed(stream_id, missing)
            return self._load_range(stream_id, interval)

    def purge(self, stream_id: StreamId) -> None:
        if not self.capabilities.supports_purge:
            raise Unsupported(f"{self.name}: purge not supported")
        with self._lock:
            record = self.get_record(stream_id)
            self._store_purge(StreamRecord(record.id, record.channel))

    def list_streams(self) -> list:
        with self._lock:
            return sorted(self._records().values(), key=lambda r: str(r.id))

    def close(self) -> None:
        pass

    def _require_writable(self):
        if not self.capabilities.writable:
            raise Unsupported(f"{self.name}: channel is read-only")


def slice_sorted(timestamps: list, interval: TimeInterval) -> tuple:
    """Index range of ``timestamps`` lying in ``(start, end]``."""
    lo = bisect.bisect_right(timestamps, interval.start)
    hi = bisect.bisect_right(timestamps, interval.end)
    return lo, hi


def insert_sorted(timestamps: list, values: dict, instances: Iterable[StreamInstance]) -> None:
    for inst in instances:
        bisect.insort(timestamps, inst.timestamp)
        values[inst.timestamp] = inst.value
