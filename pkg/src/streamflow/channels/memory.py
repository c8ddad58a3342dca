from __future__ import annotations

from ..stream import StreamInstance
from .base import Capabilities, Channel, insert_sorted, slice_sorted


class MemoryChannel(Channel):
    """Streams held in process memory; lost when the process exits."""

    capabilities = Capabilities(persistent=False, supports_purge=True)

    def __init__(self, name: str = "memory"):
        super().__init__(name)
        self._recs = {}
        self._ts = {}
        self._values = {}

    def _records(self):
        return self._recs

    def _timestamps(self, stream_id):
        return self._ts[stream_id]

    def _store_new(self, record):
        self._recs[record.id] = record
        self._ts[record.id] = []
        self._values[record.id] = {}

    def _store_write(self, record, instances):
        insert_sorted(self._ts[record.id], self._values[record.id], instances)
        self._recs[record.id] = record

    def _load_range(self, stream_id, interval):
        ts = self._ts[stream_id]
        lo, hi = slice_sorted(ts, interval)
        values = self._values[stream_id]
        return [StreamInstance(t, values[t]) for t in ts[lo:hi]]

    def _store_purge(self, record):
        self._store_new(record)
