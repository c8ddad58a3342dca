"""Store-backed channel over an embedded SQLite database.

Stands in for an external document database: each write is a single
transaction covering both the instances and the extended ledger.  The same
database carries a small key/value table the engine uses for runtime state
such as discovered plate identifiers.
"""
from __future__ import annotations

import json
import sqlite3
from pathlib import Path
from typing import Any

from ..stream import Provenance, StreamId, StreamInstance, StreamRecord, dumps
from ..timeline import TimeIntervalSet
from .base import Capabilities, Channel

_SCHEMA = """
CREATE TABLE IF NOT EXISTS streams (
    id TEXT PRIMARY KEY,
    id_value TEXT NOT NULL,
    ledger TEXT NOT NULL,
    writer TEXT
);
CREATE TABLE IF NOT EXISTS instances (
    stream TEXT NOT NULL,
    ts INTEGER NOT NULL,
    value TEXT NOT NULL,
    PRIMARY KEY (stream, ts)
) WITHOUT ROWID;
CREATE TABLE IF NOT EXISTS kv (
    key TEXT PRIMARY KEY,
    value TEXT NOT NULL
);
"""


class StoreChannel(Channel):
    capabilities = Capabilities(persistent=True, supports_purge=True)

    def __init__(self, name: str = "store", path=":memory:", durable: bool = True):
        super().__init__(name)
        self.path = str(path)
        if self.path != ":memory:":
            Path(self.path).parent.mkdir(parents=True, exist_ok=True)
        self._db = sqlite3.connect(self.path, check_same_thread=False, isolation_level=None)
        if self.path != ":memory:":
            self._db.execute("PRAGMA journal_mode=WAL")
        self._db.execute(f"PRAGMA synchronous={'FULL' if durable else 'OFF'}")
        self._db.executescript(_SCHEMA)
        self._recs = {}
        for _, id_value, ledger, writer in self._db.execute("SELECT * FROM streams"):
            record = StreamRecord(
                StreamId.from_value(json.loads(id_value)),
                self.name,
                TimeIntervalSet.from_value(json.loads(ledger)),
                Provenance.from_value(json.loads(writer) if writer else None),
            )
            self._recs[record.id] = record
        self._ts_cache = {}

    def _records(self):
        return self._recs

    def _timestamps(self, stream_id):
        cached = self._ts_cache.get(stream_id)
        if cached is None:
            rows = self._db.execute(
                "SELECT ts FROM instances WHERE stream = ? ORDER BY ts", (str(stream_id),))
            cached = self._ts_cache[stream_id] = [r[0] for r in rows]
        return cached

    def _upsert(self, record: StreamRecord):
        self._db.execute(
            "INSERT OR REPLACE INTO streams VALUES (?, ?, ?, ?)",
            (
                str(record.id),
                dumps(record.id.to_value()),
                dumps(record.calculated_intervals.to_value()),
                dumps(record.writer.to_value()) if record.writer else None,
            ),
        )

    def _store_new(self, record):
        with self._db:
            self._db.execute("BEGIN")
            self._upsert(record)
        self._recs[record.id] = record
        self._ts_cache[record.id] = []

    def _store_write(self, record, instances):
        key = str(record.id)
        with self._db:
            self._db.execute("BEGIN")
            self._db.executemany(
                "INSERT INTO instances VALUES (?, ?, ?)",
                [(key, i.timestamp, dumps(i.value)) for i in instances],
            )
            self._upsert(record)
        self._recs[record.id] = record
        ts = self._ts_cache.get(record.id)
        if ts is not None:
            ts.extend(i.timestamp for i in instances)
            ts.sort()

    def _load_range(self, stream_id, interval):
        rows = self._db.execute(
            "SELECT ts, value FROM instances WHERE stream = ? AND ts > ? AND ts <= ? ORDER BY ts",
            (str(stream_id), interval.start, interval.end),
        )
        return [StreamInstance(ts, json.loads(v)) for ts, v in rows]

    def _store_purge(self, record):
        with self._db:
            self._db.execute("BEGIN")
            self._db.execute("DELETE FROM instances WHERE stream = ?", (str(record.id),))
            self._upsert(record)
        self._recs[record.id] = record
        self._ts_cache[record.id] = []

    # runtime state

    def kv_get(self, key: str, default: Any = None) -> Any:
        with self._lock:
            row = self._db.execute("SELECT value FROM kv WHERE key = ?", (key,)).fetchone()
        return json.loads(row[0]) if row else default

    def kv_put(self, key: str, value: Any) -> None:
        with self._lock, self._db:
            self._db.execute("BEGIN")
            self._db.execute("INSERT OR REPLACE INTO kv VALUES (?, ?)", (key, dumps(value)))

    def close(self) -> None:
        with self._lock:
            self._db.close()
