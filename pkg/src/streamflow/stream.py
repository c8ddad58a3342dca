"""Documents, stream identity and the per-stream computed-interval ledger."""
from __future__ import annotations

import hashlib
import json
import math
import re
from dataclasses import dataclass, field, replace
from typing import Any, Iterable, NamedTuple, Optional

from .errors import DuplicateMetaKey, InvalidName, ValueModelError
from .timeline import EMPTY, TimeIntervalSet, Timestamp, difference, union

NAME_RE = re.compile(r"^[a-z0-9_]+$")
# meta keys and values end up in canonical ids and directory names
_META_FORBIDDEN = re.compile(r"[()=/\\\x00-\x1f]")

INT64_MIN = -(2**63)
INT64_MAX = 2**63 - 1


def check_value(value: Any, path: str = "$") -> None:
    """Raise ValueModelError unless ``value`` is inside the JSON value model."""
    if value is None or isinstance(value, (bool, str)):
        return
    if isinstance(value, int):
        if not INT64_MIN <= value <= INT64_MAX:
            raise ValueModelError(f"{path}: integer {value} exceeds 64 bits")
        return
    if isinstance(value, float):
        if not math.isfinite(value):
            raise ValueModelError(f"{path}: non-finite float {value}")
        return
    if isinstance(value, list):
        for i, item in enumerate(value):
            check_value(item, f"{path}[{i}]")
        return
    if isinstance(value, dict):
        for key, item in value.items():
            if not isinstance(key, str):
                raise ValueModelError(f"{path}: map key {key!r} is not a string")
            check_value(item, f"{path}.{key}")
        return
    raise ValueModelError(f"{path}: {type(value).__name__} is not a document value")


def dumps(value: Any) -> str:
    """Canonical text form: compact UTF-8 JSON with sorted keys."""
    try:
        return json.dumps(value, sort_keys=True, separators=(",", ":"), ensure_ascii=False, allow_nan=False)
    except (TypeError, ValueError) as exc:
        raise ValueModelError(str(exc)) from None


def loads(text: str) -> Any:
    return json.loads(text)


def digest(value: Any) -> str:
    return hashlib.sha256(dumps(value).encode("utf-8")).hexdigest()


class StreamInstance(NamedTuple):
    timestamp: Timestamp
    value: Any


@dataclass(frozen=True, order=True)
class StreamId:
    """Stream name plus meta-data pairs sorted by key.

    Build with :func:`make_stream_id` (or :meth:`parse`) to get validation;
    the canonical form is ``name(key=value)(key=value)``.
    """

    name: str
    meta_data: tuple = ()

    def __str__(self):
        return self.name + "".join(f"({k}={v})" for k, v in self.meta_data)

    @property
    def meta(self) -> dict:
        return dict(self.meta_data)

    @classmethod
    def parse(cls, text: str) -> "StreamId":
        m = re.match(r"^([^()]+)((?:\([^()=]+=[^()]*\))*)$", text.strip())
        if not m:
            raise InvalidName(f"not a stream id: {text!r}")
        pairs = re.findall(r"\(([^()=]+)=([^()]*)\)", m.group(2))
        return make_stream_id(m.group(1), pairs)

    def to_value(self) -> dict:
        return {"name": self.name, "meta_data": [[k, v] for k, v in self.meta_data]}

    @classmethod
    def from_value(cls, value) -> "StreamId":
        return make_stream_id(value["name"], [tuple(p) for p in value["meta_data"]])


def check_meta_token(token: str, what: str) -> str:
    if not isinstance(token, str) or not token or _META_FORBIDDEN.search(token):
        raise InvalidName(f"invalid meta-data {what}: {token!r}")
    return token


def make_meta(pairs: Iterable) -> tuple:
    """Validate and sort meta-data pairs; keys must be unique."""
    pairs = [(check_meta_token(k, "key"), check_meta_token(v, "value")) for k, v in pairs]
    keys = [k for k, _ in pairs]
    if len(set(keys)) != len(keys):
        dup = sorted(k for k in set(keys) if keys.count(k) > 1)
        raise DuplicateMetaKey(f"duplicate meta-data keys: {', '.join(dup)}")
    return tuple(sorted(pairs))


def make_stream_id(name: str, meta: Iterable = ()) -> StreamId:
    if not isinstance(name, str) or not NAME_RE.match(name):
        raise InvalidName(f"stream name must match [a-z0-9_]+: {name!r}")
    return StreamId(name, make_meta(meta))


@dataclass(frozen=True)
class Provenance:
    """Who last wrote a stream: tool name, version and a digest of its parameters."""

    tool_name: str
    tool_version: str
    parameter_digest: str

    def to_value(self) -> dict:
        return {"tool_name": self.tool_name, "tool_version": self.tool_version,
                "parameter_digest": self.parameter_digest}

    @classmethod
    def from_value(cls, value) -> Optional["Provenance"]:
        if value is None:
            return None
        return cls(value["tool_name"], value["tool_version"], value["parameter_digest"])


def provenance_for(tool_name: str, tool_version: str, parameters: dict) -> Provenance:
    return Provenance(tool_name, tool_version,
                      digest({"name": tool_name, "version": tool_version, "parameters": parameters}))


@dataclass(frozen=True)
class StreamRecord:
    id: StreamId
    channel: str
    calculated_intervals: TimeIntervalSet = field(default=EMPTY)
    writer: Optional[Provenance] = None

    def to_value(self) -> dict:
        return {
            "id": str(self.id),
            "channel": self.channel,
            "calculated_intervals": self.calculated_intervals.to_value(),
            "writer": self.writer.to_value() if self.writer else None,
        }


def extend_ledger(record: StreamRecord, newly_computed: TimeIntervalSet) -> StreamRecord:
    return replace(record, calculated_intervals=union(record.calculated_intervals, newly_computed))


def required_intervals(record: StreamRecord, requested: TimeIntervalSet) -> TimeIntervalSet:
    """The part of ``requested`` not yet in the ledger; empty means serve from storage."""
    return difference(requested, record.calculated_intervals)
