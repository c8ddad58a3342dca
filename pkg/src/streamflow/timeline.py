"""Time points, half-open intervals and canonical interval sets.

Timestamps are plain ``int`` values counting milliseconds since the Unix
epoch, UTC.  Intervals are left-open and right-closed: ``(start, end]``
contains ``t`` iff ``start < t <= end``.  Two intervals that touch, such as
``(0, 5]`` and ``(5, 10]``, therefore partition time without overlap, and a
:class:`TimeIntervalSet` merges them into ``(0, 10]``.
"""
from __future__ import annotations

import re
from dataclasses import dataclass
from datetime import datetime, timedelta, timezone
from typing import Iterable, Iterator, Union

from .errors import EmptyInterval, TimestampError

Timestamp = int

EPOCH = datetime(1970, 1, 1, tzinfo=timezone.utc)
MIN_TIMESTAMP: Timestamp = -62135596800000  # 0001-01-01T00:00:00Z
MAX_TIMESTAMP: Timestamp = 253402300799999  # 9999-12-31T23:59:59.999Z

_DURATION_RE = re.compile(r"^\s*(\d+(?:\.\d+)?)\s*(ms|s|m|h|d|w)?\s*$")
_DURATION_UNITS = {
    "ms": 1,
    "s": 1000,
    "m": 60_000,
    "h": 3_600_000,
    "d": 86_400_000,
    "w": 604_800_000,
    None: 1,
}


def _check_range(ms: int) -> int:
    if not MIN_TIMESTAMP <= ms <= MAX_TIMESTAMP:
        raise TimestampError(f"timestamp {ms} ms outside representable range")
    return ms


def from_datetime(dt: datetime) -> Timestamp:
    """Convert an aware (or naive, taken as UTC) datetime to epoch milliseconds."""
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    if dt.microsecond % 1000:
        raise TimestampError(f"sub-millisecond precision in {dt.isoformat()}")
    delta = dt - EPOCH
    return _check_range((delta.days * 86_400 + delta.seconds) * 1000 + delta.microseconds // 1000)


def to_datetime(ts: Timestamp) -> datetime:
    return EPOCH + timedelta(milliseconds=_check_range(ts))


def parse_timestamp(text: Union[str, datetime, int]) -> Timestamp:
    """Parse an RFC 3339 timestamp.  An explicit offset is required.

    ``int`` input is taken to already be epoch milliseconds.

    >>> parse_timestamp("1970-01-01T00:00:01.500Z")
    1500
    """
    if isinstance(text, bool):
        raise TimestampError(f"not a timestamp: {text!r}")
    if isinstance(text, int):
        return _check_range(text)
    if isinstance(text, datetime):
        return from_datetime(text)
    if not isinstance(text, str):
        raise TimestampError(f"not a timestamp: {text!r}")
    s = text.strip()
    if s.endswith(("Z", "z")):
        s = s[:-1] + "+00:00"
    # fromisoformat in 3.10 only takes 3 or 6 fractional digits
    m = re.match(r"^(.*T\d\d:\d\d:\d\d)(?:[.,](\d+))?([+-]\d\d:\d\d)$", s)
    if not m:
        raise TimestampError(f"not an RFC 3339 timestamp with offset: {text!r}")
    base, frac, offset = m.groups()
    frac = frac or ""
    if len(frac) > 3 and frac[3:].strip("0"):
        raise TimestampError(f"sub-millisecond precision in {text!r}")
    frac = (frac[:3]).ljust(3, "0")
    try:
        dt = datetime.fromisoformat(f"{base}.{frac}{offset}")
    except ValueError as exc:
        raise TimestampError(f"invalid timestamp {text!r}: {exc}") from None
    return from_datetime(dt)


def format_timestamp(ts: Timestamp) -> str:
    """Render epoch milliseconds as RFC 3339 UTC with millisecond precision."""
    dt = to_datetime(ts)
    return (f"{dt.year:04d}-{dt.month:02d}-{dt.day:02d}T{dt.hour:02d}:{dt.minute:02d}:{dt.second:02d}"
            f".{dt.microsecond // 1000:03d}Z")


def parse_duration(value: Union[str, int]) -> int:
    """Parse a duration such as ``"5s"``, ``"300s"``, ``"100ms"`` into milliseconds.

    Bare integers (or digit strings) are milliseconds.
    """
    if isinstance(value, bool):
        raise ValueError(f"not a duration: {value!r}")
    if isinstance(value, int):
        ms = value
    else:
        m = _DURATION_RE.match(str(value))
        if not m:
            raise ValueError(f"not a duration: {value!r}")
        amount = float(m.group(1)) * _DURATION_UNITS[m.group(2)]
        if amount != int(amount):
            raise ValueError(f"duration {value!r} is not a whole number of milliseconds")
        ms = int(amount)
    if ms < 0:
        raise ValueError(f"negative duration: {value!r}")
    return ms


@dataclass(frozen=True, order=True, slots=True)
class TimeInterval:
    """The half-open range ``(start, end]`` in epoch milliseconds."""

    start: Timestamp
    end: Timestamp

    def __post_init__(self):
        if type(self.start) is not int or type(self.end) is not int:
            raise TypeError("interval bounds must be int milliseconds")
        if not self.start < self.end:
            raise EmptyInterval(f"empty interval ({self.start}, {self.end}]")

    @classmethod
    def parse(cls, start, end) -> "TimeInterval":
        return cls(parse_timestamp(start), parse_timestamp(end))

    def __contains__(self, t: Timestamp) -> bool:
        return self.start < t <= self.end

    def __str__(self):
        return f"({format_timestamp(self.start)}, {format_timestamp(self.end)}]"

    @property
    def width(self) -> int:
        return self.end - self.start

    def expand(self, lookback: int) -> "TimeInterval":
        """Extend the interval backwards by ``lookback`` milliseconds."""
        if lookback <= 0:
            return self
        return TimeInterval(max(self.start - lookback, MIN_TIMESTAMP), self.end)

    def to_value(self) -> dict:
        return {"start": format_timestamp(self.start), "end": format_timestamp(self.end)}

    @classmethod
    def from_value(cls, value) -> "TimeInterval":
        try:
            return cls.parse(value["start"], value["end"])
        except (KeyError, TypeError):
            raise TimestampError(f"not an interval: {value!r}") from None


def _canonicalize(intervals: Iterable[TimeInterval]) -> tuple:
    ordered = sorted(intervals)
    out = []
    for iv in ordered:
        if out and iv.start <= out[-1].end:
            if iv.end > out[-1].end:
                out[-1] = TimeInterval(out[-1].start, iv.end)
        else:
            out.append(iv)
    return tuple(out)


def is_canonical(intervals) -> bool:
    """True when the sequence is sorted, disjoint and non-adjacent."""
    return all(a.end < b.start for a, b in zip(intervals, intervals[1:]))


class TimeIntervalSet:
    """An immutable, canonical set of disjoint non-adjacent intervals.

    Construction accepts any iterable of intervals (or ``(start, end)``
    pairs) and merges overlapping or touching members, so two sets covering
    the same points always compare and hash equal.
    """

    __slots__ = ("_intervals",)

    def __init__(self, intervals: Iterable = ()):
        items = [iv if isinstance(iv, TimeInterval) else TimeInterval(*iv) for iv in intervals]
        object.__setattr__(self, "_intervals", _canonicalize(items))

    @classmethod
    def _trusted(cls, intervals: tuple) -> "TimeIntervalSet":
        obj = cls.__new__(cls)
        object.__setattr__(obj, "_intervals", intervals)
        return obj

    def __setattr__(self, name, value):
        raise AttributeError("TimeIntervalSet is immutable")

    @property
    def intervals(self) -> tuple:
        return self._intervals

    def __iter__(self) -> Iterator[TimeInterval]:
        return iter(self._intervals)

    def __len__(self):
        return len(self._intervals)

    def __bool__(self):
        return bool(self._intervals)

    def __eq__(self, other):
        if not isinstance(other, TimeIntervalSet):
            return NotImplemented
        return self._intervals == other._intervals

    def __hash__(self):
        return hash(self._intervals)

    def __repr__(self):
        inner = ",".join(f"({iv.start},{iv.end}]" for iv in self._intervals)
        return f"TimeIntervalSet{{{inner}}}"

    def __str__(self):
        return "{" + ", ".join(str(iv) for iv in self._intervals) + "}"

    def __or__(self, other):
        return union(self, other)

    def __sub__(self, other):
        return difference(self, other)

    def __and__(self, other):
        return intersection(self, other)

    def __contains__(self, t: Timestamp) -> bool:
        return self.member(t)

    def member(self, t: Timestamp) -> bool:
        lo, hi = 0, len(self._intervals)
        while lo < hi:
            mid = (lo + hi) // 2
            if self._intervals[mid].end < t:
                lo = mid + 1
            else:
                hi = mid
        return lo < len(self._intervals) and t in self._intervals[lo]

    def contains(self, query: TimeInterval) -> bool:
        return contains(self, query)

    @property
    def is_empty(self) -> bool:
        return not self._intervals

    @property
    def start(self):
        return self._intervals[0].start if self._intervals else None

    @property
    def end(self):
        return self._intervals[-1].end if self._intervals else None

    @property
    def total_width(self) -> int:
        return sum(iv.width for iv in self._intervals)

    def expand(self, lookback: int) -> "TimeIntervalSet":
        if lookback <= 0:
            return self
        return TimeIntervalSet(iv.expand(lookback) for iv in self._intervals)

    def to_value(self) -> list:
        return [iv.to_value() for iv in self._intervals]

    @classmethod
    def from_value(cls, value) -> "TimeIntervalSet":
        if not isinstance(value, list):
            raise TimestampError(f"not an interval list: {value!r}")
        return cls(TimeInterval.from_value(v) for v in value)


EMPTY = TimeIntervalSet()


def union(a: TimeIntervalSet, b: TimeIntervalSet) -> TimeIntervalSet:
    if not a:
        return b
    if not b:
        return a
    return TimeIntervalSet._trusted(_canonicalize(a.intervals + b.intervals))


def intersection(a: TimeIntervalSet, b: TimeIntervalSet) -> TimeIntervalSet:
    out = []
    xs, ys = a.intervals, b.intervals
    i = j = 0
    while i < len(xs) and j < len(ys):
        x, y = xs[i], ys[j]
        lo, hi = max(x.start, y.start), min(x.end, y.end)
        if lo < hi:
            out.append(TimeInterval(lo, hi))
        if x.end < y.end:
            i += 1
        else:
            j += 1
    # pieces come from disjoint non-adjacent inputs, so they are already canonical
    return TimeIntervalSet._trusted(tuple(out))


def difference(a: TimeIntervalSet, b: TimeIntervalSet) -> TimeIntervalSet:
    if not a or not b:
        return a
    out = []
    ys = b.intervals
    j = 0
    for x in a.intervals:
        cur = x.start
        while j < len(ys) and ys[j].end <= cur:
            j += 1
        k = j
        while k < len(ys) and ys[k].start < x.end:
            y = ys[k]
            if y.start > cur:
                out.append(TimeInterval(cur, y.start))
            cur = max(cur, y.end)
            if cur >= x.end:
                break
            k += 1
        if cur < x.end:
            out.append(TimeInterval(cur, x.end))
    return TimeIntervalSet._trusted(tuple(out))


def contains(s: TimeIntervalSet, query: TimeInterval) -> bool:
    """True iff every point of ``query`` lies in ``s``."""
    return not difference(TimeIntervalSet._trusted((query,)), s)
