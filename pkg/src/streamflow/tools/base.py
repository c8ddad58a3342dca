"""The tool contract: descriptors, frozen invocations and the execution harness.

A tool implementation subclasses :class:`Tool` and writes ``compute`` (or
``compute_multi``) as a generator over plain lists of
:class:`~streamflow.stream.StreamInstance`.  Tools never see channels; the
harness in :class:`ToolInvocation` reads sources, applies lookback, and
checks the output before anything is written.
"""
from __future__ import annotations

import copy
import json
import re
from dataclasses import dataclass, field
from pathlib import Path
from types import MappingProxyType
from typing import Any, Iterable, Iterator, Mapping, Optional, Sequence

from packaging.specifiers import InvalidSpecifier, SpecifierSet
from packaging.version import Version

from ..errors import (
    ArityMismatch,
    ChannelError,
    InvalidName,
    NotComputed,
    ParameterInvalid,
    SourceNotComputed,
    ToolContractError,
    ValueModelError,
    VersionUnsatisfied,
)
from ..stream import StreamInstance, check_meta_token, check_value, dumps, provenance_for
from ..timeline import TimeInterval, TimeIntervalSet, parse_duration

SEMVER_RE = re.compile(r"^(0|[1-9]\d*)\.(0|[1-9]\d*)\.(0|[1-9]\d*)$")

REQUIRED = object()

PARAM_KINDS = ("string", "integer", "number", "boolean", "duration", "any")


@dataclass(frozen=True)
class Param:
    kind: str
    default: Any = REQUIRED
    choices: Optional[tuple] = None
    nullable: bool = False

    def __post_init__(self):
        if self.kind not in PARAM_KINDS:
            raise ValueError(f"unknown parameter kind {self.kind!r}")

    def convert(self, name: str, value: Any) -> Any:
        """Check a raw parameter value; durations come back as milliseconds."""
        if value is None:
            if self.nullable:
                return None
            raise ParameterInvalid(f"parameter {name!r} may not be null")
        kind = self.kind
        ok = {
            "string": lambda v: isinstance(v, str),
            "integer": lambda v: isinstance(v, int) and not isinstance(v, bool),
            "number": lambda v: isinstance(v, (int, float)) and not isinstance(v, bool),
            "boolean": lambda v: isinstance(v, bool),
            "duration": lambda v: isinstance(v, (str, int)) and not isinstance(v, bool),
            "any": lambda v: True,
        }[kind](value)
        if not ok:
            raise ParameterInvalid(f"parameter {name!r} must be {kind}, got {value!r}")
        if self.choices is not None and value not in self.choices:
            raise ParameterInvalid(f"parameter {name!r} must be one of {list(self.choices)}, got {value!r}")
        if kind == "duration":
            try:
                return parse_duration(value)
            except ValueError as exc:
                raise ParameterInvalid(f"parameter {name!r}: {exc}") from None
        return value


@dataclass(frozen=True)
class ExecutionContext:
    """What the harness knows about where a factor runs.

    ``meta`` is the plate assignment of the sink stream, ``base_dir`` the
    directory relative paths in parameters resolve against.
    """

    meta: Mapping = field(default_factory=dict)
    base_dir: Optional[Path] = None

    def resolve_path(self, template: str) -> Path:
        try:
            text = template.format_map(dict(self.meta))
        except KeyError as exc:
            raise ParameterInvalid(f"path template {template!r} references unknown meta key {exc}") from None
        path = Path(text)
        if not path.is_absolute() and self.base_dir is not None:
            path = self.base_dir / path
        return path


class Tool:
    """Base class for tool implementations.

    Class attributes describe the tool: ``name``, semver ``version``,
    ``n_sources`` (``None`` for variadic), ``multi_output`` and ``params``.
    """

    name: str = ""
    version: str = "1.0.0"
    n_sources: Optional[int] = 1
    multi_output: bool = False
    params: Mapping[str, Param] = {}

    def lookback(self, params: Mapping) -> int:
        """Milliseconds of source history needed before the interval start."""
        return 0

    def compute(self, params: Mapping, sources: Sequence[list], interval: TimeInterval,
                context: ExecutionContext) -> Iterator[StreamInstance]:
        raise NotImplementedError

    def compute_multi(self, params: Mapping, sources: Sequence[list], interval: TimeInterval,
                      context: ExecutionContext) -> Iterator[tuple]:
        raise NotImplementedError


@dataclass(frozen=True, eq=False)
class ToolDescriptor:
    name: str
    version: str
    parameter_schema: Mapping[str, str]
    n_sources: Optional[int]
    multi_output: bool
    implementation: Tool = field(repr=False)

    def __eq__(self, other):
        if not isinstance(other, ToolDescriptor):
            return NotImplemented
        return (self.name, self.version) == (other.name, other.version)

    def __hash__(self):
        return hash((self.name, self.version))

    @property
    def is_source(self) -> bool:
        return self.n_sources == 0

    @property
    def arity(self) -> dict:
        return {"n_sources": "variadic" if self.n_sources is None else self.n_sources,
                "multi_output": self.multi_output}

    @classmethod
    def of(cls, tool: Tool) -> "ToolDescriptor":
        if not tool.name:
            raise InvalidName(f"{type(tool).__name__} has no name")
        if not SEMVER_RE.match(tool.version):
            raise ValueError(f"tool {tool.name}: version {tool.version!r} is not semver")
        schema = MappingProxyType({k: p.kind for k, p in tool.params.items()})
        return cls(tool.name, tool.version, schema, tool.n_sources, tool.multi_output, tool)

    def to_value(self) -> dict:
        return {"name": self.name, "version": self.version,
                "parameter_schema": dict(self.parameter_schema), **self.arity}


def parse_requirement(req: str) -> Optional[SpecifierSet]:
    """``"*"`` (or empty) matches anything; a bare version means exactly that version."""
    req = (req or "*").strip()
    if req == "*":
        return None
    if SEMVER_RE.match(req):
        req = "==" + req
    elif req.startswith("^"):
        v = req[1:]
        if not SEMVER_RE.match(v):
            raise VersionUnsatisfied(f"bad version requirement {req!r}")
        major, minor, _ = (int(x) for x in v.split("."))
        upper = f"{major + 1}.0.0" if major else f"0.{minor + 1}.0"
        req = f">={v},<{upper}"
    try:
        return SpecifierSet(req)
    except InvalidSpecifier:
        raise VersionUnsatisfied(f"bad version requirement {req!r}") from None


def version_satisfies(version: str, req: str) -> bool:
    spec = parse_requirement(req)
    return spec is None or Version(version) in spec


class ToolInvocation:
    """A descriptor with fixed, validated parameters.

    Parameters are frozen as canonical JSON; ``parameters`` hands out a copy.
    Two invocations are equal when tool name, version and parameters agree.
    """

    __slots__ = ("descriptor", "_text", "_params", "_resolved")

    def __init__(self, descriptor: ToolDescriptor, parameters: Optional[Mapping] = None):
        parameters = dict(parameters or {})
        tool = descriptor.implementation
        unknown = sorted(set(parameters) - set(tool.params))
        if unknown:
            raise ParameterInvalid(f"{descriptor.name}: unknown parameters {unknown}")
        full, resolved = {}, {}
        for name, spec in tool.params.items():
            if name in parameters:
                value = parameters[name]
            elif spec.default is REQUIRED:
                raise ParameterInvalid(f"{descriptor.name}: missing parameter {name!r}")
            else:
                value = spec.default
            try:
                check_value(value)
            except ValueModelError as exc:
                raise ParameterInvalid(f"{descriptor.name}: {exc}") from None
            full[name] = value
            resolved[name] = spec.convert(name, value)
        object.__setattr__(self, "descriptor", descriptor)
        object.__setattr__(self, "_text", dumps(full))
        object.__setattr__(self, "_params", json.loads(self._text))
        object.__setattr__(self, "_resolved", MappingProxyType(resolved))
        check = getattr(tool, "check_params", None)
        if check is not None:
            check(self._resolved)

    def __setattr__(self, name, value):
        raise AttributeError("ToolInvocation is immutable")

    def __eq__(self, other):
        if not isinstance(other, ToolInvocation):
            return NotImplemented
        return self.descriptor == other.descriptor and self._text == other._text

    def __hash__(self):
        return hash((self.descriptor, self._text))

    def __repr__(self):
        return f"ToolInvocation({self.descriptor.name}@{self.descriptor.version}, {self._text})"

    @property
    def name(self) -> str:
        return self.descriptor.name

    @property
    def parameters(self) -> dict:
        return copy.deepcopy(self._params)

    @property
    def resolved(self) -> Mapping:
        return self._resolved

    @property
    def lookback(self) -> int:
        return self.descriptor.implementation.lookback(self._resolved)

    def provenance(self):
        return provenance_for(self.descriptor.name, self.descriptor.version, self._params)

    def _read_sources(self, sources: Sequence, interval: TimeInterval) -> list:
        n = self.descriptor.n_sources
        if n is None:
            if not sources:
                raise ArityMismatch(f"{self.name}: needs at least one source")
        elif len(sources) != n:
            raise ArityMismatch(f"{self.name}: expects {n} sources, got {len(sources)}")
        read_interval = interval.expand(self.lookback)
        data = []
        for i, src in enumerate(sources):
            try:
                data.append(list(src.read(read_interval)))
            except ChannelError as exc:
                raise SourceNotComputed(i, exc) from None
        return data

    def execute(self, sources: Sequence, interval: TimeInterval,
                context: Optional[ExecutionContext] = None) -> list:
        """Run a single-output tool over ``interval`` and check its output."""
        if self.descriptor.multi_output:
            raise ArityMismatch(f"{self.name} is multi-output; use execute_multi")
        data = self._read_sources(sources, interval)
        out = self.descriptor.implementation.compute(
            self._resolved, data, interval, context or ExecutionContext())
        return _checked(self.name, out, interval)

    def execute_source(self, interval: TimeInterval, context: Optional[ExecutionContext] = None) -> list:
        if not self.descriptor.is_source:
            raise ArityMismatch(f"{self.name} is not a source tool")
        return self.execute([], interval, context)

    def execute_multi(self, sources: Sequence, interval: TimeInterval, output_key: str,
                      context: Optional[ExecutionContext] = None) -> dict:
        """Run a multi-output tool; returns identifier -> instances for the ``output_key`` sub-plate."""
        if not self.descriptor.multi_output:
            raise ArityMismatch(f"{self.name} is not multi-output")
        check_meta_token(output_key, "key")
        data = self._read_sources(sources, interval)
        parts = {}
        for ident, inst in self.descriptor.implementation.compute_multi(
                self._resolved, data, interval, context or ExecutionContext()):
            try:
                check_meta_token(ident, "value")
            except InvalidName as exc:
                raise ToolContractError(f"{self.name}: {exc}") from None
            parts.setdefault(ident, []).append(inst)
        return {k: _checked(self.name, v, interval) for k, v in sorted(parts.items())}


def _checked(name: str, instances: Iterable, interval: TimeInterval) -> list:
    out = []
    prev = None
    for item in instances:
        t, value = item
        if type(t) is not int:
            raise ToolContractError(f"{name}: timestamp {t!r} is not int milliseconds")
        if t not in interval:
            raise ToolContractError(f"{name}: output at {t} outside {interval!r}")
        if prev is not None and t <= prev:
            raise ToolContractError(f"{name}: output timestamps not strictly ascending at {t}")
        try:
            check_value(value)
        except ValueModelError as exc:
            raise ToolContractError(f"{name}: {exc}") from None
        out.append(StreamInstance(t, value))
        prev = t
    return out


class ListSource:
    """A readable source over an in-memory list, optionally with a computed cover."""

    def __init__(self, instances: Iterable, cover=None):
        self.instances = sorted((StreamInstance(*i) for i in instances), key=lambda i: i.timestamp)
        self.cover = cover

    def read(self, interval: TimeInterval) -> list:
        if self.cover is not None and not self.cover.contains(interval):
            raise NotComputed("<list>", TimeIntervalSet([interval]) - self.cover)
        return [i for i in self.instances if i.timestamp in interval]


class ChannelSource:
    """A readable view of one stream in one channel."""

    def __init__(self, channel, stream_id):
        self.channel = channel
        self.stream_id = stream_id

    def read(self, interval: TimeInterval) -> list:
        return self.channel.read(self.stream_id, interval)
