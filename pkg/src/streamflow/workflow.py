"""Workflow graphs: plates, nodes and factors, with validation and (de)serialization."""
from __future__ import annotations

import heapq
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Optional

import jsonschema

from .errors import (
    CycleDetected,
    InvalidWorkflow,
    SchemaViolation,
    StreamflowError,
    TimestampError,
    UnsupportedSchemaVersion,
)
from .plates import MetaDataTree, PlateDefinition, plate_chain
from .stream import NAME_RE
from .timeline import EMPTY, TimeInterval, TimeIntervalSet
from .tools import ToolInvocation, ToolRegistry, default_registry

SCHEMA_VERSION = 1

KINDS = ("basic", "multi_output", "raw")
MODES = ("offline_only", "online")


@dataclass(frozen=True)
class Node:
    node_id: str
    plate: Optional[str] = None
    channel: str = "memory"


@dataclass(frozen=True)
class Factor:
    kind: str
    tool: ToolInvocation
    sources: tuple
    sink: str

    @property
    def factor_id(self) -> str:
        return self.sink


@dataclass(frozen=True)
class Workflow:
    workflow_id: str
    name: str = ""
    description: str = ""
    plates: tuple = ()
    nodes: tuple = ()
    factors: tuple = ()
    requested_intervals: TimeIntervalSet = EMPTY
    mode: str = "offline_only"
    meta_data: MetaDataTree = field(default_factory=MetaDataTree)

    @property
    def plate_map(self) -> dict:
        return {p.plate_id: p for p in self.plates}

    @property
    def node_map(self) -> dict:
        return {n.node_id: n for n in self.nodes}

    def plate_of(self, node_id: str) -> Optional[PlateDefinition]:
        pid = self.node_map[node_id].plate
        return None if pid is None else self.plate_map[pid]

    def producer(self, node_id: str) -> Optional[Factor]:
        return next((f for f in self.factors if f.sink == node_id), None)

    def consumers(self, node_id: str) -> list:
        return [f for f in self.factors if node_id in f.sources]


@dataclass(frozen=True)
class Violation:
    code: str
    element: str
    message: str = ""

    def __str__(self):
        return f"{self.code}: {self.element}: {self.message}" if self.message else f"{self.code}: {self.element}"


def _ancestors(plate_id, plates) -> list:
    """plate_id and its parents, innermost first; [] for the root (None)."""
    if plate_id is None:
        return []
    return [p.plate_id for p in reversed(plate_chain(plates[plate_id], plates))]


def validate(workflow: Workflow, channels: Optional[Iterable[str]] = None) -> list:
    """Every violated invariant of ``workflow``; empty means valid."""
    out = []
    plates = {}
    for p in workflow.plates:
        if p.plate_id in plates:
            out.append(Violation("DuplicatePlate", p.plate_id))
        plates[p.plate_id] = p
    good_plates = set()
    for p in workflow.plates:
        if p.parent_plate is not None and p.parent_plate not in plates:
            out.append(Violation("UnknownPlate", p.plate_id, f"parent {p.parent_plate!r} not defined"))
            continue
        try:
            chain = plate_chain(p, plates)
        except CycleDetected:
            out.append(Violation("PlateCycle", p.plate_id, "plate parent chain is cyclic"))
            continue
        except StreamflowError as exc:
            out.append(Violation("UnknownPlate", p.plate_id, str(exc)))
            continue
        keys = [c.meta_data_key for c in chain]
        if len(set(keys)) != len(keys):
            out.append(Violation("DuplicatePlateKey", p.plate_id, f"meta-data key repeated along {keys}"))
            continue
        parent_key = plates[p.parent_plate].meta_data_key if p.parent_plate else None
        for path in workflow.meta_data.nodes_with_tag(p.meta_data_key):
            above = path[-2][0] if len(path) > 1 else None
            if above != parent_key:
                out.append(Violation("PlateTreeMismatch", p.plate_id,
                                     f"tree node {path} not under a {parent_key or 'root'} node"))
                break
        good_plates.add(p.plate_id)

    nodes = {}
    for n in workflow.nodes:
        if n.node_id in nodes:
            out.append(Violation("DuplicateNode", n.node_id))
        nodes[n.node_id] = n
        if not NAME_RE.match(n.node_id):
            out.append(Violation("InvalidName", n.node_id, "node ids must match [a-z0-9_]+"))
        if n.plate is not None and n.plate not in plates:
            out.append(Violation("UnknownPlate", n.node_id, f"plate {n.plate!r} not defined"))
        if channels is not None and n.channel not in channels:
            out.append(Violation("UnknownChannel", n.node_id, f"channel {n.channel!r} not configured"))

    writers = {}
    for i, f in enumerate(workflow.factors):
        label = f"factor[{i}] -> {f.sink}"
        d = f.tool.descriptor
        if f.kind not in KINDS:
            out.append(Violation("KindMismatch", label, f"unknown factor kind {f.kind!r}"))
            continue
        missing = [n for n in (*f.sources, f.sink) if n not in nodes]
        if missing:
            out.append(Violation("UnknownNode", label, f"undefined nodes {missing}"))
            continue
        writers.setdefault(f.sink, []).append(label)
        if f.kind == "raw" and (f.sources or not d.is_source):
            out.append(Violation("KindMismatch", label, "raw factors take no sources and need a source tool"))
        elif f.kind != "raw" and d.is_source:
            out.append(Violation("KindMismatch", label, f"{d.name} is a source tool; use a raw factor"))
        elif (f.kind == "multi_output") != d.multi_output:
            out.append(Violation("KindMismatch", label, f"{d.name} multi_output={d.multi_output} in a {f.kind} factor"))
        elif d.n_sources is not None and len(f.sources) != d.n_sources:
            out.append(Violation("ArityMismatch", label, f"{d.name} takes {d.n_sources} sources, got {len(f.sources)}"))
        elif d.n_sources is None and not f.sources:
            out.append(Violation("ArityMismatch", label, f"{d.name} needs at least one source"))

        sink_plate = nodes[f.sink].plate
        plate_ids = [nodes[s].plate for s in f.sources] + [sink_plate]
        if any(p is not None and p not in good_plates for p in plate_ids):
            continue
        if f.kind == "multi_output":
            for s in f.sources:
                src_plate = nodes[s].plate
                if sink_plate is None or plates[sink_plate].parent_plate != src_plate:
                    out.append(Violation("PlateMismatch", label,
                                         f"sink plate {sink_plate!r} is not a sub-plate of source plate {src_plate!r}"))
            out_key = f.tool.parameters.get("output_key")
            if sink_plate is not None and out_key is not None and out_key != plates[sink_plate].meta_data_key:
                out.append(Violation("PlateMismatch", label,
                                     f"output_key {out_key!r} is not plate {sink_plate!r}'s key"))
        else:
            allowed = set(_ancestors(sink_plate, plates))
            for s in f.sources:
                src_plate = nodes[s].plate
                if src_plate is not None and src_plate not in allowed:
                    out.append(Violation("PlateMismatch", label,
                                         f"source {s} on plate {src_plate!r} is not on or above sink plate {sink_plate!r}"))

    for sink, labels in writers.items():
        if len(labels) > 1:
            out.append(Violation("MultipleWriters", sink, f"written by {', '.join(labels)}"))

    try:
        topological_order(workflow)
    except CycleDetected as exc:
        out.append(Violation("CycleDetected", ", ".join(exc.members), "factor graph is cyclic"))
    if workflow.mode not in MODES:
        out.append(Violation("InvalidMode", workflow.workflow_id, f"mode {workflow.mode!r}"))
    return out


def check(workflow: Workflow, channels=None) -> Workflow:
    violations = validate(workflow, channels)
    if violations:
        raise InvalidWorkflow(violations)
    return workflow


def topological_order(workflow: Workflow) -> list:
    """Factors with every producer before its consumers; ties keep declaration order."""
    factors = list(workflow.factors)
    producer = {}
    for i, f in enumerate(factors):
        producer.setdefault(f.sink, i)
    deps = [{producer[s] for s in f.sources if s in producer} for f in factors]
    dependents = [[] for _ in factors]
    for i, ds in enumerate(deps):
        for d in ds:
            dependents[d].append(i)
    indegree = [len(ds) for ds in deps]
    ready = [i for i, n in enumerate(indegree) if n == 0]
    heapq.heapify(ready)
    order = []
    while ready:
        i = heapq.heappop(ready)
        order.append(i)
        for j in dependents[i]:
            indegree[j] -= 1
            if indegree[j] == 0:
                heapq.heappush(ready, j)
    if len(order) != len(factors):
        stuck = sorted({factors[i].sink for i in range(len(factors)) if indegree[i] > 0})
        raise CycleDetected(stuck)
    return [factors[i] for i in order]


# serialization

_TREE = {"type": "object", "additionalProperties": {"type": "object",
                                                    "additionalProperties": {"$ref": "#/$defs/tree"}}}

SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "additionalProperties": False,
    "required": ["schema_version", "workflow", "nodes", "factors"],
    "properties": {
        "schema_version": {"type": "integer"},
        "workflow": {
            "type": "object",
            "additionalProperties": False,
            "required": ["id"],
            "properties": {
                "id": {"type": "string", "minLength": 1},
                "name": {"type": "string"},
                "description": {"type": "string"},
                "mode": {"enum": list(MODES)},
            },
        },
        "channels": {
            "type": "object",
            "additionalProperties": {"type": "object", "properties": {"type": {"type": "string"}}},
        },
        "meta_data": {"$ref": "#/$defs/tree"},
        "plates": {
            "type": "array",
            "items": {
                "type": "object",
                "additionalProperties": False,
                "required": ["id", "meta_data_key"],
                "properties": {
                    "id": {"type": "string", "minLength": 1},
                    "meta_data_key": {"type": "string", "minLength": 1},
                    "parent": {"type": ["string", "null"]},
                    "values": {"type": ["array", "null"], "items": {"type": "string"}},
                },
            },
        },
        "nodes": {
            "type": "array",
            "items": {
                "type": "object",
                "additionalProperties": False,
                "required": ["id"],
                "properties": {
                    "id": {"type": "string"},
                    "plate": {"type": ["string", "null"]},
                    "channel": {"type": "string"},
                },
            },
        },
        "factors": {
            "type": "array",
            "items": {
                "type": "object",
                "additionalProperties": False,
                "required": ["tool", "sink"],
                "properties": {
                    "kind": {"enum": list(KINDS)},
                    "tool": {
                        "type": "object",
                        "additionalProperties": False,
                        "required": ["name"],
                        "properties": {
                            "name": {"type": "string"},
                            "version": {"type": "string"},
                            "parameters": {"type": "object"},
                        },
                    },
                    "sources": {"type": "array", "items": {"type": "string"}},
                    "sink": {"type": "string"},
                },
            },
        },
        "intervals": {
            "type": "array",
            "items": {
                "type": "object",
                "additionalProperties": False,
                "required": ["start", "end"],
                "properties": {"start": {"type": "string"}, "end": {"type": "string"}},
            },
        },
    },
    "$defs": {"tree": _TREE},
}

_VALIDATOR = jsonschema.Draft202012Validator(SCHEMA)


def _pointer(path) -> str:
    return "".join(f"/{p}" for p in path)


def check_schema(value) -> None:
    if not isinstance(value, dict):
        raise SchemaViolation("", "workflow document must be an object")
    version = value.get("schema_version")
    if isinstance(version, int) and not isinstance(version, bool) and version != SCHEMA_VERSION:
        raise UnsupportedSchemaVersion(f"schema_version {version} not supported (expected {SCHEMA_VERSION})")
    errors = sorted(_VALIDATOR.iter_errors(value), key=lambda e: (list(e.absolute_path), e.validator))
    if not errors:
        return
    err = errors[0]
    path = list(err.absolute_path)
    if err.validator == "required":
        missing = [k for k in err.validator_value if k not in err.instance]
        path.append(missing[0])
    elif err.validator == "additionalProperties" and isinstance(err.instance, dict):
        allowed = set(err.schema.get("properties", {}))
        extra = sorted(k for k in err.instance if k not in allowed)
        if extra:
            path.append(extra[0])
    raise SchemaViolation(_pointer(path), err.message)


def serialize(workflow: Workflow) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "workflow": {
            "id": workflow.workflow_id,
            "name": workflow.name,
            "description": workflow.description,
            "mode": workflow.mode,
        },
        "meta_data": workflow.meta_data.to_value(),
        "plates": [p.to_value() for p in workflow.plates],
        "nodes": [{"id": n.node_id, "plate": n.plate, "channel": n.channel} for n in workflow.nodes],
        "factors": [
            {
                "kind": f.kind,
                "tool": {
                    "name": f.tool.descriptor.name,
                    "version": f.tool.descriptor.version,
                    "parameters": f.tool.parameters,
                },
                "sources": list(f.sources),
                "sink": f.sink,
            }
            for f in workflow.factors
        ],
        "intervals": workflow.requested_intervals.to_value(),
    }


def _default_kind(descriptor, sources) -> str:
    if descriptor.is_source and not sources:
        return "raw"
    return "multi_output" if descriptor.multi_output else "basic"


def deserialize(value, registry: Optional[ToolRegistry] = None) -> Workflow:
    """Build a Workflow from its serialized form.

    Tool versions are requirements (``"*"``, ``"1.0.0"``, ``">=1.0,<2"``,
    ``"^1.2.0"``) resolved against ``registry``.
    """
    check_schema(value)
    registry = registry or default_registry()
    wf = value["workflow"]
    factors = []
    for i, f in enumerate(value["factors"]):
        t = f["tool"]
        descriptor = registry.resolve(t["name"], t.get("version", "*"))
        tool = ToolInvocation(descriptor, t.get("parameters", {}))
        sources = tuple(f.get("sources", ()))
        factors.append(Factor(f.get("kind") or _default_kind(descriptor, sources), tool, sources, f["sink"]))
    intervals = []
    for i, iv in enumerate(value.get("intervals", [])):
        try:
            intervals.append(TimeInterval.from_value(iv))
        except (TimestampError, ValueError) as exc:
            raise SchemaViolation(f"/intervals/{i}", str(exc)) from None
    try:
        tree = MetaDataTree.from_value(value.get("meta_data", {}))
    except (StreamflowError, ValueError) as exc:
        raise SchemaViolation("/meta_data", str(exc)) from None
    return Workflow(
        workflow_id=wf["id"],
        name=wf.get("name", ""),
        description=wf.get("description", ""),
        plates=tuple(PlateDefinition.from_value(p) for p in value.get("plates", [])),
        nodes=tuple(Node(n["id"], n.get("plate"), n.get("channel", "memory")) for n in value["nodes"]),
        factors=tuple(factors),
        requested_intervals=TimeIntervalSet(intervals),
        mode=wf.get("mode", "offline_only"),
        meta_data=tree,
    )


class WorkflowBuilder:
    """Programmatic construction, mirroring the definition file sections.

    >>> b = WorkflowBuilder("geo")
    >>> europe = b.meta_data.add("continent", "Europe")
    >>> _ = b.meta_data.add("country", "UK", parent=europe)
    >>> c = b.create_plate("C", "continent")
    >>> _ = b.create_plate("country", "country", parent_plate=c)
    """

    def __init__(self, workflow_id: str, name: str = "", description: str = "",
                 mode: str = "offline_only", registry: Optional[ToolRegistry] = None):
        self.workflow_id = workflow_id
        self.name = name
        self.description = description
        self.mode = mode
        self.registry = registry or default_registry()
        self.meta_data = MetaDataTree()
        self.plates = []
        self.nodes = []
        self.factors = []
        self.intervals = []

    def create_plate(self, plate_id: str, meta_data_key: str, parent_plate=None, values=None) -> PlateDefinition:
        if isinstance(parent_plate, PlateDefinition):
            parent_plate = parent_plate.plate_id
        plate = PlateDefinition(plate_id, meta_data_key, parent_plate,
                                tuple(values) if values is not None else None)
        self.meta_data.declare_tag(meta_data_key)
        self.plates.append(plate)
        return plate

    def create_node(self, node_id: str, plate=None, channel: str = "memory") -> Node:
        if isinstance(plate, PlateDefinition):
            plate = plate.plate_id
        node = Node(node_id, plate, channel)
        self.nodes.append(node)
        return node

    def create_factor(self, tool: str, parameters: Optional[Mapping] = None, sources=(), sink=None,
                      kind: Optional[str] = None, version: str = "*") -> Factor:
        descriptor = self.registry.resolve(tool, version)
        sources = tuple(s.node_id if isinstance(s, Node) else s for s in sources)
        sink = sink.node_id if isinstance(sink, Node) else sink
        factor = Factor(kind or _default_kind(descriptor, sources),
                        ToolInvocation(descriptor, parameters), sources, sink)
        self.factors.append(factor)
        return factor

    def add_interval(self, start, end) -> None:
        self.intervals.append(TimeInterval.parse(start, end))

    def build(self, validate_graph: bool = True) -> Workflow:
        wf = Workflow(self.workflow_id, self.name, self.description, tuple(self.plates), tuple(self.nodes),
                      tuple(self.factors), TimeIntervalSet(self.intervals), self.mode, self.meta_data.copy())
        return check(wf) if validate_graph else wf
