"""Streaming workflow engine: time-stamped document streams, storage-agnostic
channels, and plate/node/factor workflows computed on request."""
from .channels import ChannelSet, FileChannel, MemoryChannel, StoreChannel, open_channels
from .engine import Engine, ExecutionPlan, ExecutionReport
from .plates import MetaDataTree, PlateDefinition, expand, streams_for_node
from .stream import StreamId, StreamInstance, StreamRecord, make_stream_id
from .timeline import TimeInterval, TimeIntervalSet, format_timestamp, parse_duration, parse_timestamp
from .tools import Tool, ToolInvocation, ToolRegistry, default_registry
from .workflow import Workflow, WorkflowBuilder, deserialize, serialize, topological_order, validate

__version__ = "0.1.0"

__all__ = [
    "ChannelSet",
    "Engine",
    "ExecutionPlan",
    "ExecutionReport",
    "FileChannel",
    "MemoryChannel",
    "MetaDataTree",
    "PlateDefinition",
    "StoreChannel",
    "StreamId",
    "StreamInstance",
    "StreamRecord",
    "TimeInterval",
    "TimeIntervalSet",
    "Tool",
    "ToolInvocation",
    "ToolRegistry",
    "Workflow",
    "WorkflowBuilder",
    "default_registry",
    "deserialize",
    "expand",
    "format_timestamp",
    "make_stream_id",
    "open_channels",
    "parse_duration",
    "parse_timestamp",
    "serialize",
    "streams_for_node",
    "topological_order",
    "validate",
]
