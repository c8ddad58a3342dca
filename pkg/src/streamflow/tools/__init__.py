from .base import (
    ChannelSource,
    ExecutionContext,
    ListSource,
    Param,
    Tool,
    ToolDescriptor,
    ToolInvocation,
    parse_requirement,
    version_satisfies,
)
from .builtins import BUILTINS
from .registry import ToolRegistry, default_registry, load_entry_point

__all__ = [
    "BUILTINS",
    "ChannelSource",
    "ExecutionContext",
    "ListSource",
    "Param",
    "Tool",
    "ToolDescriptor",
    "ToolInvocation",
    "ToolRegistry",
    "default_registry",
    "load_entry_point",
    "parse_requirement",
    "version_satisfies",
]
