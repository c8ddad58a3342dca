from __future__ import annotations

import importlib
import json
from pathlib import Path

from ..errors import UnknownTool, VersionUnsatisfied
from .base import Tool, ToolDescriptor, ToolInvocation, version_satisfies
from .builtins import BUILTINS


def load_entry_point(spec: str):
    """Import ``package.module:attribute``."""
    module, _, attr = spec.partition(":")
    if not module or not attr:
        raise ValueError(f"entry point must look like 'module:attribute', got {spec!r}")
    obj = importlib.import_module(module)
    for part in attr.split("."):
        obj = getattr(obj, part)
    return obj


class ToolRegistry:
    """Tools by name.  A name maps to a single version at a time."""

    def __init__(self, tools=()):
        self._tools = {}
        for tool in tools:
            self.register(tool)

    def register(self, tool, replace: bool = False) -> ToolDescriptor:
        if isinstance(tool, type):
            tool = tool()
        if not isinstance(tool, Tool):
            raise TypeError(f"{tool!r} is not a Tool")
        descriptor = ToolDescriptor.of(tool)
        if descriptor.name in self._tools and not replace:
            raise ValueError(f"tool {descriptor.name!r} already registered")
        self._tools[descriptor.name] = descriptor
        return descriptor

    def resolve(self, name: str, version_req: str = "*") -> ToolDescriptor:
        try:
            descriptor = self._tools[name]
        except KeyError:
            raise UnknownTool(f"unknown tool {name!r}") from None
        if not version_satisfies(descriptor.version, version_req):
            raise VersionUnsatisfied(f"{name} {descriptor.version} does not satisfy {version_req!r}")
        return descriptor

    def invoke(self, name: str, parameters=None, version_req: str = "*") -> ToolInvocation:
        return ToolInvocation(self.resolve(name, version_req), parameters)

    def descriptors(self) -> list:
        return [self._tools[k] for k in sorted(self._tools)]

    def __contains__(self, name):
        return name in self._tools

    def load_plugins(self, manifest) -> list:
        """Register the tools listed under ``"tools"`` in a plugins.json manifest."""
        data = manifest if isinstance(manifest, dict) else json.loads(Path(manifest).read_text("utf-8"))
        added = []
        for name, spec in sorted(data.get("tools", {}).items()):
            tool = load_entry_point(spec)
            descriptor = self.register(tool)
            if descriptor.name != name:
                raise ValueError(f"plugin {spec} registers {descriptor.name!r}, manifest says {name!r}")
            added.append(descriptor)
        return added


def default_registry() -> ToolRegistry:
    return ToolRegistry(BUILTINS)
