from __future__ import annotations

from ..stream import StreamId, StreamInstance, StreamRecord, make_stream_id
from ..timeline import MAX_TIMESTAMP, MIN_TIMESTAMP, TimeIntervalSet
from ..tools.base import ToolDescriptor
from ..tools.registry import ToolRegistry, default_registry
from .base import Capabilities, Channel, slice_sorted

# tools have no meaningful time; each is one document at the epoch
TOOL_TIMESTAMP = 0
ALWAYS = TimeIntervalSet([(MIN_TIMESTAMP, MAX_TIMESTAMP)])


class ToolChannel(Channel):
    """Read-only view of a tool registry as streams, one per tool.

    The stream for a tool is named after it with a ``version`` meta-data
    pair, and holds the tool descriptor as its single document.
    """

    capabilities = Capabilities(persistent=False, supports_purge=False, writable=False)

    def __init__(self, name: str = "tools", registry: ToolRegistry = None):
        super().__init__(name)
        self.registry = registry if registry is not None else default_registry()

    def _records(self):
        return {
            sid: StreamRecord(sid, self.name, ALWAYS)
            for sid in (self._stream_id(d) for d in self.registry.descriptors())
        }

    @staticmethod
    def _stream_id(descriptor: ToolDescriptor) -> StreamId:
        return make_stream_id(descriptor.name, [("version", descriptor.version)])

    def _timestamps(self, stream_id):
        return [TOOL_TIMESTAMP]

    def _load_range(self, stream_id, interval):
        descriptor = self.registry.resolve(stream_id.name, dict(stream_id.meta_data)["version"])
        lo, hi = slice_sorted([TOOL_TIMESTAMP], interval)
        return [StreamInstance(TOOL_TIMESTAMP, descriptor.to_value())][lo:hi]

    def _store_new(self, record):  # pragma: no cover - guarded by writable=False
        raise AssertionError

    _store_write = _store_purge = _store_new

    def resolve_tool(self, name: str, version_req: str = "*") -> ToolDescriptor:
        return self.registry.resolve(name, version_req)


def resolve_tool(tool_channel: ToolChannel, name: str, version_req: str = "*") -> ToolDescriptor:
    return tool_channel.resolve_tool(name, version_req)
