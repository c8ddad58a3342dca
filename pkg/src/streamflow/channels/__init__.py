"""Storage channels and the set of channels an engine runs against."""
from __future__ import annotations

import json
from pathlib import Path
from typing import Mapping, Optional

from ..errors import UnknownChannel
from ..tools.registry import ToolRegistry, load_entry_point
from .base import Capabilities, Channel
from .file import AssetsChannel, FileChannel
from .memory import MemoryChannel
from .store import StoreChannel
from .tool import ToolChannel, resolve_tool

CHANNEL_TYPES = {
    "memory": MemoryChannel,
    "file": FileChannel,
    "store": StoreChannel,
    "assets": AssetsChannel,
}


def register_channel_type(type_name: str, cls) -> None:
    if not (isinstance(cls, type) and issubclass(cls, Channel)):
        raise TypeError(f"{cls!r} is not a Channel subclass")
    CHANNEL_TYPES[type_name] = cls


def load_channel_plugins(manifest) -> list:
    """Register the channel types listed under ``"channels"`` in a plugins.json manifest."""
    data = manifest if isinstance(manifest, dict) else json.loads(Path(manifest).read_text("utf-8"))
    names = []
    for type_name, spec in sorted(data.get("channels", {}).items()):
        register_channel_type(type_name, load_entry_point(spec))
        names.append(type_name)
    return names


class ChannelSet(Mapping):
    """Channels by name, plus the tool registry exposed as the ``tools`` channel."""

    def __init__(self, channels=(), registry: Optional[ToolRegistry] = None):
        self._channels = {}
        tool_channel = ToolChannel("tools", registry)
        self.registry = tool_channel.registry
        for ch in (tool_channel, *channels):
            self._channels[ch.name] = ch

    def add(self, channel: Channel) -> Channel:
        self._channels[channel.name] = channel
        return channel

    def __getitem__(self, name):
        try:
            return self._channels[name]
        except KeyError:
            raise UnknownChannel(f"unknown channel {name!r}") from None

    def __iter__(self):
        return iter(self._channels)

    def __len__(self):
        return len(self._channels)

    @property
    def tools(self) -> ToolChannel:
        return self._channels["tools"]

    def persistent(self) -> list:
        return [c for c in self._channels.values() if c.capabilities.persistent]

    def find_store(self) -> Optional[StoreChannel]:
        for ch in self._channels.values():
            if isinstance(ch, StoreChannel):
                return ch
        return None

    def close(self):
        for ch in self._channels.values():
            ch.close()


def default_channel_config(data_root) -> dict:
    root = Path(data_root)
    return {
        "memory": {"type": "memory"},
        "file": {"type": "file", "root": str(root / "streams")},
        "store": {"type": "store", "path": str(root / "store.sqlite")},
        "assets": {"type": "assets", "root": str(root / "assets")},
    }


def open_channels(config: Optional[Mapping], data_root, registry: Optional[ToolRegistry] = None,
                  base_dir=None, durable: bool = True) -> ChannelSet:
    """Build channels from a ``{name: {"type": ..., ...}}`` mapping.

    Channels not mentioned keep their defaults under ``data_root``; relative
    roots and paths resolve against ``base_dir``.
    """
    merged = default_channel_config(data_root)
    merged.update(config or {})
    channels = []
    for name, spec in merged.items():
        spec = dict(spec)
        type_name = spec.pop("type", name)
        try:
            cls = CHANNEL_TYPES[type_name]
        except KeyError:
            raise UnknownChannel(f"channel {name!r}: unknown type {type_name!r}") from None
        for key in ("root", "path"):
            if key in spec and base_dir is not None and spec[key] != ":memory:":
                p = Path(spec[key])
                spec[key] = str(p if p.is_absolute() else Path(base_dir) / p)
        if "durable" in cls.__init__.__code__.co_varnames:
            spec.setdefault("durable", durable)
        channels.append(cls(name=name, **spec))
    return ChannelSet(channels, registry)


__all__ = [
    "AssetsChannel",
    "CHANNEL_TYPES",
    "Capabilities",
    "Channel",
    "ChannelSet",
    "FileChannel",
    "MemoryChannel",
    "StoreChannel",
    "ToolChannel",
    "default_channel_config",
    "load_channel_plugins",
    "open_channels",
    "register_channel_type",
    "resolve_tool",
]
