"""Workflow definition files (JSON, schema version 1).

A definition file is the serialized workflow plus an optional
``"channels"`` section::

    {
      "schema_version": 1,
      "workflow": {"id": "sea_ice", "name": "...", "mode": "offline_only"},
      "channels": {"store": {"type": "store", "path": "store.sqlite"}},
      "meta_data": {"house": {"1": {"wearable": {}}}},
      "plates": [{"id": "H", "meta_data_key": "house"}],
      "nodes": [{"id": "sea_ice", "plate": null, "channel": "memory"}],
      "factors": [{"kind": "raw", "tool": {"name": "csv_import", "version": "*",
                   "parameters": {"path": "data/sea_ice.csv"}}, "sources": [], "sink": "sea_ice"}],
      "intervals": [{"start": "2017-01-01T00:00:00Z", "end": "2017-02-01T00:00:00Z"}]
    }

Relative paths (channel roots, tool ``path`` parameters) resolve against
the directory holding the definition file.
"""
from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from .channels import ChannelSet, load_channel_plugins, open_channels
from .engine import Engine
from .errors import DefinitionSyntaxError
from .tools import ToolRegistry, default_registry
from .workflow import Workflow, deserialize

HOME_ENV = "STREAMFLOW_HOME"


def data_root(home=None) -> Path:
    """``home``, else $STREAMFLOW_HOME, else ~/.streamflow."""
    if home is not None:
        return Path(home)
    return Path(os.environ.get(HOME_ENV) or "~/.streamflow").expanduser()


def load_registry(home=None) -> ToolRegistry:
    """Built-in tools plus any plugins listed in ``<home>/plugins.json``."""
    registry = default_registry()
    manifest = data_root(home) / "plugins.json"
    if manifest.is_file():
        data = json.loads(manifest.read_text("utf-8"))
        registry.load_plugins(data)
        load_channel_plugins(data)
    return registry


@dataclass
class Definition:
    workflow: Workflow
    channels: dict = field(default_factory=dict)
    path: Optional[Path] = None

    @property
    def base_dir(self) -> Optional[Path]:
        return self.path.parent if self.path is not None else None

    def open_channels(self, home=None, registry: Optional[ToolRegistry] = None, durable: bool = True) -> ChannelSet:
        return open_channels(self.channels, data_root(home), registry, self.base_dir, durable)

    def engine(self, home=None, registry: Optional[ToolRegistry] = None, **kw) -> Engine:
        engine = Engine(self.open_channels(home, registry), base_dir=self.base_dir, **kw)
        engine.base_dirs[self.workflow.workflow_id] = self.base_dir
        return engine


def parse_definition(text: str, registry: Optional[ToolRegistry] = None, path=None) -> Definition:
    try:
        value = json.loads(text)
    except json.JSONDecodeError as exc:
        raise DefinitionSyntaxError(path or "<definition>", exc.lineno, exc.colno, exc.msg) from None
    workflow = deserialize(value, registry)
    return Definition(workflow, dict(value.get("channels", {})), Path(path) if path is not None else None)


def load_definition(path, registry: Optional[ToolRegistry] = None) -> Definition:
    path = Path(path)
    return parse_definition(path.read_text("utf-8"), registry, path.resolve())
