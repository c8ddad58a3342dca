"""Worked examples shipped with the package.

Each fixture directory holds ``workflow.json``, its input files under
``data/``, expected outputs under ``golden/`` and the ``oracle.py`` script
that produced them independently of the engine.
"""
from __future__ import annotations

import csv
import json
import random
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

from ..dsl import Definition, load_definition
from ..timeline import format_timestamp, parse_timestamp

ROOT = Path(__file__).resolve().parent


@dataclass(frozen=True)
class Fixture:
    name: str
    root: Path
    golden_file: Optional[str] = None

    @property
    def definition_path(self) -> Path:
        return self.root / "workflow.json"

    @property
    def data_dir(self) -> Path:
        return self.root / "data"

    @property
    def oracle_path(self) -> Path:
        return self.root / "oracle.py"

    def definition(self, registry=None) -> Definition:
        return load_definition(self.definition_path, registry)

    def golden(self) -> dict:
        """``{canonical stream id: [[RFC 3339 time, value], ...]}``."""
        if self.golden_file is None:
            return {}
        return json.loads((self.root / "golden" / self.golden_file).read_text("utf-8"))

    def sink_nodes(self) -> list:
        return sorted({sid.split("(")[0] for sid in self.golden()})


def fixture_sea_ice() -> Fixture:
    """csv_import -> sea_ice (memory) -> sum_list -> sea_ice_sum (store)."""
    return Fixture("sea_ice", ROOT / "sea_ice", "sea_ice_sum.json")


def fixture_sleep() -> Fixture:
    """House plate H with nested wearable plate W; 5 s then 300 s windows."""
    return Fixture("sleep", ROOT / "sleep", "inactivity_300s.json")


def fixture_clock() -> Fixture:
    """Online workflow with a single 100 ms clock source on the file channel."""
    return Fixture("clock", ROOT / "clock")


def collect(channels, workflow, node_ids) -> dict:
    """Read every stream of ``node_ids`` over the ledger, in golden form."""
    wanted = set(node_ids)
    out = {}
    for node in workflow.nodes:
        if node.node_id not in wanted:
            continue
        channel = channels[node.channel]
        for record in channel.list_streams():
            if record.id.name != node.node_id:
                continue
            ledger = record.calculated_intervals
            out[str(record.id)] = [[format_timestamp(t), v] for part in ledger for t, v in channel.read(record.id, part)]
    return out


def write_sea_ice_csv(path, rows: int, seed: int = 0, width: int = 8) -> None:
    """Synthetic sea-ice style CSV with ``rows`` daily-ish rows of up to ``width`` values."""
    rng = random.Random(seed)
    t = parse_timestamp("2000-01-01T00:00:00Z")
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["time"] + [f"v{i}" for i in range(width)])
        for _ in range(rows):
            t += rng.randint(1, 3600) * 1000
            cells = [f"{rng.uniform(-100, 100):.3f}" for _ in range(rng.randint(0, width))]
            w.writerow([format_timestamp(t)] + cells + [""] * (width - len(cells)))
