import random
import shutil
import subprocess
import sys

import pytest

from conftest import iv
from fixture_runs import partition, run_fixture
from streamflow.fixtures import Fixture, collect, fixture_sea_ice, fixture_sleep, write_sea_ice_csv
from streamflow.timeline import TimeInterval, TimeIntervalSet, parse_timestamp
from streamflow.tools import ListSource, default_registry


def test_sea_ice_examples():
    tool = default_registry().invoke("sum_list")
    assert tool.execute([ListSource([(1, [1.0, 2.0, 3.0]), (2, [])])], iv(0, 2)) == [(1, 6.0), (2, 0.0)]


def test_sea_ice_matches_golden(tmp_path):
    f = fixture_sea_ice()
    reports, outputs = run_fixture(f, tmp_path)
    assert reports[0].ok
    assert outputs == f.golden()


def test_sleep_matches_golden(tmp_path):
    f = fixture_sleep()
    reports, outputs = run_fixture(f, tmp_path)
    assert reports[0].ok
    assert outputs == f.golden()
    assert len(outputs) == 4  # 2 houses x 2 wearables


def test_sleep_constant_wearable():
    series = fixture_sleep().golden()["inactivity_300s(house=1)(wearable=b)"]
    assert {v for _, v in series} == {12.5}


@pytest.mark.parametrize("name", ["sea_ice", "sleep"])
@pytest.mark.parametrize("seed", range(3))
def test_partitioned_runs_match_golden(tmp_path, name, seed):
    f = fixture_sea_ice() if name == "sea_ice" else fixture_sleep()
    pieces = partition(f.definition().workflow.requested_intervals, random.Random(seed))
    reports, outputs = run_fixture(f, tmp_path, pieces)
    assert all(r.ok for r in reports)
    assert outputs == f.golden()


@pytest.mark.parametrize("fixture", [fixture_sea_ice, fixture_sleep])
def test_oracle_scripts_reproduce_goldens(tmp_path, fixture):
    f = fixture()
    copy = tmp_path / f.name
    shutil.copytree(f.root, copy)
    subprocess.run([sys.executable, str(copy / "oracle.py")], check=True, capture_output=True)
    for golden in (f.root / "golden").iterdir():
        assert (copy / "golden" / golden.name).read_bytes() == golden.read_bytes()
    for data in f.data_dir.iterdir():
        assert (copy / "data" / data.name).read_bytes() == data.read_bytes()


def test_oracle_on_generated_input(tmp_path):
    """The sea-ice oracle and the engine agree on a larger synthetic file."""
    f = fixture_sea_ice()
    copy = tmp_path / "sea_ice"
    shutil.copytree(f.root, copy)
    write_sea_ice_csv(copy / "data" / "sea_ice.csv", 500, seed=4)
    subprocess.run([sys.executable, str(copy / "oracle.py")], check=True, capture_output=True)
    g = Fixture("sea_ice", copy, "sea_ice_sum.json")
    d = g.definition()
    engine = d.engine(tmp_path / "home")
    span = TimeIntervalSet([TimeInterval(parse_timestamp("1999-12-31T00:00:00Z"),
                                         parse_timestamp("2001-01-01T00:00:00Z"))])
    assert engine.run(d.workflow, span).ok
    assert collect(engine.channels, d.workflow, ["sea_ice_sum"]) == g.golden()
