import random

import pytest
from hypothesis import HealthCheck, settings

from streamflow.channels import FileChannel, MemoryChannel, StoreChannel
from streamflow.timeline import TimeInterval, TimeIntervalSet

settings.register_profile("default", max_examples=200, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


def iv(a, b):
    return TimeInterval(a, b)


def S(*pairs):
    return TimeIntervalSet(TimeInterval(a, b) for a, b in pairs)


def mask_of(pairs, n):
    """Bitset oracle: bit p set iff integer point p in 1..n lies in some (a, b]."""
    m = 0
    for a, b in pairs:
        for p in range(max(a + 1, 1), min(b, n) + 1):
            m |= 1 << p
    return m


def set_mask(s, n):
    return mask_of([(i.start, i.end) for i in s], n)


def random_pairs(rng: random.Random, n: int, k: int) -> list:
    out = []
    for _ in range(rng.randint(0, k)):
        a = rng.randint(0, n - 1)
        out.append((a, rng.randint(a + 1, n)))
    return out


@pytest.fixture(params=["memory", "file", "store"])
def channel_factory(request, tmp_path):
    """Builds fresh (or re-opened) channels of one kind sharing tmp_path."""
    kind = request.param

    def make():
        if kind == "memory":
            return MemoryChannel()
        if kind == "file":
            return FileChannel(root=tmp_path / "streams", durable=False)
        return StoreChannel(path=tmp_path / "store.sqlite", durable=False)

    make.kind = kind
    return make


# acceptance reporting: one line per criterion in the terminal summary

_ACCEPTANCE = {}


def pytest_runtest_logreport(report):
    marker = getattr(report, "acceptance", None)
    if marker is None:
        return
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        _ACCEPTANCE[marker] = report.outcome


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    m = item.get_closest_marker("acceptance")
    if m is not None:
        outcome.get_result().acceptance = (m.args[0], m.args[1])


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for (number, title), outcome in sorted(_ACCEPTANCE.items()):
        verdict = "PASS" if outcome == "passed" else "FAIL"
        terminalreporter.write_line(f"criterion {number}: {verdict}  {title}")
