import random

from streamflow.fixtures import collect
from streamflow.timeline import TimeInterval, TimeIntervalSet


def run_fixture(fixture, home, pieces=None):
    """Run a fixture's definition (optionally piecewise); returns (reports, outputs)."""
    d = fixture.definition()
    engine = d.engine(home)
    try:
        pieces = pieces or [d.workflow.requested_intervals]
        reports = [engine.run(d.workflow, p) for p in pieces]
        outputs = collect(engine.channels, d.workflow, fixture.sink_nodes())
    finally:
        engine.channels.close()
    return reports, outputs


def partition(requested: TimeIntervalSet, rng: random.Random, max_parts=5, grain=1000):
    lo, hi = requested.start, requested.end
    k = rng.randint(1, max_parts)
    cuts = sorted(rng.sample(range(lo // grain + 1, hi // grain), k - 1))
    bounds = [lo] + [c * grain for c in cuts] + [hi]
    return [TimeIntervalSet([TimeInterval(a, b)]) for a, b in zip(bounds, bounds[1:])]
