"""Compute-on-request execution of workflows, offline and online.

Planning walks the factor graph backwards from the leaf nodes: a leaf
stream is demanded over the requested set, each factor computes only the
part of its sink's demand missing from the sink ledger, and that need
(widened by the tool's lookback) becomes demand on the factor's sources.
Execution then runs the factors forwards, writing every output together
with the interval set it covers.

Plates filled at runtime by multi-output factors ("dynamic" plates) carry
an extra per-node *open demand*: the range a stream that does not exist
yet would have to cover once it is discovered.
"""
from __future__ import annotations

import json
import logging
import threading
import time
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Optional

from .channels import ChannelSet
from .errors import InvalidWorkflow, StreamflowError, UpstreamFailed
from .plates import MetaDataTree, expand, plate_chain
from .stream import StreamId, make_stream_id
from .timeline import EMPTY, TimeInterval, TimeIntervalSet, difference, intersection, union
from .tools import ChannelSource, ExecutionContext
from .workflow import Factor, Workflow, topological_order, validate

log = logging.getLogger("streamflow.engine")

COMPUTED = "computed"
SERVED = "served_from_storage"
FAILED = "failed"


def log_event(event: str, **fields) -> None:
    """One JSON object per engine event."""
    if log.isEnabledFor(logging.INFO):
        log.info(json.dumps({"event": event, **fields}, sort_keys=True, default=str))


@dataclass
class PlanEntry:
    factor: Factor
    plate_value: tuple
    sink: Optional[StreamId]  # None for multi-output entries, whose sinks are discovered
    intervals_to_compute: TimeIntervalSet
    source_read_intervals: tuple = ()  # ((StreamId, TimeIntervalSet), ...)

    @property
    def served_from_storage(self) -> bool:
        return not self.intervals_to_compute

    @property
    def key(self) -> tuple:
        return (self.factor.factor_id, self.plate_value)

    def describe(self) -> dict:
        return {
            "factor": self.factor.factor_id,
            "tool": self.factor.tool.name,
            "plate_value": "".join(f"({k}={v})" for k, v in self.plate_value),
            "sink": str(self.sink) if self.sink else None,
            "intervals_to_compute": self.intervals_to_compute.to_value(),
        }


@dataclass
class ExecutionPlan:
    workflow: Workflow
    requested: TimeIntervalSet
    entries: list
    tree: MetaDataTree
    demand: dict = field(default_factory=dict)
    open_demand: dict = field(default_factory=dict)
    base_dir: Optional[Path] = None


@dataclass
class EntryReport:
    factor_id: str
    tool: str
    plate_value: tuple
    sink: str
    outcome: str
    instances_written: int = 0
    intervals_marked: TimeIntervalSet = EMPTY
    duration: float = 0.0
    error: Optional[str] = None

    def to_value(self) -> dict:
        return {
            "factor": self.factor_id,
            "tool": self.tool,
            "plate_value": "".join(f"({k}={v})" for k, v in self.plate_value),
            "sink": self.sink,
            "outcome": self.outcome,
            "instances_written": self.instances_written,
            "intervals_marked": self.intervals_marked.to_value(),
            "duration": self.duration,
            "error": self.error,
        }


@dataclass
class ExecutionReport:
    workflow_id: str
    entries: list = field(default_factory=list)
    tool_invocations: int = 0
    stopped: bool = False

    @property
    def ok(self) -> bool:
        return all(e.outcome != FAILED for e in self.entries)

    def count(self, outcome: str) -> int:
        return sum(e.outcome == outcome for e in self.entries)

    @property
    def failures(self) -> list:
        return [e for e in self.entries if e.outcome == FAILED]

    def to_value(self) -> dict:
        return {
            "workflow": self.workflow_id,
            "tool_invocations": self.tool_invocations,
            "stopped": self.stopped,
            "entries": [e.to_value() for e in self.entries],
        }

    def summary(self) -> str:
        return (f"{self.workflow_id}: {self.count(COMPUTED)} computed, {self.count(SERVED)} served_from_storage, "
                f"{self.count(FAILED)} failed, {self.tool_invocations} tool invocations")


def _project(assignment: tuple, keys) -> tuple:
    keys = set(keys)
    return tuple(p for p in assignment if p[0] in keys)


def _subset(small: tuple, big: tuple) -> bool:
    return set(small) <= set(big)


class Engine:
    """Plans and executes workflows against a set of channels.

    ``tool_invocations`` counts every call into a tool over the engine's
    lifetime.  Discovered plate identifiers are kept per workflow and, when
    the channel set has a store-backed channel, persisted there.
    """

    def __init__(self, channels: ChannelSet, base_dir=None, parallel: bool = False, max_workers: int = 4,
                 retry_limit: int = 3):
        self.channels = channels
        self.base_dir = Path(base_dir) if base_dir is not None else None
        self.base_dirs = {}
        self.parallel = parallel
        self.max_workers = max_workers
        self.retry_limit = retry_limit
        self.tool_invocations = 0
        self._trees = {}
        self._lock = threading.Lock()

    # helpers

    def tree_for(self, workflow: Workflow) -> MetaDataTree:
        tree = self._trees.get(workflow.workflow_id)
        if tree is None:
            tree = workflow.meta_data.copy()
            for p in workflow.plates:
                tree.declare_tag(p.meta_data_key)
            store = self.channels.find_store()
            if store is not None:
                saved = store.kv_get(f"meta_data/{workflow.workflow_id}")
                if saved:
                    tree.merge(MetaDataTree.from_value(saved))
            self._trees[workflow.workflow_id] = tree
        return tree

    def _persist_tree(self, workflow: Workflow, tree: MetaDataTree) -> None:
        store = self.channels.find_store()
        if store is not None:
            store.kv_put(f"meta_data/{workflow.workflow_id}", tree.to_value())

    def _ledger(self, channel, sid: StreamId) -> TimeIntervalSet:
        if channel.has_stream(sid):
            return channel.get_record(sid).calculated_intervals
        return EMPTY

    @staticmethod
    def _values(workflow: Workflow, plate_id, tree) -> list:
        if plate_id is None:
            return [()]
        plates = workflow.plate_map
        return expand(plates[plate_id], tree, plates)

    @staticmethod
    def _keys(workflow: Workflow, plate_id) -> list:
        if plate_id is None:
            return []
        plates = workflow.plate_map
        return [p.meta_data_key for p in plate_chain(plates[plate_id], plates)]

    @staticmethod
    def _dynamic_plates(workflow: Workflow) -> set:
        nodes = workflow.node_map
        dynamic = {nodes[f.sink].plate for f in workflow.factors if f.kind == "multi_output"}
        dynamic.discard(None)
        changed = True
        while changed:
            changed = False
            for p in workflow.plates:
                if p.parent_plate in dynamic and p.plate_id not in dynamic:
                    dynamic.add(p.plate_id)
                    changed = True
        return dynamic

    def _factor_entries(self, workflow, factor, tree, demand, open_demand) -> list:
        nodes = workflow.node_map
        sink_node = nodes[factor.sink]
        channel = self.channels[sink_node.channel]
        lookback = factor.tool.lookback
        opened = open_demand.get(factor.sink, EMPTY)
        entries = []
        if factor.kind == "multi_output":
            src = factor.sources[0]
            src_plate = nodes[src].plate
            known = [make_stream_id(factor.sink, v) for v in self._values(workflow, sink_node.plate, tree)]
            for u in self._values(workflow, src_plate, tree):
                under = [k for k in known if _subset(u, k.meta_data)]
                need = EMPTY
                common = None
                for k in under:
                    led = self._ledger(channel, k)
                    need = union(need, difference(demand.get(k, EMPTY), led))
                    common = led if common is None else intersection(common, led)
                need = union(need, difference(opened, common or EMPTY))
                src_id = make_stream_id(src, u)
                entries.append(PlanEntry(factor, u, None, need, ((src_id, need.expand(lookback)),)))
            return entries
        for v in self._values(workflow, sink_node.plate, tree):
            sid = make_stream_id(factor.sink, v)
            need = difference(union(demand.get(sid, EMPTY), opened), self._ledger(channel, sid))
            reads = tuple(
                (make_stream_id(s, _project(v, self._keys(workflow, nodes[s].plate))), need.expand(lookback))
                for s in factor.sources
            )
            entries.append(PlanEntry(factor, v, sid, need, reads))
        return entries

    # planning

    def plan(self, workflow: Workflow, requested: Optional[TimeIntervalSet] = None,
             base_dir=None) -> ExecutionPlan:
        violations = validate(workflow, self.channels)
        if violations:
            raise InvalidWorkflow(violations)
        requested = workflow.requested_intervals if requested is None else requested
        order = topological_order(workflow)
        tree = self.tree_for(workflow)
        nodes = workflow.node_map
        dynamic = self._dynamic_plates(workflow)
        consumed = {s for f in workflow.factors for s in f.sources}
        demand, open_demand = {}, {}

        def add_demand(sid, ivs):
            if ivs:
                demand[sid] = union(demand.get(sid, EMPTY), ivs)

        for node in workflow.nodes:
            if node.node_id in consumed:
                continue
            channel = self.channels[node.channel]
            values = self._values(workflow, node.plate, tree)
            sids = [make_stream_id(node.node_id, v) for v in values]
            for sid in sids:
                add_demand(sid, requested)
            if node.plate in dynamic:
                common = None
                for sid in sids:
                    led = self._ledger(channel, sid)
                    common = led if common is None else intersection(common, led)
                open_demand[node.node_id] = difference(requested, common or EMPTY)

        per_factor = {}
        for factor in reversed(order):
            entries = self._factor_entries(workflow, factor, tree, demand, open_demand)
            per_factor[id(factor)] = entries
            for entry in entries:
                for sid, ivs in entry.source_read_intervals:
                    add_demand(sid, ivs)
            opened = open_demand.get(factor.sink, EMPTY)
            if opened:
                widened = opened.expand(factor.tool.lookback)
                for s in factor.sources:
                    src_plate = nodes[s].plate
                    if src_plate in dynamic:
                        open_demand[s] = union(open_demand.get(s, EMPTY), widened)
                    elif factor.kind != "multi_output":
                        for v in self._values(workflow, src_plate, tree):
                            add_demand(make_stream_id(s, v), widened)

        entries = [e for f in order for e in per_factor[id(f)]]
        plan = ExecutionPlan(workflow, requested, entries, tree, demand, open_demand,
                             Path(base_dir) if base_dir else self.base_dirs.get(workflow.workflow_id, self.base_dir))
        log_event("plan", workflow=workflow.workflow_id, requested=requested.to_value(),
                  entries=len(entries), to_compute=sum(not e.served_from_storage for e in entries))
        return plan

    # execution

    def execute(self, plan: ExecutionPlan, stop: Optional[threading.Event] = None,
                skip: Iterable = ()) -> ExecutionReport:
        """Run a plan.  Entries are re-derived per factor against current ledgers.

        Per-entry failures are reported, never raised; an entry whose sources
        failed on the same plate value is reported failed with UpstreamFailed.
        ``skip`` holds entry keys ``(factor_id, plate_value)`` not to run.
        """
        workflow = plan.workflow
        tree = plan.tree
        skip = set(skip)
        report = ExecutionReport(workflow.workflow_id)
        before = self.tool_invocations
        failed = []  # (node_id, assignment)
        for factor in topological_order(workflow):
            if stop is not None and stop.is_set():
                report.stopped = True
                break
            entries = self._factor_entries(workflow, factor, tree, plan.demand, plan.open_demand)
            runnable = []
            for entry in entries:
                if entry.key in skip:
                    report.entries.append(self._report(entry, FAILED, error="quarantined"))
                elif any(_subset(a, entry.plate_value) or _subset(entry.plate_value, a)
                         for s in factor.sources for n, a in failed if n == s):
                    upstream = UpstreamFailed(f"a source of {entry.factor.factor_id} failed on this plate value")
                    report.entries.append(self._report(entry, FAILED, error=f"UpstreamFailed: {upstream}"))
                    failed.append((factor.sink, entry.plate_value))
                else:
                    runnable.append(entry)
            if self.parallel and len(runnable) > 1:
                with ThreadPoolExecutor(self.max_workers) as pool:
                    results = list(pool.map(lambda e: self._run_entry(plan, e, stop), runnable))
            else:
                results = []
                for entry in runnable:
                    if stop is not None and stop.is_set():
                        report.stopped = True
                        break
                    results.append(self._run_entry(plan, entry, stop))
            for entry, result in zip(runnable, results):
                report.entries.append(result)
                if result.outcome == FAILED:
                    failed.append((factor.sink, entry.plate_value))
            if report.stopped:
                break
        report.tool_invocations = self.tool_invocations - before
        return report

    def _report(self, entry: PlanEntry, outcome: str, **kw) -> EntryReport:
        return EntryReport(entry.factor.factor_id, entry.factor.tool.name, entry.plate_value,
                           str(entry.sink) if entry.sink else f"{make_stream_id(entry.factor.sink, entry.plate_value)}[*]",
                           outcome, **kw)

    def _invoke(self, fn, *args):
        with self._lock:
            self.tool_invocations += 1
        return fn(*args)

    def _run_entry(self, plan: ExecutionPlan, entry: PlanEntry, stop) -> EntryReport:
        if entry.served_from_storage:
            return self._report(entry, SERVED)
        workflow = plan.workflow
        log_event("entry_start", workflow=workflow.workflow_id, **entry.describe())
        t0 = time.perf_counter()
        try:
            written = self._compute(plan, entry)
        except StreamflowError as exc:
            result = self._report(entry, FAILED, duration=time.perf_counter() - t0,
                                  error=f"{type(exc).__name__}: {exc}")
            log_event("failure", workflow=workflow.workflow_id, error=result.error, **entry.describe())
            return result
        result = self._report(entry, COMPUTED, instances_written=written,
                              intervals_marked=entry.intervals_to_compute, duration=time.perf_counter() - t0)
        log_event("entry_end", workflow=workflow.workflow_id, instances_written=written,
                  duration=result.duration, **entry.describe())
        return result

    def _compute(self, plan: ExecutionPlan, entry: PlanEntry) -> int:
        workflow = plan.workflow
        factor = entry.factor
        nodes = workflow.node_map
        sink_node = nodes[factor.sink]
        channel = self.channels[sink_node.channel]
        tool = factor.tool
        context = ExecutionContext(dict(entry.plate_value), plan.base_dir)
        sources = [ChannelSource(self.channels[nodes[s].channel], sid)
                   for s, (sid, _) in zip(factor.sources, entry.source_read_intervals)]
        provenance = tool.provenance()

        if factor.kind != "multi_output":
            outputs = []
            for iv in entry.intervals_to_compute:
                if factor.kind == "raw":
                    outputs.extend(self._invoke(tool.execute_source, iv, context))
                else:
                    outputs.extend(self._invoke(tool.execute, sources, iv, context))
            channel.ensure_stream(entry.sink)
            channel.write(entry.sink, outputs, entry.intervals_to_compute, provenance)
            return len(outputs)

        plates = workflow.plate_map
        sink_plate = plates[sink_node.plate]
        key = sink_plate.meta_data_key
        parts = {}
        for iv in entry.intervals_to_compute:
            for ident, items in self._invoke(tool.execute_multi, sources, iv, key, context).items():
                parts.setdefault(ident, []).extend(items)
        u = entry.plate_value
        parent_path = tuple((k, dict(u)[k]) for k in self._keys(workflow, sink_plate.parent_plate))
        allowed = set(sink_plate.values_filter) if sink_plate.values_filter is not None else None
        with self._lock:
            known = {i for i in plan.tree.identifiers(parent_path, key) if allowed is None or i in allowed}
        prior = None
        for ident in known:
            led = self._ledger(channel, make_stream_id(factor.sink, u + ((key, ident),)))
            prior = led if prior is None else intersection(prior, led)
        prior = prior or EMPTY
        written = 0
        discovered = False
        for ident in sorted(known | set(parts)):
            if allowed is not None and ident not in allowed:
                continue
            sid = make_stream_id(factor.sink, u + ((key, ident),))
            is_new = ident not in known
            cover = entry.intervals_to_compute
            if is_new:
                cover = union(cover, prior)
            cover = difference(cover, self._ledger(channel, sid))
            if not cover:
                continue
            items = [i for i in parts.get(ident, []) if cover.member(i.timestamp)]
            channel.ensure_stream(sid)
            channel.write(sid, items, cover, provenance)
            written += len(items)
            if is_new:
                with self._lock:
                    plan.tree.add(key, ident, parent_path)
                discovered = True
        if discovered:
            with self._lock:
                self._persist_tree(workflow, plan.tree)
        return written

    def run(self, workflow: Workflow, requested: Optional[TimeIntervalSet] = None, base_dir=None) -> ExecutionReport:
        return self.execute(self.plan(workflow, requested, base_dir))

    # online

    def high_water_mark(self, workflow: Workflow) -> Optional[int]:
        """Lowest ledger end among the workflow's existing leaf streams."""
        tree = self.tree_for(workflow)
        consumed = {s for f in workflow.factors for s in f.sources}
        ends = []
        for node in workflow.nodes:
            if node.node_id in consumed:
                continue
            channel = self.channels[node.channel]
            for v in self._values(workflow, node.plate, tree):
                sid = make_stream_id(node.node_id, v)
                led = self._ledger(channel, sid)
                if led:
                    ends.append(led.end)
        return min(ends) if ends else None

    def run_online(self, workflows: list, poll_period: int = 1000, watermark_lag: int = 5000,
                   stop: Optional[threading.Event] = None, clock: Optional[Callable[[], int]] = None,
                   max_iterations: Optional[int] = None,
                   on_iteration: Optional[Callable[[int, list], None]] = None) -> int:
        """Keep every workflow computed up to ``now - watermark_lag``.

        ``poll_period`` and ``watermark_lag`` are milliseconds; ``clock``
        returns epoch milliseconds.  Returns the number of iterations run
        once ``stop`` is set (or ``max_iterations`` is reached).
        """
        for wf in workflows:
            if wf.mode != "online":
                raise ValueError(f"workflow {wf.workflow_id} is offline_only")
        stop = stop or threading.Event()
        clock = clock or (lambda: int(time.time() * 1000))
        last_high = {}
        for wf in workflows:
            mark = self.high_water_mark(wf)
            if mark is None and wf.requested_intervals:
                mark = wf.requested_intervals.start
            last_high[wf.workflow_id] = mark
        failures = Counter()
        quarantined = {wf.workflow_id: set() for wf in workflows}
        iteration = 0
        while not stop.is_set():
            started = time.monotonic()
            high = clock() - watermark_lag
            reports = []
            for wf in workflows:
                if stop.is_set():
                    break
                lo = last_high[wf.workflow_id]
                if lo is None:
                    lo = high - poll_period
                if high <= lo:
                    continue
                try:
                    plan = self.plan(wf, TimeIntervalSet([TimeInterval(lo, high)]))
                except StreamflowError as exc:
                    log_event("failure", workflow=wf.workflow_id, error=str(exc))
                    continue
                report = self.execute(plan, stop=stop, skip=quarantined[wf.workflow_id])
                reports.append(report)
                retry = False
                for e in report.failures:
                    if e.error == "quarantined":
                        continue
                    key = (e.factor_id, e.plate_value)
                    failures[(wf.workflow_id, key)] += 1
                    if failures[(wf.workflow_id, key)] > self.retry_limit:
                        quarantined[wf.workflow_id].add(key)
                        log_event("quarantine", workflow=wf.workflow_id, factor=e.factor_id,
                                  plate_value=list(e.plate_value), error=e.error)
                    else:
                        retry = True
                if not retry and not report.stopped:
                    last_high[wf.workflow_id] = high
            iteration += 1
            if on_iteration is not None:
                on_iteration(iteration, reports)
            if max_iterations is not None and iteration >= max_iterations:
                break
            remaining = poll_period / 1000 - (time.monotonic() - started)
            if remaining > 0:
                stop.wait(remaining)
        return iteration


def plan(workflow: Workflow, requested: TimeIntervalSet, channels: ChannelSet) -> ExecutionPlan:
    return Engine(channels).plan(workflow, requested)


def execute(plan: ExecutionPlan, channels: ChannelSet) -> ExecutionReport:
    return Engine(channels).execute(plan)
