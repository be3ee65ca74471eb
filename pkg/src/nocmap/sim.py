"""Deterministic discrete-event execution of mapped applications.

The manager admits applications, places their initial tasks, and maps every
other task on the first communication demand to it.  A task waits for all
inbound master->slave transfers, computes, then issues its outbound
communications; slave->master volumes are sent once the slave itself has
computed.  Transfers atomically reserve every directed link of their pinned
route for their whole duration and start at the earliest cycle all links are
free, which makes contention deterministic without flit-level simulation.

A route is pinned when its edge first demands communication and holds its
ledger load until the transfer is delivered (each direction transfers once);
tiles and cluster slots are freed when their application completes, and
queued admissions plus deferred mapping requests are retried at that point.
Identical scenarios produce identical reports and event logs, byte for byte.
"""
from __future__ import annotations

import csv
import heapq
from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .heuristics import (
    ClusterGrid,
    HeuristicEngine,
    HeuristicKind,
    MapRequest,
    place_initial,
)
from .model import (
    ArchGraph,
    Coord,
    DIR_MS,
    DIR_SM,
    DirectedLink,
    Edge,
    MappingState,
    NocError,
    StateError,
    Task,
    TaskGraph,
    TaskKind,
    TileKind,
    ValidationError,
    compatible,
)
from .routing import RoutePolicy, route


class DeadlockError(NocError):
    """No event can fire but applications are still incomplete."""


@dataclass
class PlatformParams:
    """Timing and energy constants of the platform.

    Defaults: software tiles take 40 cycles and 10 energy units per
    instruction, hardware tiles 20 cycles and 20 units; moving one packet
    across one link costs one energy unit; mapping decisions are free.
    """

    cycles_per_instruction: dict[TileKind, int] = field(
        default_factory=lambda: {TileKind.ISP: 40, TileKind.RA: 20}
    )
    energy_per_instruction: dict[TileKind, int] = field(
        default_factory=lambda: {TileKind.ISP: 10, TileKind.RA: 20}
    )
    energy_per_packet_hop: int = 1
    manager_overhead: int = 0

    def validate(self) -> None:
        for kind in (TileKind.ISP, TileKind.RA):
            if self.cycles_per_instruction.get(kind, -1) < 0:
                raise ValidationError(f"cycles_per_instruction missing or negative for {kind}")
            if self.energy_per_instruction.get(kind, -1) < 0:
                raise ValidationError(f"energy_per_instruction missing or negative for {kind}")
        if self.energy_per_packet_hop < 0 or self.manager_overhead < 0:
            raise ValidationError("energy and overhead parameters must be non-negative")


@dataclass
class Scenario:
    """One simulation: a workload, a heuristic and the platform it runs on.

    With ``admission_guard`` (the default) the manager admits an application
    only while the remaining per-kind tile capacity covers the whole task set
    of every running application plus the new one, which guarantees that all
    mapping requests eventually succeed.  Without the guard, admission is
    gated only by the heuristic's own rule (cluster slots, or a free tile
    for the initial task) and oversubscribed platforms can deadlock.
    """

    apps: Sequence[TaskGraph]
    heuristic: HeuristicKind | str
    route_policy: RoutePolicy | None = None  # None: the heuristic's default
    params: PlatformParams = field(default_factory=PlatformParams)
    seed: int = 0
    arrivals: Sequence[int] | None = None  # None: all at cycle 0
    arch: ArchGraph | None = None  # None: the default 8x8 platform
    admission_guard: bool = True


@dataclass(frozen=True)
class EventRecord:
    cycle: int
    kind: str
    app: str
    task: str
    location: str
    detail: str


_EVENT_KIND_ORDER = {
    k: i
    for i, k in enumerate(
        (
            "arrival",
            "admit",
            "map",
            "map_deferred",
            "compute_start",
            "compute_end",
            "comm_start",
            "comm_end",
            "app_done",
            "release",
        )
    )
}

EVENT_LOG_HEADER = ("cycle", "kind", "app", "task", "location", "detail")


@dataclass
class SimReport:
    heuristic: str
    seed: int
    app_count: int
    makespan: int
    total_energy: int
    energy_compute: int
    energy_comm: int
    peak_link_load: int
    avg_link_load: float
    mapping_evaluations: int
    per_app_finish: dict[str, int]
    queue_wait: dict[str, int]
    max_held_clusters: int
    event_log: list[EventRecord]

    @property
    def max_queue_wait(self) -> int:
        return max(self.queue_wait.values(), default=0)


def compute_time(task: Task, tile_kind: TileKind, params: PlatformParams) -> int:
    """Cycles to run the task on a tile of the given kind."""
    if not compatible(task.kind, tile_kind):
        raise StateError(f"task kind {task.kind.value} cannot run on {tile_kind.value}")
    return task.instructions * params.cycles_per_instruction[tile_kind]


def compute_energy(task: Task, tile_kind: TileKind, params: PlatformParams) -> int:
    """Energy units consumed by running the task on the given tile kind."""
    if not compatible(task.kind, tile_kind):
        raise StateError(f"task kind {task.kind.value} cannot run on {tile_kind.value}")
    return task.instructions * params.energy_per_instruction[tile_kind]


def comm_latency(volume: int, hops: int, congestion_delay: int = 0) -> int:
    """Cycles to deliver a pipelined packet stream over a fixed route.

    The head packet needs one cycle per hop and the remaining volume - 1
    packets stream behind it, so the uncontended latency is
    hops + volume - 1; any wait for the links is added on top.
    """
    if volume < 1:
        raise ValidationError(f"volume must be >= 1, got {volume}")
    if hops < 1:
        raise StateError(f"a transfer of {volume} packets needs at least one hop")
    if congestion_delay < 0:
        raise ValidationError("congestion delay must be non-negative")
    return congestion_delay + hops + volume - 1


class LinkSchedule:
    """Whole-route atomic link reservations.

    Each transfer holds every directed link on its path for its entire
    duration.  ``earliest_start`` finds the first cycle at or after the ready
    time where all links are simultaneously free for the duration, so gaps
    between existing reservations are used.
    """

    def __init__(self) -> None:
        self._busy: dict[DirectedLink, list[tuple[int, int]]] = {}

    def earliest_start(self, links: Iterable[DirectedLink], ready: int, duration: int) -> int:
        links = list(links)
        t = ready
        while True:
            bumped = t
            for link in links:
                for s, e in self._busy.get(link, ()):
                    if s < bumped + duration and e > bumped:
                        bumped = max(bumped, e)
            if bumped == t:
                return t
            t = bumped

    def reserve(self, links: Iterable[DirectedLink], start: int, duration: int) -> None:
        for link in links:
            spans = self._busy.setdefault(link, [])
            spans.append((start, start + duration))
            spans.sort()


def _tile_demand(graph: TaskGraph) -> dict[TileKind, int]:
    """Tiles of each kind the application will eventually occupy."""
    demand = {TileKind.ISP: 0, TileKind.RA: 0}
    for t in graph.tasks:
        demand[TileKind.RA if t.kind is TaskKind.HARDWARE else TileKind.ISP] += 1
    return demand


class _AppRun:
    """Bookkeeping for one application instance inside the engine."""

    def __init__(self, index: int, graph: TaskGraph, arrival: int):
        self.index = index
        self.graph = graph
        self.arrival = arrival
        self.demand = _tile_demand(graph)
        self.admitted_at: int | None = None
        self.finished_at: int | None = None
        self.cluster: int | None = None
        self.compute_started: set[str] = set()
        self.computed: set[str] = set()
        self.inbound_needed = {t.id: len(graph.incoming(t.id)) for t in graph.tasks}
        self.inbound_done = {t.id: 0 for t in graph.tasks}
        self.activated: set[tuple[str, str]] = set()
        self.comms_total = sum((e.vms >= 1) + (e.vsm >= 1) for e in graph.edges)
        self.comms_done = 0


_RANK_COMM_END = 0
_RANK_COMPUTE_END = 1
_RANK_COMM_READY = 2
_RANK_ARRIVAL = 3


class _Engine:
    def __init__(self, scenario: Scenario):
        self.scenario = scenario
        self.arch = scenario.arch or ArchGraph.default_8x8()
        self.params = scenario.params
        self.params.validate()
        apps = list(scenario.apps)
        if not apps:
            raise ValidationError("scenario needs at least one application")
        if len({g.app_id for g in apps}) != len(apps):
            raise ValidationError("application ids must be unique within a scenario")
        arrivals = list(scenario.arrivals) if scenario.arrivals is not None else [0] * len(apps)
        if len(arrivals) != len(apps):
            raise ValidationError("arrivals must match the application count")
        if any(a < 0 for a in arrivals):
            raise ValidationError("arrival cycles must be non-negative")
        self._check_platform_coverage(apps)
        self.h = HeuristicEngine(scenario.heuristic, scenario.route_policy)
        self.policy = self.h.route_policy
        self.grid = ClusterGrid.for_mesh(self.arch) if self.h.kind is HeuristicKind.SPIRAL else None
        self.apps = [_AppRun(i, g, arrivals[i]) for i, g in enumerate(apps)]
        self.by_id = {r.graph.app_id: r for r in self.apps}
        self.state = MappingState(self.arch)
        self.links_sched = LinkSchedule()
        self.heap: list[tuple[int, int, tuple]] = []
        self.queue: deque[int] = deque()
        self.deferred: dict[tuple[str, str, str], tuple[_AppRun, Edge]] = {}
        self.held: set[int] = set()
        self.max_held = 0
        self.capacity = {
            TileKind.ISP: self.arch.count_kind(TileKind.ISP),
            TileKind.RA: self.arch.count_kind(TileKind.RA),
        }
        self.running_demand = {TileKind.ISP: 0, TileKind.RA: 0}
        self.released = False
        self.pump = False
        self.energy_compute = 0
        self.energy_comm = 0
        self.peak_seen = 0
        self.avg_seen = 0.0
        self.events: list[EventRecord] = []

    def _check_platform_coverage(self, apps: Sequence[TaskGraph]) -> None:
        kinds = {t.kind for g in apps for t in g.tasks}
        tiles = [self.arch.kind(c) for c in self.arch.coords()]
        for task_kind in sorted(kinds, key=lambda k: k.value):
            if not any(compatible(task_kind, tk) for tk in tiles):
                raise ValidationError(
                    f"platform has no compatible tiles for {task_kind.value} tasks"
                )
        capacity = {k: tiles.count(k) for k in (TileKind.ISP, TileKind.RA)}
        for g in apps:
            for kind, need in _tile_demand(g).items():
                if need > capacity[kind]:
                    raise ValidationError(
                        f"application {g.app_id!r} needs {need} {kind.value} tiles "
                        f"but the platform has {capacity[kind]}"
                    )

    def _log(self, cycle: int, kind: str, app: str, task: str, location: str, detail: str) -> None:
        self.events.append(EventRecord(cycle, kind, app, task, location, detail))

    def _sample_ledger(self) -> None:
        self.peak_seen = max(self.peak_seen, self.state.ledger.peak_load())
        self.avg_seen = max(self.avg_seen, self.state.ledger.avg_load())

    # -- event handlers -------------------------------------------------

    def run(self) -> SimReport:
        for r in self.apps:
            heapq.heappush(self.heap, (r.arrival, _RANK_ARRIVAL, (r.index,)))
        while self.heap:
            t = self.heap[0][0]
            while self.heap and self.heap[0][0] == t:
                _, rank, key = heapq.heappop(self.heap)
                if rank == _RANK_COMM_END:
                    self._on_comm_end(t, *key)
                elif rank == _RANK_COMPUTE_END:
                    self._on_compute_end(t, *key)
                elif rank == _RANK_COMM_READY:
                    self._on_comm_ready(t, *key)
                else:
                    self._on_arrival(t, *key)
            self._housekeeping(t)
        unfinished = [r.graph.app_id for r in self.apps if r.finished_at is None]
        if unfinished:
            raise DeadlockError(
                "simulation stalled: "
                f"unfinished apps {unfinished}, queued {list(self.queue)}, "
                f"deferred {sorted(self.deferred)}"
            )
        return self._report()

    def _on_arrival(self, t: int, index: int) -> None:
        self._log(t, "arrival", self.apps[index].graph.app_id, "", "", "")
        self.queue.append(index)
        self.pump = True

    def _on_compute_end(self, t: int, app_id: str, tid: str) -> None:
        run = self.by_id[app_id]
        run.computed.add(tid)
        tile = self.state.task_tile(app_id, tid)
        task = run.graph.task(tid)
        energy = compute_energy(task, self.arch.kind(tile), self.params)
        self.energy_compute += energy
        self._log(
            t, "compute_end", app_id, tid, _fmt_tile(tile),
            f"instructions={task.instructions};energy={energy}",
        )
        for edge in run.graph.incoming(tid):
            if edge.vsm >= 1:
                master_tile = self.state.task_tile(app_id, edge.mtid)
                path = route(self.policy, tile, master_tile, self.state.ledger, self.arch)
                self.state.apply_route(app_id, edge.mtid, edge.stid, DIR_SM, path, edge.vsm)
                self._sample_ledger()
                heapq.heappush(
                    self.heap, (t, _RANK_COMM_READY, (app_id, edge.mtid, edge.stid, DIR_SM))
                )
        for edge in run.graph.outgoing(tid):
            self._activate_edge(run, edge, t)
        self._check_complete(run, t)

    def _on_comm_ready(self, t: int, app_id: str, mtid: str, stid: str, direction: str) -> None:
        path, volume = self.state.routes[(app_id, mtid, stid, direction)]
        hops = len(path) - 1
        duration = comm_latency(volume, hops)
        links = list(zip(path, path[1:]))
        start = self.links_sched.earliest_start(links, t, duration)
        self.links_sched.reserve(links, start, duration)
        self._log(
            start, "comm_start", app_id, f"{mtid}->{stid}:{direction}",
            _fmt_span(path), f"volume={volume};hops={hops};wait={start - t}",
        )
        heapq.heappush(
            self.heap, (start + duration, _RANK_COMM_END, (app_id, mtid, stid, direction))
        )

    def _on_comm_end(self, t: int, app_id: str, mtid: str, stid: str, direction: str) -> None:
        run = self.by_id[app_id]
        path, volume = self.state.routes[(app_id, mtid, stid, direction)]
        hops = len(path) - 1
        energy = volume * hops * self.params.energy_per_packet_hop
        self.energy_comm += energy
        run.comms_done += 1
        self._log(
            t, "comm_end", app_id, f"{mtid}->{stid}:{direction}",
            _fmt_span(path), f"volume={volume};hops={hops};energy={energy}",
        )
        # One transfer per direction: the delivered route releases its links.
        self.state.remove_route((app_id, mtid, stid, direction))
        if direction == DIR_MS:
            run.inbound_done[stid] += 1
            self._maybe_start_compute(run, stid, t)
        self._check_complete(run, t)

    # -- mapping and admission -------------------------------------------

    def _activate_edge(self, run: _AppRun, edge: Edge, t: int) -> bool:
        app_id = run.graph.app_id
        key = (app_id, edge.mtid, edge.stid)
        if (edge.mtid, edge.stid) in run.activated:
            return True
        slave_tile = self.state.task_tile(app_id, edge.stid)
        mapped_now = False
        if slave_tile is None:
            master_tile = self.state.task_tile(app_id, edge.mtid)
            req = MapRequest(app_id, run.graph.task(edge.stid), master_tile, edge.vms, edge.vsm)
            before = self.h.evaluations
            slave_tile = self.h.place(req, self.state)
            examined = self.h.evaluations - before
            if slave_tile is None:
                if key not in self.deferred:
                    self.deferred[key] = (run, edge)
                    self._log(t, "map_deferred", app_id, edge.stid, "", f"examined={examined}")
                return False
            self.state.place(app_id, run.graph.task(edge.stid), slave_tile)
            self._log(t, "map", app_id, edge.stid, _fmt_tile(slave_tile), f"examined={examined}")
            mapped_now = True
        self.deferred.pop(key, None)
        run.activated.add((edge.mtid, edge.stid))
        t_eff = t + self.params.manager_overhead if mapped_now else t
        master_tile = self.state.task_tile(app_id, edge.mtid)
        # The slave->master route is pinned later, when the slave has computed
        # and actually issues that transfer.
        if edge.vms >= 1:
            path = route(self.policy, master_tile, slave_tile, self.state.ledger, self.arch)
            self.state.apply_route(app_id, edge.mtid, edge.stid, DIR_MS, path, edge.vms)
            self._sample_ledger()
            heapq.heappush(
                self.heap, (t_eff, _RANK_COMM_READY, (app_id, edge.mtid, edge.stid, DIR_MS))
            )
        else:
            run.inbound_done[edge.stid] += 1
            self._maybe_start_compute(run, edge.stid, t_eff)
        return True

    def _maybe_start_compute(self, run: _AppRun, tid: str, t: int) -> None:
        if tid in run.compute_started:
            return
        if run.inbound_done[tid] < run.inbound_needed[tid]:
            return
        app_id = run.graph.app_id
        tile = self.state.task_tile(app_id, tid)
        if tile is None:
            return
        task = run.graph.task(tid)
        cycles = compute_time(task, self.arch.kind(tile), self.params)
        run.compute_started.add(tid)
        self._log(t, "compute_start", app_id, tid, _fmt_tile(tile), f"cycles={cycles}")
        heapq.heappush(self.heap, (t + cycles, _RANK_COMPUTE_END, (app_id, tid)))

    def _check_complete(self, run: _AppRun, t: int) -> None:
        if run.finished_at is not None:
            return
        if len(run.computed) < len(run.graph.tasks) or run.comms_done < run.comms_total:
            return
        run.finished_at = t
        app_id = run.graph.app_id
        self._log(t, "app_done", app_id, "", "", f"finish={t}")
        self.state.release_app(app_id)
        self._sample_ledger()
        if run.cluster is not None:
            self.held.discard(run.cluster)
        for kind, n in run.demand.items():
            self.running_demand[kind] -= n
        self._log(t, "release", app_id, "", "", "")
        self.released = True

    def _housekeeping(self, t: int) -> None:
        if self.released:
            self.released = False
            self._retry_deferred(t)
            self.pump = True
        if self.pump:
            self.pump = False
            self._admit_from_queue(t)

    def _retry_deferred(self, t: int) -> None:
        for key in sorted(self.deferred):
            if key not in self.deferred:
                continue
            run, edge = self.deferred[key]
            self._activate_edge(run, edge, t)

    def _fits_capacity(self, run: _AppRun) -> bool:
        return all(
            self.running_demand[kind] + run.demand[kind] <= self.capacity[kind]
            for kind in run.demand
        )

    def _admit_from_queue(self, t: int) -> None:
        while self.queue:
            run = self.apps[self.queue[0]]
            graph = run.graph
            initial = graph.initial
            cluster: int | None = None
            if self.scenario.admission_guard and not self._fits_capacity(run):
                break
            if self.grid is not None:
                res = place_initial(self.grid, self.held, self.state)
                if res is None:
                    break
                cluster, tile, examined = res
                self.h.evaluations += examined
            else:
                req = MapRequest(graph.app_id, initial, self.arch.manager, 0, 0)
                before = self.h.evaluations
                tile = self.h.place(req, self.state)
                examined = self.h.evaluations - before
                if tile is None:
                    break
            self.queue.popleft()
            self.state.place(graph.app_id, initial, tile)
            run.admitted_at = t
            run.cluster = cluster
            for kind, n in run.demand.items():
                self.running_demand[kind] += n
            if cluster is not None:
                self.held.add(cluster)
                self.max_held = max(self.max_held, len(self.held))
            detail = f"wait={t - run.arrival}"
            if cluster is not None:
                detail += f";cluster={cluster}"
            self._log(t, "admit", graph.app_id, "", "", detail)
            self._log(t, "map", graph.app_id, initial.id, _fmt_tile(tile), f"examined={examined}")
            self._maybe_start_compute(run, initial.id, t + self.params.manager_overhead)

    # -- reporting --------------------------------------------------------

    def _report(self) -> SimReport:
        kind = self.h.kind.value
        events = sorted(
            self.events,
            key=lambda e: (e.cycle, _EVENT_KIND_ORDER[e.kind], e.app, e.task, e.location),
        )
        return SimReport(
            heuristic=kind,
            seed=self.scenario.seed,
            app_count=len(self.apps),
            makespan=max(r.finished_at for r in self.apps),
            total_energy=self.energy_compute + self.energy_comm,
            energy_compute=self.energy_compute,
            energy_comm=self.energy_comm,
            peak_link_load=self.peak_seen,
            avg_link_load=self.avg_seen,
            mapping_evaluations=self.h.evaluations,
            per_app_finish={r.graph.app_id: r.finished_at for r in self.apps},
            queue_wait={r.graph.app_id: r.admitted_at - r.arrival for r in self.apps},
            max_held_clusters=self.max_held,
            event_log=events,
        )


def _fmt_tile(c: Coord) -> str:
    return f"{c[0]},{c[1]}"


def _fmt_span(path: Sequence[Coord]) -> str:
    return f"{_fmt_tile(path[0])}->{_fmt_tile(path[-1])}"


def simulate(scenario: Scenario) -> SimReport:
    """Run one scenario to completion and return its metrics and event log."""
    return _Engine(scenario).run()


def run_comparison(scenarios: Sequence[Scenario]) -> list[SimReport]:
    """Simulate scenarios that share a workload but differ in heuristic."""
    if not scenarios:
        raise ValidationError("no scenarios to compare")
    first = scenarios[0]
    for other in scenarios[1:]:
        if list(other.apps) != list(first.apps):
            raise ValidationError("comparison scenarios must share the same workload")
        if other.params != first.params or other.seed != first.seed:
            raise ValidationError("comparison scenarios must share params and seed")
        if list(other.arrivals or []) != list(first.arrivals or []):
            raise ValidationError("comparison scenarios must share arrival times")
        if other.admission_guard != first.admission_guard:
            raise ValidationError("comparison scenarios must share the admission policy")
        if (other.arch or ArchGraph.default_8x8()) != (first.arch or ArchGraph.default_8x8()):
            raise ValidationError("comparison scenarios must share the platform")
    return [simulate(s) for s in scenarios]


def write_event_log(events: Iterable[EventRecord], path: str) -> None:
    """Write the event log as UTF-8 CSV with LF line endings."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(EVENT_LOG_HEADER)
        for e in events:
            writer.writerow([e.cycle, e.kind, e.app, e.task, e.location, e.detail])
