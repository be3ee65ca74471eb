"""Command-line entry point.

Subcommands:

* ``generate``  write a random workload XML file
* ``run``       simulate one workload under one heuristic
* ``compare``   sweep heuristics x seeds over generated or given workloads
* ``verify``    cross-check the router and placement heuristics against
                exhaustive oracles

Exit codes: 0 success, 1 usage, 2 I/O, 3 validation, 4 oracle failure.
"""
from __future__ import annotations

import argparse
import heapq
import json
import random
import sys
from typing import Callable, Sequence

from .heuristics import (
    HEURISTIC_NAMES,
    MapRequest,
    map_mac,
    map_mmc,
    map_pl,
    ring_limit,
    spiral_ring,
)
from .model import (
    ArchGraph,
    ChannelLoadLedger,
    Coord,
    MappingState,
    Task,
    TaskKind,
    ValidationError,
    compatible,
)
from .routing import RoutePolicy, enumerate_objectives, min_load_route, route
from .sim import DeadlockError, Scenario, SimReport, simulate, write_event_log
from .workload import GenConfig, generate_workload, parse_workload_file, write_report, write_workload

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_IO = 2
EXIT_VALIDATION = 3
EXIT_ORACLE = 4


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str) -> None:  # type: ignore[override]
        raise _UsageError(message)


def _build_arch(args: argparse.Namespace) -> ArchGraph:
    layout_file = getattr(args, "layout_file", None)
    if layout_file:
        with open(layout_file, "r", encoding="utf-8") as fh:
            try:
                layout = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ValidationError(f"layout file {layout_file}: {exc}") from None
        try:
            return ArchGraph.uniform(
                int(layout["width"]),
                int(layout["height"]),
                manager=tuple(layout.get("manager", (0, 0))),
                ra=[tuple(c) for c in layout.get("ra", ())],
            )
        except (KeyError, TypeError) as exc:
            raise ValidationError(f"layout file {layout_file}: bad structure ({exc})") from None
    width = getattr(args, "width", 8)
    height = getattr(args, "height", 8)
    if (width, height) == (8, 8):
        return ArchGraph.default_8x8()
    # Custom meshes without a layout file carry no hardware tiles; workloads
    # with hardware tasks then fail platform validation.
    return ArchGraph.uniform(width, height)


def _add_mesh_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--width", type=int, default=8, help="mesh width (default 8)")
    p.add_argument("--height", type=int, default=8, help="mesh height (default 8)")
    p.add_argument("--layout-file", help="JSON tile layout overriding width/height")


def cmd_generate(args: argparse.Namespace) -> int:
    if args.apps < 1:
        raise _UsageError("--apps must be >= 1")
    apps = generate_workload(GenConfig(app_count=args.apps, seed=args.seed))
    write_workload(apps, args.out)
    print(f"wrote {len(apps)} applications to {args.out}")
    return EXIT_OK


def cmd_run(args: argparse.Namespace) -> int:
    apps = parse_workload_file(args.workload)
    arch = _build_arch(args)
    policy = RoutePolicy(args.route) if args.route else None
    report = simulate(
        Scenario(apps=apps, heuristic=args.heuristic, route_policy=policy, seed=args.seed, arch=arch)
    )
    write_report([report], args.out)
    if args.events:
        write_event_log(report.event_log, args.events)
    print(
        f"{report.heuristic}: makespan={report.makespan} total_energy={report.total_energy} "
        f"peak_link_load={report.peak_link_load}"
    )
    return EXIT_OK


def cmd_compare(args: argparse.Namespace) -> int:
    heuristics = [h.strip() for h in args.heuristics.split(",") if h.strip()]
    for h in heuristics:
        if h not in HEURISTIC_NAMES:
            raise _UsageError(
                f"unknown heuristic {h!r} (valid: {', '.join(HEURISTIC_NAMES)})"
            )
    if args.seeds < 1:
        raise _UsageError("--seeds must be >= 1")
    if (args.workload is None) == (args.apps is None):
        raise _UsageError("exactly one of --workload or --apps is required")
    if args.apps is not None and args.apps < 1:
        raise _UsageError("--apps must be >= 1")
    arch = _build_arch(args)
    policy = RoutePolicy(args.route) if args.route else None
    workloads: dict[int, list] = {}
    for seed in range(1, args.seeds + 1):
        if args.workload is not None:
            workloads[seed] = parse_workload_file(args.workload)
        else:
            workloads[seed] = generate_workload(GenConfig(app_count=args.apps, seed=seed))
    reports: list[SimReport] = []
    for h in heuristics:
        for seed in range(1, args.seeds + 1):
            reports.append(
                simulate(
                    Scenario(
                        apps=workloads[seed],
                        heuristic=h,
                        route_policy=policy,
                        seed=seed,
                        arch=arch,
                    )
                )
            )
    write_report(reports, args.out)
    for line in summarize(reports):
        print(line)
    return EXIT_OK


def summarize(reports: Sequence[SimReport]) -> list[str]:
    """Per-heuristic means over the sorted report rows."""
    ordered = sorted(reports, key=lambda r: (r.heuristic, r.seed))
    lines = []
    for h in sorted({r.heuristic for r in ordered}):
        rows = [r for r in ordered if r.heuristic == h]
        n = len(rows)
        lines.append(
            f"{h} runs={n}"
            f" makespan={sum(r.makespan for r in rows) / n!r}"
            f" total_energy={sum(r.total_energy for r in rows) / n!r}"
            f" peak_link_load={sum(r.peak_link_load for r in rows) / n!r}"
            f" mapping_evaluations={sum(r.mapping_evaluations for r in rows) / n!r}"
            f" max_queue_wait={sum(r.max_queue_wait for r in rows) / n!r}"
        )
    return lines


# ---------------------------------------------------------------------------
# verify: oracle suites


def _hop_first_route(src, dst, ledger, arch):
    # Deliberately wrong priority order (hops before load); only reachable
    # through the hidden fault-injection flag, to prove the harness can fail.
    if src == dst:
        return (src,)
    dist = {src: (0, 0)}
    parent = {}
    heap = [(0, 0, arch.linear_index(src), src)]
    done = set()
    while heap:
        hops, load, _, u = heapq.heappop(heap)
        if u in done:
            continue
        done.add(u)
        if u == dst:
            break
        for v in arch.neighbors(u):
            if v in done:
                continue
            cand = (hops + 1, load + ledger.load((u, v)))
            if v not in dist or cand < dist[v]:
                dist[v] = cand
                parent[v] = u
                heapq.heappush(heap, (cand[0], cand[1], arch.linear_index(v), v))
    path = [dst]
    while path[-1] != src:
        path.append(parent[path[-1]])
    path.reverse()
    return tuple(path)


def _random_ledger(arch: ArchGraph, seed: int) -> ChannelLoadLedger:
    ledger = ChannelLoadLedger(arch)
    if seed == 0:
        return ledger  # all-zero edge case
    rng = random.Random(seed)
    for link in arch.links():
        ledger.set_load(link, rng.randint(0, 500))
    return ledger


def verify_routing(ledgers: int, fault: bool, report: Callable[[str], None]) -> tuple[int, int]:
    """Router objective equals exhaustive enumeration on small meshes."""
    router = _hop_first_route if fault else min_load_route
    checks = failures = 0
    for size in (2, 3, 4):
        arch = ArchGraph.uniform(size, size)
        for seed in range(ledgers):
            ledger = _random_ledger(arch, seed)
            for src in arch.coords():
                best = enumerate_objectives(src, ledger, arch)
                for dst in arch.coords():
                    if src == dst:
                        continue
                    path = router(src, dst, ledger, arch)
                    got = (
                        sum(ledger.load(l) for l in zip(path, path[1:])),
                        len(path) - 1,
                    )
                    want = best[dst][:2]
                    checks += 1
                    if got != want:
                        failures += 1
                        if failures == 1:
                            loads = {
                                l: v for l, v in ledger.loads().items() if v
                            }
                            report(
                                f"counterexample: mesh {size}x{size} seed {seed} "
                                f"{src}->{dst}: got (load,hops)={got}, oracle={want}; "
                                f"nonzero loads {loads}"
                            )
    return checks, failures


def _verify_arch_4x4() -> ArchGraph:
    return ArchGraph.uniform(4, 4, manager=(0, 0), ra=((1, 1), (2, 2), (3, 0)))


def _random_partial_state(arch: ArchGraph, seed: int) -> tuple[MappingState, MapRequest, RoutePolicy]:
    """Seeded partial mapping with loaded links and one pending request."""
    rng = random.Random(seed)
    state = MappingState(arch)
    placed: list[tuple[str, str, Coord]] = []
    for a in range(rng.randint(1, 2)):
        app = f"app{a}"
        for i in range(rng.randint(1, 4)):
            kind = TaskKind.HARDWARE if rng.random() < 0.3 else TaskKind.SOFTWARE
            if i == 0:
                kind = TaskKind.INITIAL
            free = [
                c
                for c in arch.coords()
                if state.tile_free(c) and compatible(kind, arch.kind(c))
            ]
            if not free:
                continue
            tile = free[rng.randrange(len(free))]
            task = Task(f"t{i}", kind, 100)
            state.place(app, task, tile)
            placed.append((app, task.id, tile))
    by_app: dict[str, list[tuple[str, Coord]]] = {}
    for app, tid, tile in placed:
        by_app.setdefault(app, []).append((tid, tile))
    for app, tasks in by_app.items():
        for (m, mt), (s, st) in zip(tasks, tasks[1:]):
            if rng.random() < 0.7:
                vol = rng.randint(1, 300)
                state.apply_route(app, m, s, "ms", route(RoutePolicy.XY, mt, st, state.ledger, arch), vol)
    requester_app, requester_tid, requester_tile = placed[rng.randrange(len(placed))]
    kind = TaskKind.HARDWARE if rng.random() < 0.3 else TaskKind.SOFTWARE
    vms = rng.randint(0, 300)
    vsm = rng.randint(0, 300)
    if vms + vsm == 0:
        vsm = 1
    req = MapRequest(requester_app, Task("pending", kind, 100), requester_tile, vms, vsm)
    policy = RoutePolicy.MIN_LOAD if seed % 2 else RoutePolicy.XY
    return state, req, policy


def _oracle_channel_load(
    req: MapRequest, state: MappingState, policy: RoutePolicy, average_first: bool
) -> Coord | None:
    """Brute-force argmin over candidates with independently recomputed loads."""
    arch = state.arch
    best = None
    best_key = None
    for tile in arch.coords():
        if not (state.tile_free(tile) and compatible(req.task.kind, arch.kind(tile))):
            continue
        loads = dict(state.ledger.loads())
        trial = state.ledger.copy()
        for volume, src, dst in ((req.vms, req.requester_tile, tile), (req.vsm, tile, req.requester_tile)):
            if volume >= 1:
                path = route(policy, src, dst, trial, arch)
                for link in zip(path, path[1:]):
                    loads[link] += volume
                trial.add_path(path, volume)
        peak = max(loads.values())
        total = sum(loads.values())
        primary = (total, peak) if average_first else (peak, total)
        key = (*primary, arch.linear_index(tile))
        if best_key is None or key < best_key:
            best, best_key = tile, key
    return best


def _oracle_path_load(req: MapRequest, state: MappingState, policy: RoutePolicy) -> Coord | None:
    arch = state.arch
    best = None
    best_key = None
    for tile in arch.coords():
        if not (state.tile_free(tile) and compatible(req.task.kind, arch.kind(tile))):
            continue
        there = route(policy, req.requester_tile, tile, state.ledger, arch)
        back = route(policy, tile, req.requester_tile, state.ledger, arch)
        cost = sum(state.ledger.load(l) for l in zip(there, there[1:]))
        cost += sum(state.ledger.load(l) for l in zip(back, back[1:]))
        hops = (len(there) - 1) + (len(back) - 1)
        key = (cost, hops, arch.linear_index(tile))
        if best_key is None or key < best_key:
            best, best_key = tile, key
    return best


def verify_placement(states: int, report: Callable[[str], None]) -> tuple[int, int]:
    """MMC/MAC/PL placements equal brute-force enumeration on 4x4 states."""
    arch = _verify_arch_4x4()
    checks = failures = 0
    for seed in range(states):
        state, req, policy = _random_partial_state(arch, seed)
        cases = (
            ("mmc", map_mmc(req, state, policy)[0], _oracle_channel_load(req, state, policy, False)),
            ("mac", map_mac(req, state, policy)[0], _oracle_channel_load(req, state, policy, True)),
            ("pl", map_pl(req, state, policy)[0], _oracle_path_load(req, state, policy)),
        )
        for name, got, want in cases:
            checks += 1
            if got != want:
                failures += 1
                if failures == 1:
                    report(
                        f"counterexample: heuristic {name} seed {seed} "
                        f"policy {policy.value}: got {got}, oracle {want}"
                    )
    return checks, failures


def verify_spiral(report: Callable[[str], None]) -> tuple[int, int]:
    """Concatenated rings visit every non-centre tile exactly once."""
    arch = ArchGraph.default_8x8()
    checks = failures = 0
    for center in arch.coords():
        seen: list[Coord] = []
        for hop in range(1, ring_limit(center, arch) + 1):
            seen.extend(spiral_ring(center, hop, arch))
        expected = sorted(c for c in arch.coords() if c != center)
        checks += 1
        if sorted(seen) != expected or len(seen) != len(set(seen)):
            failures += 1
            if failures == 1:
                report(f"counterexample: centre {center} rings are not a permutation")
    return checks, failures


def cmd_verify(args: argparse.Namespace) -> int:
    fault = args.inject_fault == "routing-tiebreak"
    suites = {
        "routing": lambda out: verify_routing(args.routing_ledgers, fault, out),
        "placement": lambda out: verify_placement(args.placement_states, out),
        "spiral": lambda out: verify_spiral(out),
    }
    if args.suite:
        if args.suite not in suites:
            raise _UsageError(f"unknown suite {args.suite!r} (valid: {', '.join(suites)})")
        suites = {args.suite: suites[args.suite]}
    total_failures = 0
    for name, runner in suites.items():
        checks, failures = runner(lambda msg: print(f"  {msg}"))
        total_failures += failures
        print(f"suite {name}: {checks} checks, {failures} failures")
    return EXIT_ORACLE if total_failures else EXIT_OK


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="nocmap", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="write a random workload XML file")
    p.add_argument("--apps", type=int, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("run", help="simulate one workload under one heuristic")
    p.add_argument("--workload", required=True)
    p.add_argument("--heuristic", required=True, choices=HEURISTIC_NAMES)
    p.add_argument("--route", choices=[rp.value for rp in RoutePolicy])
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--events", help="also write the event log CSV here")
    _add_mesh_flags(p)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("compare", help="sweep heuristics x seeds")
    p.add_argument("--heuristics", required=True, help="comma-separated heuristic names")
    p.add_argument("--seeds", type=int, default=1)
    p.add_argument("--apps", type=int, help="generate workloads with this many applications")
    p.add_argument("--workload", help="use this workload file for every cell")
    p.add_argument("--route", choices=[rp.value for rp in RoutePolicy])
    p.add_argument("--out", required=True)
    _add_mesh_flags(p)
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("verify", help="run the oracle cross-check suites")
    p.add_argument("--suite", help="run only this suite (routing, placement, spiral)")
    p.add_argument("--routing-ledgers", type=int, default=100, help=argparse.SUPPRESS)
    p.add_argument("--placement-states", type=int, default=100, help=argparse.SUPPRESS)
    p.add_argument(
        "--inject-fault", choices=["routing-tiebreak"], default=None, help=argparse.SUPPRESS
    )
    p.set_defaults(func=cmd_verify)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except _UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ValidationError, DeadlockError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry()
