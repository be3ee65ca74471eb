"""Runtime placement heuristics behind one interface.

Seven policies decide which free tile receives a newly requested task:

* ``ff``     first free: round-robin linear scan with a persistent cursor
* ``mmc``    minimise the resulting peak channel load
* ``mac``    minimise the resulting average (total) channel load
* ``nn``     nearest neighbour: closest free compatible tile, Manhattan shells
* ``pl``     path load: cheapest communication path over all free tiles
* ``bn``     best neighbour: path-load choice within the nearest shell
* ``spiral`` ring-by-ring clockwise scan around the requesting tile, with
  cluster-centre placement for initial tasks

Every heuristic is a pure function of (request, state); ``ff`` additionally
threads its cursor.  Each returns the chosen tile (or ``None`` when no free
compatible tile exists) plus the number of candidate tiles it examined,
which callers aggregate as a mapping-effort proxy.
"""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from math import ceil
from typing import Iterable

from .model import (
    ArchGraph,
    Coord,
    MappingState,
    StateError,
    Task,
    TaskKind,
    ValidationError,
    compatible,
    manhattan,
)
from .routing import RoutePolicy, path_cost, path_hops, route


class HeuristicKind(Enum):
    FF = "ff"
    MMC = "mmc"
    MAC = "mac"
    NN = "nn"
    PL = "pl"
    BN = "bn"
    SPIRAL = "spiral"


HEURISTIC_NAMES = tuple(k.value for k in HeuristicKind)

# Reference heuristics pair with deterministic XY routing; the spiral policy
# pairs with the load-aware router.
DEFAULT_ROUTE_POLICY = {
    HeuristicKind.FF: RoutePolicy.XY,
    HeuristicKind.MMC: RoutePolicy.XY,
    HeuristicKind.MAC: RoutePolicy.XY,
    HeuristicKind.NN: RoutePolicy.XY,
    HeuristicKind.PL: RoutePolicy.XY,
    HeuristicKind.BN: RoutePolicy.XY,
    HeuristicKind.SPIRAL: RoutePolicy.MIN_LOAD,
}


@dataclass(frozen=True)
class MapRequest:
    """Demand to place one task, raised by the tile running its master.

    ``requester_tile`` is None only for initial tasks under cluster placement;
    reference heuristics use the manager tile as the requester instead.
    ``vms``/``vsm`` are the packet volumes of the triggering edge (0/0 for
    initial tasks, which have no inbound edge).
    """

    app: str
    task: Task
    requester_tile: Coord | None
    vms: int
    vsm: int


def spiral_ring(center: Coord, hop: int, arch: ArchGraph) -> list[Coord]:
    """Tiles on the Chebyshev ring of radius ``hop``, clockwise from the west.

    Enumeration starts at (cx-hop, cy), climbs the west edge, crosses the
    north edge, descends the east edge, crosses the south edge and climbs
    back towards the start.  Off-mesh positions are skipped; the order of
    the survivors is preserved.
    """
    arch.require_in_mesh(center)
    if hop < 1:
        raise ValidationError(f"ring radius must be >= 1, got {hop}")
    cx, cy = center
    ring: list[Coord] = []
    ring += [(cx - hop, y) for y in range(cy, cy - hop - 1, -1)]
    ring += [(x, cy - hop) for x in range(cx - hop + 1, cx + hop + 1)]
    ring += [(cx + hop, y) for y in range(cy - hop + 1, cy + hop + 1)]
    ring += [(x, cy + hop) for x in range(cx + hop - 1, cx - hop - 1, -1)]
    ring += [(cx - hop, y) for y in range(cy + hop - 1, cy, -1)]
    return [c for c in ring if arch.in_mesh(c)]


def ring_limit(center: Coord, arch: ArchGraph) -> int:
    """Largest Chebyshev radius with mesh tiles around ``center``."""
    cx, cy = center
    return max(cx, arch.width - 1 - cx, cy, arch.height - 1 - cy)


def manhattan_shell(center: Coord, n: int, arch: ArchGraph) -> list[Coord]:
    """In-mesh tiles at Manhattan distance exactly ``n``, raster order."""
    if n < 1:
        raise ValidationError(f"shell distance must be >= 1, got {n}")
    cx, cy = center
    shell: list[Coord] = []
    for y in range(max(0, cy - n), min(arch.height, cy + n + 1)):
        dx = n - abs(y - cy)
        xs = (cx - dx, cx + dx) if dx > 0 else (cx,)
        shell += [(x, y) for x in xs if 0 <= x < arch.width]
    return shell


def shell_limit(center: Coord, arch: ArchGraph) -> int:
    """Largest Manhattan distance with mesh tiles around ``center``."""
    cx, cy = center
    return max(cx, arch.width - 1 - cx) + max(cy, arch.height - 1 - cy)


@dataclass(frozen=True)
class Cluster:
    """Inclusive rectangular mesh region with its centre tile."""

    x0: int
    y0: int
    x1: int
    y1: int
    center: Coord

    def contains(self, c: Coord) -> bool:
        return self.x0 <= c[0] <= self.x1 and self.y0 <= c[1] <= self.y1


def _bands(n: int) -> list[tuple[int, int]]:
    # Up to three contiguous bands, larger ones first (8 -> 3,3,2).
    if n >= 3:
        s0 = ceil(n / 3)
        s1 = ceil((n - s0) / 2)
        return [(0, s0 - 1), (s0, s0 + s1 - 1), (s0 + s1, n - 1)]
    return [(i, i) for i in range(n)]


# Admission order for the default 8x8 grid: corners first, then the centre,
# then the edge midpoints, spreading concurrently admitted applications as
# far apart as possible.  Indices refer to clusters in raster order.
_ADMISSION_8X8 = (0, 8, 6, 2, 4, 3, 5, 1, 7)


class ClusterGrid:
    """Partition of the mesh into rectangular clusters for initial placement."""

    def __init__(self, clusters: Iterable[Cluster], admission_order: Iterable[int]):
        self.clusters = tuple(clusters)
        self.admission_order = tuple(admission_order)
        if sorted(self.admission_order) != list(range(len(self.clusters))):
            raise ValidationError("admission order must permute the cluster indices")
        for cl in self.clusters:
            if not cl.contains(cl.center):
                raise ValidationError(f"cluster centre {cl.center} outside its rectangle")

    @classmethod
    def for_mesh(cls, arch: ArchGraph) -> "ClusterGrid":
        clusters = []
        for y0, y1 in _bands(arch.height):
            for x0, x1 in _bands(arch.width):
                clusters.append(Cluster(x0, y0, x1, y1, ((x0 + x1) // 2, (y0 + y1) // 2)))
        if (arch.width, arch.height) == (8, 8):
            order = _ADMISSION_8X8
        else:
            order = _greedy_spread(clusters, arch)
        return cls(clusters, order)


def _greedy_spread(clusters: list[Cluster], arch: ArchGraph) -> tuple[int, ...]:
    """Max-min-distance greedy ordering of cluster centres for small meshes."""
    remaining = list(range(len(clusters)))
    start = min(remaining, key=lambda i: arch.linear_index(clusters[i].center))
    order = [start]
    remaining.remove(start)
    while remaining:
        def score(i: int) -> tuple[int, int, int]:
            ds = [manhattan(clusters[i].center, clusters[j].center) for j in order]
            return (min(ds), sum(ds), -arch.linear_index(clusters[i].center))

        nxt = max(remaining, key=score)
        order.append(nxt)
        remaining.remove(nxt)
    return tuple(order)


def _free_compatible(state: MappingState, c: Coord, kind: TaskKind) -> bool:
    return state.tile_free(c) and compatible(kind, state.arch.kind(c))


def place_initial(
    grid: ClusterGrid, held: set[int], state: MappingState, kind: TaskKind = TaskKind.INITIAL
) -> tuple[int, Coord, int] | None:
    """Pick the next free cluster and a tile at or near its centre.

    Returns (cluster index, tile, tiles examined), or None when every cluster
    is held or no free compatible tile exists; the caller queues the
    application in that case.  The ring search may spill over the cluster
    border: cluster frontiers are virtual.
    """
    arch = state.arch
    for ci in grid.admission_order:
        if ci in held:
            continue
        center = grid.clusters[ci].center
        examined = 1
        if _free_compatible(state, center, kind):
            return ci, center, examined
        for hop in range(1, ring_limit(center, arch) + 1):
            for tile in spiral_ring(center, hop, arch):
                examined += 1
                if _free_compatible(state, tile, kind):
                    return ci, tile, examined
        return None
    return None


def map_spiral(req: MapRequest, state: MappingState) -> tuple[Coord | None, int]:
    """First free compatible tile scanning rings outward from the requester."""
    if req.requester_tile is None:
        raise StateError("spiral placement requires a requester tile")
    arch = state.arch
    examined = 0
    for hop in range(1, ring_limit(req.requester_tile, arch) + 1):
        for tile in spiral_ring(req.requester_tile, hop, arch):
            examined += 1
            if _free_compatible(state, tile, req.task.kind):
                return tile, examined
    return None, examined


def map_ff(req: MapRequest, state: MappingState, cursor: int) -> tuple[Coord | None, int, int]:
    """Next free compatible tile after a persistent wrapping linear cursor.

    Returns (tile, advanced cursor, tiles examined).  The cursor moves past
    the chosen tile so every compatible tile is used once per sweep before
    any tile is considered again.
    """
    arch = state.arch
    n = arch.width * arch.height
    for i in range(n):
        idx = (cursor + i) % n
        tile = arch.coord_at(idx)
        if _free_compatible(state, tile, req.task.kind):
            return tile, (idx + 1) % n, i + 1
    return None, cursor, n


def map_nn(req: MapRequest, state: MappingState) -> tuple[Coord | None, int]:
    """Nearest free compatible tile; shells scanned in raster order."""
    if req.requester_tile is None:
        raise StateError("nearest-neighbour placement requires a requester tile")
    arch = state.arch
    examined = 0
    for n in range(1, shell_limit(req.requester_tile, arch) + 1):
        for tile in manhattan_shell(req.requester_tile, n, arch):
            examined += 1
            if _free_compatible(state, tile, req.task.kind):
                return tile, examined
    return None, examined


def _candidates(state: MappingState, kind: TaskKind) -> list[Coord]:
    return [c for c in state.arch.coords() if _free_compatible(state, c, kind)]


def _tentative_load_key(
    req: MapRequest, state: MappingState, tile: Coord, policy: RoutePolicy
) -> tuple[int, int]:
    """(peak, total) ledger loads after tentatively routing both directions."""
    arch = state.arch
    ledger = state.ledger
    applied: list[tuple[tuple[Coord, ...], int]] = []
    for volume, src, dst in ((req.vms, req.requester_tile, tile), (req.vsm, tile, req.requester_tile)):
        if volume >= 1:
            path = route(policy, src, dst, ledger, arch)
            ledger.add_path(path, volume)
            applied.append((path, volume))
    key = (ledger.peak_load(), ledger.total_load())
    for path, volume in reversed(applied):
        ledger.remove_path(path, volume)
    return key


def map_mmc(
    req: MapRequest, state: MappingState, policy: RoutePolicy
) -> tuple[Coord | None, int]:
    """Tile whose tentative routes raise the peak channel load the least.

    Ties break on the resulting total (hence average) load, then on the
    smallest linear tile index.
    """
    if req.requester_tile is None:
        raise StateError("channel-load placement requires a requester tile")
    arch = state.arch
    best: Coord | None = None
    best_key: tuple[int, int, int] | None = None
    cands = _candidates(state, req.task.kind)
    for tile in cands:
        peak, total = _tentative_load_key(req, state, tile, policy)
        key = (peak, total, arch.linear_index(tile))
        if best_key is None or key < best_key:
            best, best_key = tile, key
    return best, len(cands)


def map_mac(
    req: MapRequest, state: MappingState, policy: RoutePolicy
) -> tuple[Coord | None, int]:
    """Tile minimising the resulting average channel load.

    The link count is constant, so the average is compared through the exact
    integer total.  Ties break on peak load, then linear index.
    """
    if req.requester_tile is None:
        raise StateError("channel-load placement requires a requester tile")
    arch = state.arch
    best: Coord | None = None
    best_key: tuple[int, int, int] | None = None
    cands = _candidates(state, req.task.kind)
    for tile in cands:
        peak, total = _tentative_load_key(req, state, tile, policy)
        key = (total, peak, arch.linear_index(tile))
        if best_key is None or key < best_key:
            best, best_key = tile, key
    return best, len(cands)


def _pl_key(
    req: MapRequest, state: MappingState, tile: Coord, policy: RoutePolicy
) -> tuple[int, int, int]:
    arch = state.arch
    there = route(policy, req.requester_tile, tile, state.ledger, arch)
    back = route(policy, tile, req.requester_tile, state.ledger, arch)
    cost = path_cost(there, state.ledger) + path_cost(back, state.ledger)
    hops = path_hops(there) + path_hops(back)
    return (cost, hops, arch.linear_index(tile))


def map_pl(
    req: MapRequest, state: MappingState, policy: RoutePolicy
) -> tuple[Coord | None, int]:
    """Tile with the cheapest current-load communication path, both ways.

    Costs are sums of existing link loads along the routes the policy would
    choose; ties break on combined hop count, then linear index.
    """
    if req.requester_tile is None:
        raise StateError("path-load placement requires a requester tile")
    cands = _candidates(state, req.task.kind)
    best: Coord | None = None
    best_key: tuple[int, int, int] | None = None
    for tile in cands:
        key = _pl_key(req, state, tile, policy)
        if best_key is None or key < best_key:
            best, best_key = tile, key
    return best, len(cands)


def map_bn(
    req: MapRequest, state: MappingState, policy: RoutePolicy
) -> tuple[Coord | None, int]:
    """Path-load choice restricted to the nearest non-empty Manhattan shell."""
    if req.requester_tile is None:
        raise StateError("best-neighbour placement requires a requester tile")
    arch = state.arch
    for n in range(1, shell_limit(req.requester_tile, arch) + 1):
        shell = [
            t
            for t in manhattan_shell(req.requester_tile, n, arch)
            if _free_compatible(state, t, req.task.kind)
        ]
        if shell:
            best = min(shell, key=lambda t: _pl_key(req, state, t, policy))
            return best, len(shell)
    return None, 0


class HeuristicEngine:
    """Stateful dispatcher: route policy, first-free cursor, evaluation count."""

    def __init__(self, kind: HeuristicKind | str, route_policy: RoutePolicy | None = None):
        self.kind = kind if isinstance(kind, HeuristicKind) else HeuristicKind(kind)
        self.route_policy = route_policy or DEFAULT_ROUTE_POLICY[self.kind]
        self.cursor = 0
        self.evaluations = 0

    def place(self, req: MapRequest, state: MappingState) -> Coord | None:
        if self.kind is HeuristicKind.FF:
            tile, self.cursor, examined = map_ff(req, state, self.cursor)
        elif self.kind is HeuristicKind.NN:
            tile, examined = map_nn(req, state)
        elif self.kind is HeuristicKind.SPIRAL:
            tile, examined = map_spiral(req, state)
        elif self.kind is HeuristicKind.MMC:
            tile, examined = map_mmc(req, state, self.route_policy)
        elif self.kind is HeuristicKind.MAC:
            tile, examined = map_mac(req, state, self.route_policy)
        elif self.kind is HeuristicKind.PL:
            tile, examined = map_pl(req, state, self.route_policy)
        else:
            tile, examined = map_bn(req, state, self.route_policy)
        self.evaluations += examined
        return tile
