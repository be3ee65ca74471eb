"""Core domain model: applications, the tile mesh, and mapping state.

Applications are acyclic directed graphs of typed tasks that exchange packet
volumes over master/slave edges.  The platform is a W x H mesh of
heterogeneous tiles joined by directed links (two per physical adjacency).
``MappingState`` tracks which task occupies which tile and which link-level
route every communication was pinned to, together with the per-link load
ledger that the placement heuristics and the router query.

All volumes, loads and instruction counts are exact non-negative integers,
so ledger bookkeeping is exactly reversible.
"""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Iterator, Mapping, Sequence

Coord = tuple[int, int]
DirectedLink = tuple[Coord, Coord]

# Communication directions on an edge.
DIR_MS = "ms"  # master -> slave
DIR_SM = "sm"  # slave -> master
DIRECTIONS = (DIR_MS, DIR_SM)


class NocError(Exception):
    """Base class for model errors."""


class ValidationError(NocError):
    """Invalid input: coordinates, graphs, files or parameters."""


class StateError(NocError):
    """Operation conflicts with the current mapping state."""


class TaskKind(Enum):
    INITIAL = "initial"
    SOFTWARE = "software"
    HARDWARE = "hardware"


class TileKind(Enum):
    ISP = "isp"          # instruction-set processor
    RA = "ra"            # reconfigurable area
    MANAGER = "manager"  # admission/mapping controller, runs no app tasks


def compatible(task_kind: TaskKind, tile_kind: TileKind) -> bool:
    """True iff a task of this kind may execute on a tile of this kind.

    Hardware tasks bind to reconfigurable tiles, software and initial tasks
    to instruction-set processors.  The manager tile never runs app tasks.
    """
    if tile_kind is TileKind.RA:
        return task_kind is TaskKind.HARDWARE
    if tile_kind is TileKind.ISP:
        return task_kind in (TaskKind.SOFTWARE, TaskKind.INITIAL)
    return False


def manhattan(a: Coord, b: Coord) -> int:
    """Manhattan distance between mesh coordinates (no bounds check)."""
    return abs(a[0] - b[0]) + abs(a[1] - b[1])


@dataclass(frozen=True)
class Task:
    id: str
    kind: TaskKind
    instructions: int

    def __post_init__(self) -> None:
        if self.instructions < 1:
            raise ValidationError(
                f"task {self.id!r}: instructions must be >= 1, got {self.instructions}"
            )


@dataclass(frozen=True)
class Edge:
    """Communication between a master task and the slave it spawns.

    ``vms``/``vsm`` are the packet volumes carried master->slave and
    slave->master; at least one direction must carry traffic.
    """

    mtid: str
    stid: str
    vms: int
    vsm: int

    def __post_init__(self) -> None:
        if self.mtid == self.stid:
            raise ValidationError(f"edge {self.mtid!r}->{self.stid!r}: self loop")
        if self.vms < 0 or self.vsm < 0:
            raise ValidationError(
                f"edge {self.mtid!r}->{self.stid!r}: volumes must be non-negative"
            )
        if self.vms + self.vsm < 1:
            raise ValidationError(
                f"edge {self.mtid!r}->{self.stid!r}: at least one direction must carry traffic"
            )


class TaskGraph:
    """Validated application graph: one initial task, acyclic, connected."""

    def __init__(self, app_id: str, tasks: Sequence[Task], edges: Sequence[Edge]):
        self.app_id = app_id
        self.tasks = tuple(tasks)
        self.edges = tuple(edges)
        self._by_id = {t.id: t for t in self.tasks}
        self._validate()
        self._out: dict[str, list[Edge]] = {t.id: [] for t in self.tasks}
        self._in: dict[str, list[Edge]] = {t.id: [] for t in self.tasks}
        for e in self.edges:
            self._out[e.mtid].append(e)
            self._in[e.stid].append(e)
        for lst in self._out.values():
            lst.sort(key=lambda e: e.stid)
        for lst in self._in.values():
            lst.sort(key=lambda e: e.mtid)

    def _validate(self) -> None:
        if not self.tasks:
            raise ValidationError(f"application {self.app_id!r}: no tasks")
        if len(self._by_id) != len(self.tasks):
            raise ValidationError(f"application {self.app_id!r}: duplicate task ids")
        roots = [t for t in self.tasks if t.kind is TaskKind.INITIAL]
        if len(roots) > 1:
            ids = ", ".join(t.id for t in roots)
            raise ValidationError(f"application {self.app_id!r}: multiple roots ({ids})")
        if not roots:
            raise ValidationError(f"application {self.app_id!r}: missing initial task")
        seen_edges = set()
        for e in self.edges:
            for tid in (e.mtid, e.stid):
                if tid not in self._by_id:
                    raise ValidationError(
                        f"application {self.app_id!r}: unknown task {tid!r} in edge"
                    )
            if (e.mtid, e.stid) in seen_edges:
                raise ValidationError(
                    f"application {self.app_id!r}: duplicate edge {e.mtid!r}->{e.stid!r}"
                )
            seen_edges.add((e.mtid, e.stid))
            if e.stid == roots[0].id:
                raise ValidationError(
                    f"application {self.app_id!r}: initial task {e.stid!r} has a master"
                )
        # Kahn's algorithm; leftover nodes expose the offending cycle edges.
        indeg = {t.id: 0 for t in self.tasks}
        for e in self.edges:
            indeg[e.stid] += 1
        ready = sorted(tid for tid, d in indeg.items() if d == 0)
        order = []
        while ready:
            tid = ready.pop()
            order.append(tid)
            for e in self.edges:
                if e.mtid == tid:
                    indeg[e.stid] -= 1
                    if indeg[e.stid] == 0:
                        ready.append(e.stid)
        if len(order) != len(self.tasks):
            stuck = {tid for tid, d in indeg.items() if d > 0}
            cyc = [f"{e.mtid}->{e.stid}" for e in self.edges if e.mtid in stuck and e.stid in stuck]
            raise ValidationError(
                f"application {self.app_id!r}: cyclic graph ({', '.join(cyc)})"
            )
        # Every non-initial task must descend from the initial task.
        reach = {roots[0].id}
        frontier = [roots[0].id]
        while frontier:
            tid = frontier.pop()
            for e in self.edges:
                if e.mtid == tid and e.stid not in reach:
                    reach.add(e.stid)
                    frontier.append(e.stid)
        for t in self.tasks:
            if t.id not in reach:
                raise ValidationError(
                    f"application {self.app_id!r}: unreachable task {t.id!r}"
                )

    @property
    def initial(self) -> Task:
        return next(t for t in self.tasks if t.kind is TaskKind.INITIAL)

    def task(self, tid: str) -> Task:
        try:
            return self._by_id[tid]
        except KeyError:
            raise ValidationError(f"application {self.app_id!r}: unknown task {tid!r}") from None

    def outgoing(self, tid: str) -> list[Edge]:
        """Edges mastered by ``tid``, ordered by slave id."""
        return list(self._out[tid])

    def incoming(self, tid: str) -> list[Edge]:
        """Edges targeting ``tid``, ordered by master id."""
        return list(self._in[tid])

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, TaskGraph):
            return NotImplemented
        return (self.app_id, self.tasks, self.edges) == (other.app_id, other.tasks, other.edges)

    def __hash__(self) -> int:
        return hash((self.app_id, self.tasks, self.edges))

    def __repr__(self) -> str:
        return f"TaskGraph({self.app_id!r}, {len(self.tasks)} tasks, {len(self.edges)} edges)"


@dataclass(frozen=True)
class Tile:
    coord: Coord
    kind: TileKind
    linear_index: int


# Default 8x8 platform: manager in the corner, 14 reconfigurable tiles spread
# over the mesh, instruction-set processors everywhere else.  The layout is a
# configuration input; this list is the shipped default.
DEFAULT_RA_TILES: tuple[Coord, ...] = (
    (2, 1), (5, 1), (1, 2), (4, 2), (7, 2), (3, 3), (6, 3),
    (1, 4), (4, 4), (7, 4), (2, 5), (5, 5), (3, 6), (6, 6),
)
DEFAULT_MANAGER: Coord = (0, 0)


class ArchGraph:
    """W x H mesh of typed tiles with directed links between 4-neighbours."""

    def __init__(self, width: int, height: int, kinds: Mapping[Coord, TileKind]):
        if width < 1 or height < 1:
            raise ValidationError(f"mesh dimensions must be >= 1, got {width}x{height}")
        self.width = width
        self.height = height
        self._kinds = dict(kinds)
        expected = {(x, y) for x in range(width) for y in range(height)}
        if set(self._kinds) != expected:
            raise ValidationError("tile kind map must cover the mesh exactly")
        managers = [c for c, k in self._kinds.items() if k is TileKind.MANAGER]
        if len(managers) != 1:
            raise ValidationError(f"exactly one manager tile required, got {len(managers)}")
        self.manager: Coord = managers[0]
        self._neighbors: dict[Coord, tuple[Coord, ...]] = {}
        for c in self.coords():
            x, y = c
            adj = [(x, y - 1), (x - 1, y), (x + 1, y), (x, y + 1)]
            self._neighbors[c] = tuple(
                sorted((a for a in adj if self.in_mesh(a)), key=self.linear_index)
            )
        links: list[DirectedLink] = []
        for c in self.coords():
            for n in self._neighbors[c]:
                links.append((c, n))
        self._links = tuple(links)

    @classmethod
    def default_8x8(cls) -> "ArchGraph":
        kinds: dict[Coord, TileKind] = {}
        for x in range(8):
            for y in range(8):
                kinds[(x, y)] = TileKind.ISP
        for c in DEFAULT_RA_TILES:
            kinds[c] = TileKind.RA
        kinds[DEFAULT_MANAGER] = TileKind.MANAGER
        return cls(8, 8, kinds)

    @classmethod
    def uniform(
        cls,
        width: int,
        height: int,
        manager: Coord = (0, 0),
        ra: Iterable[Coord] = (),
    ) -> "ArchGraph":
        """Mesh with the given manager and RA tiles; ISP everywhere else."""
        kinds: dict[Coord, TileKind] = {
            (x, y): TileKind.ISP for x in range(width) for y in range(height)
        }
        for c in ra:
            if c not in kinds:
                raise ValidationError(f"RA tile {c} outside the {width}x{height} mesh")
            kinds[c] = TileKind.RA
        if manager not in kinds:
            raise ValidationError(f"manager tile {manager} outside the mesh")
        if kinds[manager] is TileKind.RA:
            raise ValidationError(f"manager tile {manager} collides with an RA tile")
        kinds[manager] = TileKind.MANAGER
        return cls(width, height, kinds)

    def in_mesh(self, c: Coord) -> bool:
        return 0 <= c[0] < self.width and 0 <= c[1] < self.height

    def require_in_mesh(self, c: Coord) -> None:
        if not self.in_mesh(c):
            raise ValidationError(f"coordinate {c} outside the {self.width}x{self.height} mesh")

    def linear_index(self, c: Coord) -> int:
        return c[1] * self.width + c[0]

    def coord_at(self, index: int) -> Coord:
        return (index % self.width, index // self.width)

    def kind(self, c: Coord) -> TileKind:
        self.require_in_mesh(c)
        return self._kinds[c]

    def coords(self) -> Iterator[Coord]:
        """All coordinates in raster (row-major) order."""
        for y in range(self.height):
            for x in range(self.width):
                yield (x, y)

    def tiles(self) -> Iterator[Tile]:
        for c in self.coords():
            yield Tile(c, self._kinds[c], self.linear_index(c))

    def links(self) -> tuple[DirectedLink, ...]:
        return self._links

    def neighbors(self, c: Coord) -> tuple[Coord, ...]:
        """In-mesh 4-neighbours ordered by linear index."""
        return self._neighbors[c]

    def count_kind(self, kind: TileKind) -> int:
        return sum(1 for k in self._kinds.values() if k is kind)

    def hop_distance(self, a: Coord, b: Coord) -> int:
        """Manhattan distance between two in-mesh coordinates."""
        self.require_in_mesh(a)
        self.require_in_mesh(b)
        return manhattan(a, b)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, ArchGraph):
            return NotImplemented
        return (self.width, self.height, self._kinds) == (
            other.width,
            other.height,
            other._kinds,
        )

    def __repr__(self) -> str:
        return f"ArchGraph({self.width}x{self.height})"


class ChannelLoadLedger:
    """Accumulated packet volume currently routed over every directed link."""

    def __init__(self, arch: ArchGraph):
        self.arch = arch
        self._load: dict[DirectedLink, int] = dict.fromkeys(arch.links(), 0)

    def load(self, link: DirectedLink) -> int:
        try:
            return self._load[link]
        except KeyError:
            raise ValidationError(f"unknown link {link}") from None

    def set_load(self, link: DirectedLink, value: int) -> None:
        if link not in self._load:
            raise ValidationError(f"unknown link {link}")
        if value < 0:
            raise ValidationError(f"load must be non-negative, got {value}")
        self._load[link] = value

    def add_path(self, path: Sequence[Coord], volume: int) -> None:
        if volume < 0:
            raise ValidationError(f"volume must be non-negative, got {volume}")
        for link in zip(path, path[1:]):
            self.load(link)  # existence check
            self._load[link] += volume

    def remove_path(self, path: Sequence[Coord], volume: int) -> None:
        for link in zip(path, path[1:]):
            new = self.load(link) - volume
            if new < 0:
                raise StateError(f"removing {volume} from link {link} would go negative")
            self._load[link] = new

    def peak_load(self) -> int:
        return max(self._load.values())

    def total_load(self) -> int:
        return sum(self._load.values())

    def avg_load(self) -> float:
        return self.total_load() / len(self._load)

    def copy(self) -> "ChannelLoadLedger":
        dup = ChannelLoadLedger.__new__(ChannelLoadLedger)
        dup.arch = self.arch
        dup._load = dict(self._load)
        return dup

    def loads(self) -> Mapping[DirectedLink, int]:
        return dict(self._load)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, ChannelLoadLedger):
            return NotImplemented
        return self._load == other._load


RouteKey = tuple[str, str, str, str]  # (app, mtid, stid, direction)


def _check_path(path: Sequence[Coord], arch: ArchGraph) -> None:
    if not path:
        raise ValidationError("empty path")
    for c in path:
        arch.require_in_mesh(c)
    if len(set(path)) != len(path):
        raise ValidationError(f"path revisits a tile: {list(path)}")
    for a, b in zip(path, path[1:]):
        if manhattan(a, b) != 1:
            raise ValidationError(f"path step {a}->{b} is not 4-adjacent")


class MappingState:
    """Mutable placement/route/ledger state for one platform."""

    def __init__(self, arch: ArchGraph):
        self.arch = arch
        self.placement: dict[tuple[str, str], Coord] = {}
        self.tile_owner: dict[Coord, tuple[str, str]] = {}
        self.routes: dict[RouteKey, tuple[tuple[Coord, ...], int]] = {}
        self.ledger = ChannelLoadLedger(arch)

    def tile_free(self, c: Coord) -> bool:
        return c not in self.tile_owner

    def task_tile(self, app: str, tid: str) -> Coord | None:
        return self.placement.get((app, tid))

    def place(self, app: str, task: Task, c: Coord) -> None:
        self.arch.require_in_mesh(c)
        if (app, task.id) in self.placement:
            raise StateError(f"task ({app!r}, {task.id!r}) already placed")
        if c in self.tile_owner:
            raise StateError(f"tile {c} already occupied by {self.tile_owner[c]}")
        if not compatible(task.kind, self.arch.kind(c)):
            raise StateError(
                f"task kind {task.kind.value} incompatible with tile {c} "
                f"({self.arch.kind(c).value})"
            )
        self.placement[(app, task.id)] = c
        self.tile_owner[c] = (app, task.id)

    def apply_route(
        self,
        app: str,
        mtid: str,
        stid: str,
        direction: str,
        path: Sequence[Coord],
        volume: int,
    ) -> None:
        """Pin a route for one communication direction and load its links."""
        if direction not in DIRECTIONS:
            raise ValidationError(f"direction must be one of {DIRECTIONS}, got {direction!r}")
        key: RouteKey = (app, mtid, stid, direction)
        if key in self.routes:
            raise StateError(f"route already stored for {key}")
        m_tile = self.task_tile(app, mtid)
        s_tile = self.task_tile(app, stid)
        if m_tile is None or s_tile is None:
            raise StateError(f"route {key} has an unmapped endpoint")
        src, dst = (m_tile, s_tile) if direction == DIR_MS else (s_tile, m_tile)
        _check_path(path, self.arch)
        if path[0] != src or path[-1] != dst:
            raise ValidationError(
                f"route {key}: path runs {path[0]}->{path[-1]}, expected {src}->{dst}"
            )
        self.ledger.add_path(path, volume)
        self.routes[key] = (tuple(path), volume)

    def remove_route(self, key: RouteKey) -> None:
        if key not in self.routes:
            raise StateError(f"no route stored for {key}")
        path, volume = self.routes.pop(key)
        self.ledger.remove_path(path, volume)

    def release_app(self, app: str) -> None:
        """Free every tile and route held by the application."""
        placed = [k for k in self.placement if k[0] == app]
        if not placed:
            raise ValidationError(f"unknown application {app!r}")
        for key in placed:
            c = self.placement.pop(key)
            del self.tile_owner[c]
        for rkey in [k for k in self.routes if k[0] == app]:
            path, volume = self.routes.pop(rkey)
            self.ledger.remove_path(path, volume)

    def rebuild_ledger(self) -> ChannelLoadLedger:
        """Fresh ledger recomputed from the stored routes (consistency oracle)."""
        fresh = ChannelLoadLedger(self.arch)
        for path, volume in self.routes.values():
            fresh.add_path(path, volume)
        return fresh

    def apps_placed(self) -> set[str]:
        return {app for app, _ in self.placement}
