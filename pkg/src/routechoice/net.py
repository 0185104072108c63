"""Road network, free-flow times, and fixed per-OD route sets.

The network is a directed graph of capacitated edges. Route sets are the
fixed action space: for every origin-destination pair, exactly ``N_ACTIONS``
distinct loop-free paths, generated once and reused across all episodes.
"""
from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

N_ACTIONS = 3

NETWORK_HEADER = "edge_id,from,to,length_m,speed_mps,capacity_vps,priority"
ROUTESET_HEADER = "od_origin,od_dest,route_index,edge_id_sequence"

OD = tuple[str, str]


class NetworkFormatError(ValueError):
    """Malformed network / route-set document. Carries the offending line."""

    def __init__(self, message: str, line_no: int | None = None):
        if line_no is not None:
            message = f"line {line_no}: {message}"
        super().__init__(message)
        self.line_no = line_no


@dataclass(frozen=True)
class Edge:
    id: str
    from_node: str
    to_node: str
    length: float  # meters
    free_speed: float  # m/s
    capacity: float  # vehicles/second at the downstream end
    priority_rank: int = 0  # lower = served first at its downstream merge

    def __post_init__(self):
        if not self.id:
            raise ValueError("edge id must be non-empty")
        for name in ("length", "free_speed", "capacity"):
            v = getattr(self, name)
            if not (isinstance(v, (int, float)) and math.isfinite(v) and v > 0):
                raise ValueError(f"edge {self.id}: {name} must be finite and > 0, got {v!r}")
        if self.priority_rank < 0:
            raise ValueError(f"edge {self.id}: priority_rank must be >= 0")

    @property
    def free_flow_time(self) -> float:
        return self.length / self.free_speed


class Network:
    """Immutable directed network. Node set may include isolated nodes."""

    def __init__(self, nodes: Iterable[str], edges: Iterable[Edge]):
        self.nodes: frozenset[str] = frozenset(nodes)
        self.edges: dict[str, Edge] = {}
        for e in edges:
            if e.id in self.edges:
                raise ValueError(f"duplicate edge id {e.id!r}")
            if e.from_node not in self.nodes:
                raise ValueError(f"edge {e.id!r} references undeclared node {e.from_node!r}")
            if e.to_node not in self.nodes:
                raise ValueError(f"edge {e.id!r} references undeclared node {e.to_node!r}")
            self.edges[e.id] = e
        adjacency: dict[str, list[str]] = {n: [] for n in self.nodes}
        incoming: dict[str, list[str]] = {n: [] for n in self.nodes}
        for e in self.edges.values():
            adjacency[e.from_node].append(e.id)
            incoming[e.to_node].append(e.id)
        # sorted for deterministic iteration regardless of construction order
        self.adjacency: dict[str, tuple[str, ...]] = {
            n: tuple(sorted(ids)) for n, ids in adjacency.items()
        }
        self.incoming: dict[str, tuple[str, ...]] = {
            n: tuple(sorted(ids)) for n, ids in incoming.items()
        }

    def out_edges(self, node: str) -> tuple[Edge, ...]:
        return tuple(self.edges[eid] for eid in self.adjacency[node])

    def __eq__(self, other) -> bool:
        if not isinstance(other, Network):
            return NotImplemented
        return self.nodes == other.nodes and self.edges == other.edges

    def __repr__(self) -> str:
        return f"Network({len(self.nodes)} nodes, {len(self.edges)} edges)"


@dataclass(frozen=True)
class Path:
    od: OD
    edges: tuple[str, ...]

    def __post_init__(self):
        if len(self.edges) == 0:
            raise ValueError("path must contain at least one edge")
        if len(set(self.edges)) != len(self.edges):
            raise ValueError(f"path {self.od} repeats an edge")


def validate_path(net: Network, path: Path) -> None:
    """Raise ValueError unless `path` is a connected loop-free o->d walk in `net`."""
    origin, dest = path.od
    prev_head = origin
    for eid in path.edges:
        edge = net.edges.get(eid)
        if edge is None:
            raise ValueError(f"path {path.od}: edge {eid!r} not in network")
        if edge.from_node != prev_head:
            raise ValueError(
                f"path {path.od}: edge {eid!r} starts at {edge.from_node!r}, expected {prev_head!r}"
            )
        prev_head = edge.to_node
    if prev_head != dest:
        raise ValueError(f"path {path.od}: ends at {prev_head!r}, not destination {dest!r}")


def free_flow_time(net: Network, path: Path) -> float:
    """Uncongested traversal time of `path` in seconds: sum of length/speed."""
    total = 0.0
    for eid in path.edges:
        edge = net.edges.get(eid)
        if edge is None:
            raise ValueError(f"edge {eid!r} not in network")
        total += edge.free_flow_time
    return total


class RouteSet:
    """Mapping od -> fixed tuple of distinct paths (the per-OD action space)."""

    def __init__(self, routes: Mapping[OD, Sequence[Path]]):
        self.routes: dict[OD, tuple[Path, ...]] = {}
        for od, paths in routes.items():
            paths = tuple(paths)
            for p in paths:
                if p.od != od:
                    raise ValueError(f"path with od {p.od} filed under {od}")
            if len({p.edges for p in paths}) != len(paths):
                raise ValueError(f"route set for {od} contains edge-identical paths")
            self.routes[od] = paths

    def ods(self) -> tuple[OD, ...]:
        return tuple(sorted(self.routes))

    def paths_for(self, od: OD) -> tuple[Path, ...]:
        try:
            return self.routes[od]
        except KeyError:
            raise KeyError(f"no routes for OD {od}") from None

    def merged_with(self, other: "RouteSet") -> "RouteSet":
        overlap = set(self.routes) & set(other.routes)
        if overlap:
            raise ValueError(f"route sets overlap on ODs {sorted(overlap)}")
        combined = dict(self.routes)
        combined.update(other.routes)
        return RouteSet(combined)

    def __eq__(self, other) -> bool:
        if not isinstance(other, RouteSet):
            return NotImplemented
        return self.routes == other.routes


# ---------------------------------------------------------------------------
# edge-list document format
# ---------------------------------------------------------------------------

def load_network(text: str) -> Network:
    """Parse an edge-list document into a validated Network.

    Format: header ``edge_id,from,to,length_m,speed_mps,capacity_vps,priority``
    then one edge per line. ``#`` starts a comment; an optional directive
    ``# nodes: a;b;c`` fixes the declared node set (otherwise nodes are the
    union of edge endpoints). Edges referencing nodes outside a declared set
    fail validation.
    """
    declared_nodes: set[str] | None = None
    edges: list[Edge] = []
    header_seen = False
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            body = line[1:].strip()
            if body.lower().startswith("nodes:"):
                names = [n.strip() for n in body[len("nodes:"):].split(";") if n.strip()]
                declared_nodes = (declared_nodes or set()) | set(names)
            continue
        if not header_seen:
            if line != NETWORK_HEADER:
                raise NetworkFormatError(
                    f"expected header {NETWORK_HEADER!r}, got {line!r}", line_no
                )
            header_seen = True
            continue
        fields = line.split(",")
        if len(fields) != 7:
            raise NetworkFormatError(f"expected 7 fields, got {len(fields)}", line_no)
        eid, from_node, to_node, length_s, speed_s, cap_s, prio_s = (f.strip() for f in fields)
        try:
            edge = Edge(
                id=eid,
                from_node=from_node,
                to_node=to_node,
                length=float(length_s),
                free_speed=float(speed_s),
                capacity=float(cap_s),
                priority_rank=int(prio_s),
            )
        except ValueError as exc:
            raise NetworkFormatError(str(exc), line_no) from exc
        edges.append(edge)
    if not header_seen:
        raise NetworkFormatError("document has no header line")
    if declared_nodes is None:
        declared_nodes = {e.from_node for e in edges} | {e.to_node for e in edges}
    return Network(declared_nodes, edges)


def save_network(net: Network) -> str:
    lines = ["# nodes: " + ";".join(sorted(net.nodes)), NETWORK_HEADER]
    for eid in sorted(net.edges):
        e = net.edges[eid]
        lines.append(
            f"{e.id},{e.from_node},{e.to_node},{e.length!r},{e.free_speed!r},"
            f"{e.capacity!r},{e.priority_rank}"
        )
    return "\n".join(lines) + "\n"


def load_network_file(path) -> Network:
    with open(path, "r", encoding="utf-8") as fh:
        return load_network(fh.read())


def save_network_file(net: Network, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(save_network(net))


def save_route_set(routes: RouteSet) -> str:
    lines = [ROUTESET_HEADER]
    for od in routes.ods():
        for idx, path in enumerate(routes.paths_for(od)):
            lines.append(f"{od[0]},{od[1]},{idx},{';'.join(path.edges)}")
    return "\n".join(lines) + "\n"


def load_route_set(text: str) -> RouteSet:
    routes: dict[OD, dict[int, Path]] = {}
    header_seen = False
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if not header_seen:
            if line != ROUTESET_HEADER:
                raise NetworkFormatError(
                    f"expected header {ROUTESET_HEADER!r}, got {line!r}", line_no
                )
            header_seen = True
            continue
        fields = line.split(",")
        if len(fields) != 4:
            raise NetworkFormatError(f"expected 4 fields, got {len(fields)}", line_no)
        origin, dest, idx_s, seq = (f.strip() for f in fields)
        try:
            idx = int(idx_s)
            path = Path(od=(origin, dest), edges=tuple(s for s in seq.split(";") if s))
        except ValueError as exc:
            raise NetworkFormatError(str(exc), line_no) from exc
        routes.setdefault((origin, dest), {})[idx] = path
    if not header_seen:
        raise NetworkFormatError("document has no header line")
    out: dict[OD, list[Path]] = {}
    for od, by_idx in routes.items():
        if sorted(by_idx) != list(range(len(by_idx))):
            raise NetworkFormatError(f"route indices for {od} are not contiguous from 0")
        out[od] = [by_idx[i] for i in range(len(by_idx))]
    return RouteSet(out)


def save_route_set_file(routes: RouteSet, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(save_route_set(routes))


def load_route_set_file(path) -> RouteSet:
    with open(path, "r", encoding="utf-8") as fh:
        return load_route_set(fh.read())


# ---------------------------------------------------------------------------
# shortest free-flow times and heuristic path generation
# ---------------------------------------------------------------------------

def shortest_times_to(net: Network, dest: str) -> dict[str, float]:
    """Free-flow shortest-path time from every node to `dest` (Dijkstra on the
    reversed graph). Unreachable nodes get math.inf."""
    if dest not in net.nodes:
        raise ValueError(f"destination {dest!r} not in network")
    dist = {n: math.inf for n in net.nodes}
    dist[dest] = 0.0
    heap: list[tuple[float, str]] = [(0.0, dest)]
    while heap:
        d, node = heapq.heappop(heap)
        if d > dist[node]:
            continue
        for eid in net.incoming[node]:
            e = net.edges[eid]
            nd = d + e.free_flow_time
            if nd < dist[e.from_node]:
                dist[e.from_node] = nd
                heapq.heappush(heap, (nd, e.from_node))
    return dist


def _logit_walk(
    net: Network,
    od: OD,
    beta: float,
    rng: np.random.Generator,
    to_dest: dict[str, float],
    max_time: float,
) -> tuple[str, ...] | None:
    """One randomized walk from origin toward destination.

    At each node, each outgoing edge is scored by its own free-flow time plus
    the shortest free-flow time from its head to the destination; the next
    edge is sampled proportional to exp(beta * score). Returns None when the
    walk revisits a node, exceeds `max_time`, or dead-ends.
    """
    origin, dest = od
    node = origin
    visited = {origin}
    edges: list[str] = []
    elapsed = 0.0
    while node != dest:
        candidates = []
        scores = []
        for eid in net.adjacency[node]:
            e = net.edges[eid]
            rest = to_dest[e.to_node]
            if not math.isfinite(rest) or e.to_node in visited:
                continue
            if elapsed + e.free_flow_time + rest > max_time:
                continue
            candidates.append(e)
            scores.append(e.free_flow_time + rest)
        if not candidates:
            return None
        weights = np.exp(beta * (np.asarray(scores) - min(scores)))
        weights /= weights.sum()
        e = candidates[rng.choice(len(candidates), p=weights)]
        edges.append(e.id)
        elapsed += e.free_flow_time
        node = e.to_node
        visited.add(node)
    return tuple(edges)


def generate_paths(
    net: Network,
    od: OD,
    count: int = N_ACTIONS,
    beta: float = -0.1,
    rng: np.random.Generator | None = None,
    detour_factor: float = 3.0,
    max_attempts: int = 10_000,
) -> RouteSet:
    """Generate `count` distinct loop-free paths for one OD.

    Logit-randomized walks are drawn until `count` distinct paths accumulate;
    walks longer than `detour_factor` times the shortest free-flow time are
    rejected. Deterministic for a given seeded rng.
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    origin, dest = od
    if origin not in net.nodes or dest not in net.nodes:
        raise ValueError(f"OD {od} references unknown node")
    if rng is None:
        rng = np.random.default_rng(0)
    to_dest = shortest_times_to(net, dest)
    if not math.isfinite(to_dest[origin]):
        raise ValueError(f"OD {od}: origin and destination are not connected")
    max_time = detour_factor * to_dest[origin]
    found: dict[tuple[str, ...], Path] = {}
    for _ in range(max_attempts):
        walk = _logit_walk(net, od, beta, rng, to_dest, max_time)
        if walk is not None and walk not in found:
            found[walk] = Path(od=od, edges=walk)
            if len(found) == count:
                break
    if len(found) < count:
        raise ValueError(
            f"OD {od}: found only {len(found)} distinct paths in {max_attempts} attempts"
        )
    # shortest first, so route indices are stable and roughly ordered by cost
    paths = sorted(found.values(), key=lambda p: (free_flow_time(net, p), p.edges))
    return RouteSet({od: paths})


def generate_route_sets(
    net: Network,
    ods: Sequence[OD],
    count: int = N_ACTIONS,
    beta: float = -0.1,
    seed: int = 0,
) -> RouteSet:
    """Fixed action space for several ODs; one rng stream per OD for stability."""
    combined: dict[OD, tuple[Path, ...]] = {}
    for i, od in enumerate(ods):
        rng = np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(i,)))
        rs = generate_paths(net, od, count=count, beta=beta, rng=rng)
        combined[od] = rs.paths_for(od)
    return RouteSet(combined)


# ---------------------------------------------------------------------------
# synthetic grid networks
# ---------------------------------------------------------------------------

def grid_node(row: int, col: int) -> str:
    return f"n{row}_{col}"


def grid_network(
    rows: int = 4,
    cols: int = 4,
    edge_length: float = 300.0,
    speed_range: tuple[float, float] = (8.0, 14.0),
    capacity: float = 0.5,
    seed: int = 0,
) -> Network:
    """Directed grid with randomized per-edge free speeds.

    Both directions of every adjacency are separate edges. Horizontal edges
    get priority rank 0, vertical rank 1 (a fixed main-road-vs-side-road
    rule), giving merge priorities something to act on.
    """
    if rows < 2 or cols < 2:
        raise ValueError("grid needs at least 2 rows and 2 columns")
    rng = np.random.default_rng(seed)
    nodes = [grid_node(r, c) for r in range(rows) for c in range(cols)]
    edges: list[Edge] = []

    def add(a: str, b: str, rank: int) -> None:
        speed = float(rng.uniform(*speed_range))
        edges.append(
            Edge(
                id=f"{a}__{b}",
                from_node=a,
                to_node=b,
                length=edge_length,
                free_speed=round(speed, 3),
                capacity=capacity,
                priority_rank=rank,
            )
        )

    for r in range(rows):
        for c in range(cols):
            if c + 1 < cols:
                add(grid_node(r, c), grid_node(r, c + 1), 0)
                add(grid_node(r, c + 1), grid_node(r, c), 0)
            if r + 1 < rows:
                add(grid_node(r, c), grid_node(r + 1, c), 1)
                add(grid_node(r + 1, c), grid_node(r, c), 1)
    return Network(nodes, edges)
