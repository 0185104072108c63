"""Deterministic mesoscopic traffic model: FIFO point queues with merge priorities.

Maps one episode's route assignments and start times to per-driver travel
times. Each edge is a point queue: a vehicle entering at time t may leave no
earlier than t + length/free_speed, exits respect FIFO order and a minimum
headway of 1/capacity seconds, and queues have no physical length (no
spillback). Events are grouped on a 1-second grid: entries landing in the
same tick are ordered by the upstream edge's priority rank (merge priority),
then by exact entry time, then by driver id. Vehicles starting their trip
yield to rolling traffic within their start tick.

Model constraint: every traversed edge must have a free-flow time of at
least 1 s, so nothing can enter and leave an edge within one tick.
"""
from __future__ import annotations

import heapq
import math
from dataclasses import dataclass
from typing import Iterable, Protocol, Sequence

from .net import Network, Path, validate_path

HOUR = 3600.0

# entry rank used for vehicles appearing at their origin (yield to through traffic)
_ORIGIN_RANK = math.inf


@dataclass(frozen=True)
class TripPlan:
    driver_id: str
    path: Path
    start_time: float  # seconds within the simulated hour

    def __post_init__(self):
        if not (0 <= self.start_time < HOUR):
            raise ValueError(
                f"driver {self.driver_id}: start_time {self.start_time} outside [0, {HOUR})"
            )


@dataclass(frozen=True)
class TripResult:
    driver_id: str
    travel_time: float
    arrival_time: float

    @property
    def start_time(self) -> float:
        return self.arrival_time - self.travel_time


class Simulator(Protocol):
    """Anything mapping (network, trip plans) to one TripResult per plan."""

    def simulate(self, net: Network, plans: Sequence[TripPlan]) -> list[TripResult]:
        ...


def _check_plans(net: Network, plans: Sequence[TripPlan]) -> None:
    seen: set[str] = set()
    for plan in plans:
        if plan.driver_id in seen:
            raise ValueError(f"duplicate driver_id {plan.driver_id!r}")
        seen.add(plan.driver_id)
        validate_path(net, plan.path)


class FreeFlowSimulator:
    """Degenerate substitute: every trip completes at free-flow speed."""

    def simulate(self, net: Network, plans: Sequence[TripPlan]) -> list[TripResult]:
        _check_plans(net, plans)
        results = []
        for plan in sorted(plans, key=lambda p: (p.start_time, p.driver_id)):
            tt = sum(net.edges[eid].free_flow_time for eid in plan.path.edges)
            results.append(TripResult(plan.driver_id, tt, plan.start_time + tt))
        return results


class _Vehicle:
    __slots__ = ("driver_id", "legs", "leg", "start_time", "entry_time")

    def __init__(self, plan: TripPlan):
        self.driver_id = plan.driver_id
        self.legs = plan.path.edges
        self.leg = 0
        self.start_time = plan.start_time
        self.entry_time = plan.start_time


class _EdgeState:
    __slots__ = ("edge", "fifo", "cap_clock", "headway")

    def __init__(self, edge):
        self.edge = edge
        self.fifo: list[tuple[tuple, _Vehicle]] = []  # (entry key, vehicle), sorted
        self.cap_clock = -math.inf  # earliest time the next exit may happen
        self.headway = 1.0 / edge.capacity

    def head_ready(self) -> float:
        key, veh = self.fifo[0]
        return max(veh.entry_time + self.edge.free_flow_time, self.cap_clock)


class PointQueueSimulator:
    """The built-in mesoscopic model (registry name "meso")."""

    def simulate(self, net: Network, plans: Sequence[TripPlan]) -> list[TripResult]:
        results, _ = simulate_with_trace(net, plans, trace=False)
        return results


def simulate_with_trace(
    net: Network, plans: Sequence[TripPlan], trace: bool = True
) -> tuple[list[TripResult], dict[str, list[tuple[int, int]]]]:
    """Run the point-queue model; optionally record per-edge queue lengths.

    The trace maps edge id to (tick, queue length) samples taken at the end
    of every processed tick on which the edge held vehicles.
    """
    plans = sorted(plans, key=lambda p: (p.start_time, p.driver_id))
    _check_plans(net, plans)
    used_edges = {eid for plan in plans for eid in plan.path.edges}
    for eid in sorted(used_edges):
        if net.edges[eid].free_flow_time < 1.0:
            raise ValueError(
                f"edge {eid!r} has free-flow time below the 1 s event resolution"
            )

    states = {eid: _EdgeState(net.edges[eid]) for eid in used_edges}
    # entries to merge at the start of each tick: tick -> edge -> [(key, vehicle)]
    pending: dict[int, dict[str, list[tuple[tuple, _Vehicle]]]] = {}
    tick_heap: list[int] = []

    def schedule(tick: int, eid: str, key: tuple, veh: _Vehicle) -> None:
        per_edge = pending.get(tick)
        if per_edge is None:
            per_edge = pending[tick] = {}
            heapq.heappush(tick_heap, tick)
        per_edge.setdefault(eid, []).append((key, veh))

    for plan in plans:
        veh = _Vehicle(plan)
        tick = math.floor(plan.start_time)
        key = (tick, _ORIGIN_RANK, plan.start_time, plan.driver_id)
        schedule(tick, veh.legs[0], key, veh)

    active: set[str] = set()
    done: dict[str, TripResult] = {}
    queue_trace: dict[str, list[tuple[int, int]]] = {}

    while tick_heap or active:
        # next tick with anything to do
        t_candidates = []
        if tick_heap:
            t_candidates.append(tick_heap[0])
        for eid in active:
            t_candidates.append(math.floor(states[eid].head_ready()))
        t = min(t_candidates)

        if tick_heap and tick_heap[0] == t:
            heapq.heappop(tick_heap)
            for eid, batch in pending.pop(t).items():
                st = states[eid]
                st.fifo = sorted(st.fifo + batch, key=lambda item: item[0])
                active.add(eid)

        for eid in sorted(active):
            st = states[eid]
            while st.fifo:
                r = st.head_ready()
                if r >= t + 1:
                    break
                _, veh = st.fifo.pop(0)
                st.cap_clock = r + st.headway
                veh.leg += 1
                if veh.leg == len(veh.legs):
                    tt = r - veh.start_time
                    done[veh.driver_id] = TripResult(veh.driver_id, tt, r)
                else:
                    veh.entry_time = r
                    key = (t, st.edge.priority_rank, r, veh.driver_id)
                    schedule(t + 1, veh.legs[veh.leg], key, veh)
            if trace and st.fifo:
                queue_trace.setdefault(eid, []).append((t, len(st.fifo)))
        active = {eid for eid in active if states[eid].fifo}

    results = [done[plan.driver_id] for plan in plans]
    return results, queue_trace


def dump_queue_trace(trace: dict[str, list[tuple[int, int]]]) -> str:
    """Queue time series as delimited text: edge_id,tick,queue_len."""
    lines = ["edge_id,tick,queue_len"]
    for eid in sorted(trace):
        for tick, qlen in trace[eid]:
            lines.append(f"{eid},{tick},{qlen}")
    return "\n".join(lines) + "\n"


_SIMULATORS = {
    "meso": PointQueueSimulator,
    "freeflow": FreeFlowSimulator,
}


def get_simulator(name: str) -> Simulator:
    """Look up a registered simulator by name ("meso" is the built-in model)."""
    try:
        return _SIMULATORS[name]()
    except KeyError:
        raise ValueError(
            f"unknown simulator {name!r}; available: {sorted(_SIMULATORS)}"
        ) from None


def register_simulator(name: str, factory) -> None:
    _SIMULATORS[name] = factory
