"""Reward shaping: windowed travel-time statistics and behavior weightings.

An AV's reward (a cost, to minimize) is a weighted sum of four travel-time
statistics: its own time, its group's mean, the other group's mean, and the
system-wide mean, all restricted to drivers starting within the reward
window around the agent's own start time. The named weight vectors select a
behavior; "malicious", for example, is paid purely for slowing the other
group down.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .mesosim import TripResult

log = logging.getLogger(__name__)

_warned_empty: set[tuple[str, str]] = set()


def _warn_empty_bucket(observer: str, bucket: str) -> None:
    """Empty-support means are expected at distribution tails; warn once per
    (observer, bucket) per process instead of once per episode."""
    key = (observer, bucket)
    if key in _warned_empty:
        return
    _warned_empty.add(key)
    log.warning(
        "driver %s: no %s drivers in reward window; mean set to 0", observer, bucket
    )

BEHAVIORS: dict[str, tuple[float, float, float, float]] = {
    "altruistic": (0.0, 0.0, 0.0, 1.0),
    "collaborative": (0.5, 0.5, 0.0, 0.0),
    "competitive": (2.0, 0.0, -1.0, 0.0),
    "malicious": (0.0, 0.0, -1.0, 0.0),
    "selfish": (1.0, 0.0, 0.0, 0.0),
    "social": (0.5, 0.0, 0.0, 0.5),
}


@dataclass(frozen=True)
class BehaviorWeights:
    name: str
    phi: tuple[float, float, float, float]

    def __post_init__(self):
        if len(self.phi) != 4:
            raise ValueError("phi must have exactly 4 components")
        if self.name in BEHAVIORS and tuple(self.phi) != BEHAVIORS[self.name]:
            raise ValueError(
                f"named behavior {self.name!r} must carry weights {BEHAVIORS[self.name]}"
            )


def behavior_table(name: str) -> BehaviorWeights:
    """Weights for a named behavior; unknown names list the valid ones."""
    try:
        return BehaviorWeights(name=name, phi=BEHAVIORS[name])
    except KeyError:
        raise ValueError(
            f"unknown behavior {name!r}; valid names: {', '.join(sorted(BEHAVIORS))}"
        ) from None


def custom_behavior(phi: Sequence[float]) -> BehaviorWeights:
    return BehaviorWeights(name="custom", phi=tuple(float(x) for x in phi))


@dataclass(frozen=True)
class RosterEntry:
    group: str
    start_time: float


@dataclass(frozen=True)
class TravelTimeStats:
    own: float
    group_mean: float
    other_mean: float
    all_mean: float

    def scaled(self, factor: float) -> "TravelTimeStats":
        return TravelTimeStats(
            self.own * factor,
            self.group_mean * factor,
            self.other_mean * factor,
            self.all_mean * factor,
        )


def compute_stats(
    results: Sequence[TripResult],
    roster: Mapping[str, RosterEntry],
    observer: str,
    window: float,
) -> TravelTimeStats:
    """Travel-time statistics around one driver's start time.

    Group/other/system means average over drivers whose start times fall in
    [t_obs - window, t_obs + window], both ends included; the observer counts
    toward its own group and the system mean. A mean over an empty set is
    defined as 0 so the matching reward term vanishes (logged, since it mutes
    competitive/malicious signals).
    """
    if window <= 0:
        raise ValueError("window must be positive")
    times = {r.driver_id: r.travel_time for r in results}
    if observer not in times:
        raise ValueError(f"observer {observer!r} missing from results")
    if observer not in roster:
        raise ValueError(f"observer {observer!r} missing from roster")
    t_obs = roster[observer].start_time
    own_group = roster[observer].group

    sums = {"group": 0.0, "other": 0.0, "all": 0.0}
    counts = {"group": 0, "other": 0, "all": 0}
    for driver_id, tt in times.items():
        entry = roster[driver_id]
        if not (t_obs - window <= entry.start_time <= t_obs + window):
            continue
        bucket = "group" if entry.group == own_group else "other"
        sums[bucket] += tt
        counts[bucket] += 1
        sums["all"] += tt
        counts["all"] += 1

    def mean(bucket: str) -> float:
        if counts[bucket] == 0:
            _warn_empty_bucket(observer, bucket)
            return 0.0
        return sums[bucket] / counts[bucket]

    return TravelTimeStats(
        own=times[observer],
        group_mean=mean("group"),
        other_mean=mean("other"),
        all_mean=mean("all"),
    )


def reward(weights: BehaviorWeights, stats: TravelTimeStats) -> float:
    """Behavioral reward (to minimize): phi dot (own, group, other, all)."""
    p1, p2, p3, p4 = weights.phi
    return (
        p1 * stats.own
        + p2 * stats.group_mean
        + p3 * stats.other_mean
        + p4 * stats.all_mean
    )


class StatsIndex:
    """Windowed means for many observers of one episode, via prefix sums.

    Builds once per episode in O(n log n) and answers each observer in
    O(log n); equivalent to compute_stats (property-tested against it).
    """

    def __init__(self, results: Sequence[TripResult], roster: Mapping[str, RosterEntry]):
        self._roster = roster
        self._times = {r.driver_id: r.travel_time for r in results}
        rows = sorted(
            (roster[d].start_time, roster[d].group, tt) for d, tt in self._times.items()
        )
        self._starts = np.array([r[0] for r in rows])
        groups = sorted({g for _, g, _ in rows})
        self._cums = {}
        self._counts = {}
        for g in groups:
            tts = np.array([tt if grp == g else 0.0 for _, grp, tt in rows])
            flags = np.array([1 if grp == g else 0 for _, grp, _ in rows])
            self._cums[g] = np.concatenate([[0.0], np.cumsum(tts)])
            self._counts[g] = np.concatenate([[0], np.cumsum(flags)])

    def stats_for(self, observer: str, window: float) -> TravelTimeStats:
        if window <= 0:
            raise ValueError("window must be positive")
        if observer not in self._times:
            raise ValueError(f"observer {observer!r} missing from results")
        entry = self._roster[observer]
        lo = np.searchsorted(self._starts, entry.start_time - window, side="left")
        hi = np.searchsorted(self._starts, entry.start_time + window, side="right")

        def window_mean(groups) -> float:
            total = sum(self._cums[g][hi] - self._cums[g][lo] for g in groups)
            count = sum(self._counts[g][hi] - self._counts[g][lo] for g in groups)
            if count == 0:
                _warn_empty_bucket(observer, "/".join(groups) or "other")
                return 0.0
            return total / count

        own_group = entry.group
        others = [g for g in self._cums if g != own_group]
        return TravelTimeStats(
            own=self._times[observer],
            group_mean=window_mean([own_group]) if own_group in self._cums else 0.0,
            other_mean=window_mean(others) if others else window_mean([]),
            all_mean=window_mean(list(self._cums)),
        )
