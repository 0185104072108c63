"""Observations for AV agents: the warmth encoding of earlier route choices.

Within an episode agents decide in turn order. An AV observes the choices
already made by agents sharing its OD whose start times fall in the window
[t_obs - window, t_obs]; each such choice contributes its offset above the
window start (in seconds) to the chosen route's bucket. Recent choices are
therefore "warmer". The agent state stacks the same-group warmth vector on
top of the other-group one.
"""
from __future__ import annotations

import bisect
from dataclasses import dataclass
from typing import Iterator

import numpy as np

from .net import N_ACTIONS, OD


@dataclass(frozen=True)
class TurnRecord:
    driver_id: str
    group: str  # "human" | "av"
    od: OD
    start_time: float
    action: int


class TurnLog:
    """Append-only record of the choices made so far in the current episode."""

    def __init__(self):
        self._records: list[TurnRecord] = []

    def append(self, record: TurnRecord) -> None:
        self._records.append(record)

    def __len__(self) -> int:
        return len(self._records)

    def __iter__(self) -> Iterator[TurnRecord]:
        return iter(self._records)


@dataclass(frozen=True)
class Observer:
    driver_id: str
    group: str
    od: OD
    start_time: float


def warmth(
    log: TurnLog,
    observer: Observer,
    window: float,
    target_group: str,
) -> np.ndarray:
    """Per-route warmth of prior choices, from agents in `target_group`.

    target_group is "same" or "other", resolved against the observer's group.
    Only prior agents with the observer's OD and a start time inside
    [t_obs - window, t_obs] (both ends included) contribute; each adds
    (start_i - (t_obs - window)) to its chosen route's bucket.
    """
    if window <= 0:
        raise ValueError("window must be positive")
    if target_group not in ("same", "other"):
        raise ValueError(f"target_group must be 'same' or 'other', got {target_group!r}")
    window_start = observer.start_time - window
    out = np.zeros(N_ACTIONS)
    for rec in log:
        if rec.driver_id == observer.driver_id:
            continue
        same = rec.group == observer.group
        if (target_group == "same") != same:
            continue
        if rec.od != observer.od:
            continue
        if not (window_start <= rec.start_time <= observer.start_time):
            continue
        out[rec.action] += rec.start_time - window_start
    return out


def build_state(log: TurnLog, observer: Observer, window: float) -> np.ndarray:
    """The 2*N_ACTIONS agent state: same-group warmth then other-group warmth."""
    return np.concatenate(
        [
            warmth(log, observer, window, "same"),
            warmth(log, observer, window, "other"),
        ]
    )


STATE_SIZE = 2 * N_ACTIONS


class WarmthIndex:
    """Incremental warmth accumulator for the episode loop.

    Records must be appended in turn order (nondecreasing start time), which
    keeps the per-(od, group, action) time lists sorted; window sums then
    come from bisection over prefix sums instead of a full log scan. A state
    built before the observer's own record is appended automatically
    excludes the observer and anything after it. Equivalent to build_state
    on the same records (property-tested).
    """

    def __init__(self):
        # (od, group, action) -> (sorted times, prefix sums of times)
        self._times: dict[tuple, list[float]] = {}
        self._cums: dict[tuple, list[float]] = {}
        self._last_time = -np.inf

    def append(self, record: TurnRecord) -> None:
        if record.start_time < self._last_time:
            raise ValueError("records must arrive in nondecreasing start-time order")
        self._last_time = record.start_time
        key = (record.od, record.group, record.action)
        times = self._times.setdefault(key, [])
        cums = self._cums.setdefault(key, [0.0])
        times.append(record.start_time)
        cums.append(cums[-1] + record.start_time)

    def _bucket(self, od: OD, group: str, action: int, lo: float) -> float:
        key = (od, group, action)
        times = self._times.get(key)
        if not times:
            return 0.0
        i = bisect.bisect_left(times, lo)
        n = len(times) - i
        if n == 0:
            return 0.0
        cums = self._cums[key]
        return (cums[-1] - cums[i]) - n * lo

    def state_for(self, observer: Observer, window: float, groups=("human", "av")) -> np.ndarray:
        if window <= 0:
            raise ValueError("window must be positive")
        if observer.start_time < self._last_time:
            raise ValueError("observer starts before an already-appended record")
        lo = observer.start_time - window
        out = np.zeros(STATE_SIZE)
        others = [g for g in groups if g != observer.group]
        for a in range(N_ACTIONS):
            out[a] = self._bucket(observer.od, observer.group, a, lo)
            out[N_ACTIONS + a] = sum(self._bucket(observer.od, g, a, lo) for g in others)
        return out
