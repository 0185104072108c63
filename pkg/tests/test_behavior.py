import logging

import pytest
from hypothesis import given, settings, strategies as st

from routechoice.behavior import (
    BEHAVIORS,
    BehaviorWeights,
    RosterEntry,
    TravelTimeStats,
    behavior_table,
    compute_stats,
    custom_behavior,
    reward,
)
from routechoice.mesosim import TripResult

GOLDEN = {
    "altruistic": (0, 0, 0, 1),
    "collaborative": (0.5, 0.5, 0, 0),
    "competitive": (2, 0, -1, 0),
    "malicious": (0, 0, -1, 0),
    "selfish": (1, 0, 0, 0),
    "social": (0.5, 0, 0, 0.5),
}


def test_behavior_table_golden_values():
    assert set(BEHAVIORS) == set(GOLDEN)
    for name, phi in GOLDEN.items():
        assert behavior_table(name).phi == phi


def test_unknown_behavior_lists_valid_names():
    with pytest.raises(ValueError) as exc:
        behavior_table("frugal")
    for name in GOLDEN:
        assert name in str(exc.value)


def test_named_weights_cannot_be_tampered():
    with pytest.raises(ValueError, match="selfish"):
        BehaviorWeights(name="selfish", phi=(0.9, 0, 0, 0))


def test_custom_behavior_accepts_any_four_reals():
    w = custom_behavior([0.1, -0.2, 0.3, -0.4])
    assert w.name == "custom"
    assert w.phi == (0.1, -0.2, 0.3, -0.4)


def test_reward_hand_values():
    selfish = behavior_table("selfish")
    assert reward(selfish, TravelTimeStats(4.57, 9, 9, 9)) == 4.57
    competitive = behavior_table("competitive")
    assert reward(competitive, TravelTimeStats(own=3, group_mean=7, other_mean=2, all_mean=5)) == 4.0
    altruistic = behavior_table("altruistic")
    assert reward(altruistic, TravelTimeStats(1, 2, 3, 5)) == 5.0
    malicious = behavior_table("malicious")
    assert reward(malicious, TravelTimeStats(1, 2, 3, 5)) == -3.0


def test_selfish_reward_is_identity_on_own_time():
    selfish = behavior_table("selfish")
    for own in (0.1, 60.0, 4321.0):
        assert reward(selfish, TravelTimeStats(own, 1, 2, 3)) == own


@settings(max_examples=200)
@given(
    st.sampled_from(sorted(BEHAVIORS)),
    st.lists(st.floats(0, 1e4), min_size=4, max_size=4),
    st.lists(st.floats(0, 1e4), min_size=4, max_size=4),
    st.floats(-3, 3),
    st.floats(-3, 3),
)
def test_reward_is_linear_in_stats(name, t1, t2, a, b):
    w = behavior_table(name)
    s1 = TravelTimeStats(*t1)
    s2 = TravelTimeStats(*t2)
    combo = TravelTimeStats(*(a * x + b * y for x, y in zip(t1, t2)))
    assert reward(w, combo) == pytest.approx(a * reward(w, s1) + b * reward(w, s2), abs=1e-6)


def results_and_roster(rows):
    results = [TripResult(d, tt, st_ + tt) for d, _, st_, tt in rows]
    roster = {d: RosterEntry(group=g, start_time=st_) for d, g, st_, _ in rows}
    return results, roster


def test_stats_two_same_group_drivers_hand_mean():
    results, roster = results_and_roster(
        [("a", "av", 1000.0, 60.0), ("b", "av", 1100.0, 120.0)]
    )
    stats = compute_stats(results, roster, "a", window=300.0)
    assert stats.own == 60.0
    assert stats.group_mean == 90.0
    assert stats.all_mean == 90.0
    assert stats.other_mean == 0.0  # empty other bucket


def test_stats_singleton_observer(caplog):
    import routechoice.behavior as behavior_mod

    behavior_mod._warned_empty.clear()
    results, roster = results_and_roster([("a", "av", 1000.0, 45.0)])
    with caplog.at_level(logging.WARNING):
        stats = compute_stats(results, roster, "a", window=300.0)
    assert stats.own == stats.group_mean == stats.all_mean == 45.0
    assert stats.other_mean == 0.0
    assert "mean set to 0" in caplog.text


def test_stats_window_boundary_is_closed():
    rows = [
        ("obs", "av", 1000.0, 10.0),
        ("edge_in", "human", 1000.0 + 300.0, 50.0),
        ("just_out", "human", 1000.0 + 301.0, 99.0),
        ("early_in", "human", 1000.0 - 300.0, 70.0),
        ("early_out", "human", 1000.0 - 301.0, 99.0),
    ]
    results, roster = results_and_roster(rows)
    stats = compute_stats(results, roster, "obs", window=300.0)
    assert stats.other_mean == 60.0  # (50 + 70) / 2, the 99s excluded
    assert stats.all_mean == pytest.approx((10 + 50 + 70) / 3)


def test_stats_window_shrinking_never_adds_support():
    rows = [("obs", "av", 1000.0, 10.0)] + [
        (f"h{i}", "human", 1000.0 + 100.0 * i, 30.0 + i) for i in range(-4, 5) if i != 0
    ]
    results, roster = results_and_roster(rows)
    prev_support = None
    for window in (500.0, 400.0, 300.0, 200.0, 100.0, 50.0):
        in_window = {
            d for d, e in roster.items() if abs(e.start_time - 1000.0) <= window
        }
        if prev_support is not None:
            assert in_window <= prev_support
        prev_support = in_window
        stats = compute_stats(results, roster, "obs", window=window)
        others = [roster[d] for d in in_window if roster[d].group == "human"]
        expected = (
            sum(30.0 + (e.start_time - 1000.0) / 100.0 for e in others) / len(others)
            if others
            else 0.0
        )
        assert stats.other_mean == pytest.approx(expected)


def test_stats_missing_observer_errors():
    results, roster = results_and_roster([("a", "av", 1000.0, 45.0)])
    with pytest.raises(ValueError, match="missing"):
        compute_stats(results, roster, "nobody", window=300.0)


def test_stats_scaled_converts_units():
    stats = TravelTimeStats(120.0, 60.0, 30.0, 90.0)
    minutes = stats.scaled(1 / 60)
    assert minutes == TravelTimeStats(2.0, 1.0, 0.5, 1.5)


@settings(max_examples=150)
@given(st.integers(0, 100_000))
def test_stats_index_matches_compute_stats(seed):
    import numpy as np

    from routechoice.behavior import StatsIndex

    rng = np.random.default_rng(seed)
    n = int(rng.integers(1, 25))
    rows = [
        (
            f"d{i}",
            "av" if rng.random() < 0.4 else "human",
            float(rng.integers(0, 2000)),
            float(rng.uniform(10, 300)),
        )
        for i in range(n)
    ]
    results, roster = results_and_roster(rows)
    index = StatsIndex(results, roster)
    window = float(rng.integers(50, 600))
    for driver_id, _, _, _ in rows:
        direct = compute_stats(results, roster, driver_id, window)
        fast = index.stats_for(driver_id, window)
        assert fast.own == direct.own
        assert fast.group_mean == pytest.approx(direct.group_mean, abs=1e-9)
        assert fast.other_mean == pytest.approx(direct.other_mean, abs=1e-9)
        assert fast.all_mean == pytest.approx(direct.all_mean, abs=1e-9)
