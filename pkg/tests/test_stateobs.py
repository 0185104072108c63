import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from routechoice.stateobs import Observer, TurnLog, TurnRecord, build_state, warmth

OD_A = ("o1", "d1")
OD_B = ("o2", "d2")


def log_of(*records):
    log = TurnLog()
    for rec in records:
        log.append(TurnRecord(*rec))
    return log


def av_observer(start=1000.0, od=OD_A, driver_id="k"):
    return Observer(driver_id=driver_id, group="av", od=od, start_time=start)


def test_empty_log_gives_zero_warmth():
    obs = av_observer()
    assert warmth(TurnLog(), obs, 300.0, "other").tolist() == [0.0, 0.0, 0.0]
    assert build_state(TurnLog(), obs, 300.0).tolist() == [0.0] * 6


def test_single_qualifying_agent_hand_value():
    # other-group agent 60 s above the window start, action 2 -> [0, 0, 60]
    obs = av_observer(start=1000.0)
    log = log_of(("h1", "human", OD_A, 1000.0 - 300.0 + 60.0, 2))
    assert warmth(log, obs, 300.0, "other").tolist() == [0.0, 0.0, 60.0]


def test_two_agents_hand_sum():
    obs = av_observer(start=1000.0)
    log = log_of(
        ("h1", "human", OD_A, 700.0 + 100.0, 0),
        ("h2", "human", OD_A, 700.0 + 200.0, 0),
    )
    assert warmth(log, obs, 300.0, "other").tolist() == [300.0, 0.0, 0.0]


def test_window_boundaries():
    obs = av_observer(start=1000.0)
    at_lower = log_of(("h1", "human", OD_A, 700.0, 1))
    assert warmth(at_lower, obs, 300.0, "other").tolist() == [0.0, 0.0, 0.0]
    at_upper = log_of(("h1", "human", OD_A, 1000.0, 1))
    assert warmth(at_upper, obs, 300.0, "other").tolist() == [0.0, 300.0, 0.0]
    outside = log_of(("h1", "human", OD_A, 699.9, 1), ("h2", "human", OD_A, 1000.1, 1))
    assert warmth(outside, obs, 300.0, "other").tolist() == [0.0, 0.0, 0.0]


def test_od_filter():
    obs = av_observer()
    log = log_of(("h1", "human", OD_B, 900.0, 0))
    assert warmth(log, obs, 300.0, "other").tolist() == [0.0, 0.0, 0.0]


def test_observer_excluded_from_its_own_state():
    obs = av_observer(driver_id="k")
    log = log_of(("k", "av", OD_A, 1000.0, 0))
    assert warmth(log, obs, 300.0, "same").tolist() == [0.0, 0.0, 0.0]


def test_group_split_in_state():
    obs = av_observer(start=1000.0)
    log = log_of(
        ("a1", "av", OD_A, 950.0, 1),
        ("h1", "human", OD_A, 980.0, 2),
    )
    state = build_state(log, obs, 300.0)
    assert state.tolist() == [0.0, 250.0, 0.0, 0.0, 0.0, 280.0]


def test_only_same_group_priors_zero_second_half():
    obs = av_observer()
    log = log_of(("a1", "av", OD_A, 900.0, 0), ("a2", "av", OD_A, 950.0, 2))
    state = build_state(log, obs, 300.0)
    assert state[3:].tolist() == [0.0, 0.0, 0.0]
    assert state[:3].tolist() == [200.0, 0.0, 250.0]


def test_rejects_bad_arguments():
    obs = av_observer()
    with pytest.raises(ValueError, match="window"):
        warmth(TurnLog(), obs, 0.0, "other")
    with pytest.raises(ValueError, match="target_group"):
        warmth(TurnLog(), obs, 300.0, "humans")


def brute_force_warmth(records, obs, window, target_group):
    """Independent transcription of the warmth sum, one term at a time."""
    out = [0.0, 0.0, 0.0]
    lo = obs.start_time - window
    for r in records:
        if r.driver_id == obs.driver_id:
            continue
        is_same = r.group == obs.group
        wanted = is_same if target_group == "same" else not is_same
        in_window = lo <= r.start_time <= obs.start_time
        same_od = r.od == obs.od
        if wanted and in_window and same_od:
            out[r.action] += r.start_time - lo
    return out


@st.composite
def random_log(draw):
    n = draw(st.integers(0, 20))
    records = []
    for i in range(n):
        records.append(
            TurnRecord(
                driver_id=f"d{i}",
                group=draw(st.sampled_from(["human", "av"])),
                od=draw(st.sampled_from([OD_A, OD_B])),
                start_time=float(draw(st.integers(0, 3599))),
                action=draw(st.integers(0, 2)),
            )
        )
    return records


@settings(max_examples=200)
@given(random_log(), st.integers(0, 3599), st.sampled_from(["same", "other"]))
def test_matches_brute_force_oracle(records, obs_start, target_group):
    obs = Observer("k", "av", OD_A, float(obs_start))
    log = log_of(*[(r.driver_id, r.group, r.od, r.start_time, r.action) for r in records])
    got = warmth(log, obs, 300.0, target_group)
    want = brute_force_warmth(records, obs, 300.0, target_group)
    assert got.tolist() == pytest.approx(want, abs=1e-9)


@settings(max_examples=100)
@given(random_log(), random_log())
def test_warmth_is_additive_over_disjoint_logs(recs_a, recs_b):
    obs = av_observer()
    recs_b = [
        TurnRecord(f"b{i}", r.group, r.od, r.start_time, r.action)
        for i, r in enumerate(recs_b)
    ]
    merged = log_of(*[(r.driver_id, r.group, r.od, r.start_time, r.action) for r in recs_a + recs_b])
    part_a = log_of(*[(r.driver_id, r.group, r.od, r.start_time, r.action) for r in recs_a])
    part_b = log_of(*[(r.driver_id, r.group, r.od, r.start_time, r.action) for r in recs_b])
    total = warmth(merged, obs, 300.0, "other")
    split = warmth(part_a, obs, 300.0, "other") + warmth(part_b, obs, 300.0, "other")
    assert total.tolist() == pytest.approx(split.tolist(), abs=1e-9)


@settings(max_examples=100)
@given(random_log(), st.integers(-500, 500))
def test_warmth_is_shift_invariant(records, shift):
    obs = Observer("k", "av", OD_A, 1000.0)
    shifted_obs = Observer("k", "av", OD_A, 1000.0 + shift)
    log = log_of(*[(r.driver_id, r.group, r.od, r.start_time, r.action) for r in records])
    shifted_log = log_of(
        *[(r.driver_id, r.group, r.od, r.start_time + shift, r.action) for r in records]
    )
    base = build_state(log, obs, 300.0)
    moved = build_state(shifted_log, shifted_obs, 300.0)
    assert moved.tolist() == pytest.approx(base.tolist(), abs=1e-9)


@settings(max_examples=150)
@given(random_log(), st.integers(0, 3599))
def test_warmth_index_matches_build_state(records, obs_start):
    from routechoice.stateobs import WarmthIndex

    records = sorted(records, key=lambda r: (r.start_time, r.driver_id))
    records = [r for r in records if r.start_time <= obs_start]
    obs = Observer("k", "av", OD_A, float(obs_start))
    log = log_of(*[(r.driver_id, r.group, r.od, r.start_time, r.action) for r in records])
    index = WarmthIndex()
    for r in records:
        index.append(r)
    fast = index.state_for(obs, 300.0)
    slow = build_state(log, obs, 300.0)
    assert fast.tolist() == pytest.approx(slow.tolist(), abs=1e-9)


def test_warmth_index_rejects_out_of_order_records():
    from routechoice.stateobs import WarmthIndex

    index = WarmthIndex()
    index.append(TurnRecord("a", "human", OD_A, 100.0, 0))
    with pytest.raises(ValueError, match="order"):
        index.append(TurnRecord("b", "human", OD_A, 99.0, 0))
    with pytest.raises(ValueError, match="observer"):
        index.state_for(av_observer(start=50.0), 300.0)
