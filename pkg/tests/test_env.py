import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from satbandits.env import (Environment, MeanSchedule, NoiseSpec, alternating_schedule, check_assumptions,
                            means_at, regret_per_round, sample_reward, satisficing_regret, segment_count)
from satbandits.errors import ContractError, RangeError
from satbandits.hard_instances import build_environment, sample_nu, swap_window_params


@pytest.fixture
def two_segment():
    return MeanSchedule(2, 10, (1, 6, 11), np.array([[0.9, 0.1], [0.1, 0.9]]))


def brute_segment_count(dense, s, t):
    return 1 + sum(np.any(dense[j - 1] != dense[j]) for j in range(s, t))


def test_segment_count_examples(two_segment):
    assert segment_count(two_segment, 1, 10) == 2
    assert segment_count(two_segment, 1, 5) == 1
    assert segment_count(two_segment, 5, 6) == 2
    const = MeanSchedule.constant([0.3, 0.4], 50)
    assert all(segment_count(const, s, t) == 1 for s, t in [(1, 50), (7, 7), (3, 40)])


def test_segment_count_range_errors(two_segment):
    for s, t in [(0, 5), (3, 2), (1, 11)]:
        with pytest.raises(RangeError):
            segment_count(two_segment, s, t)


def test_means_at(two_segment):
    assert tuple(means_at(two_segment, 5)) == (0.9, 0.1)
    assert tuple(means_at(two_segment, 6)) == (0.1, 0.9)
    assert tuple(means_at(MeanSchedule.constant([0.7], 3), 1)) == (0.7,)
    with pytest.raises(RangeError):
        means_at(two_segment, 11)


def test_schedule_validation():
    with pytest.raises(ContractError):
        MeanSchedule(1, 4, (1, 3, 5), np.array([[0.2], [0.2]]))  # identical adjacent segments
    with pytest.raises(ContractError):
        MeanSchedule.constant([1.2], 4)
    with pytest.raises(ContractError):
        MeanSchedule(1, 4, (1, 3), np.array([[0.2]]))


def test_from_dense_merges_equal_rows(two_segment):
    rebuilt = MeanSchedule.from_dense(two_segment.dense())
    assert rebuilt.change_points == (1, 6, 11)
    assert np.array_equal(rebuilt.segment_means, two_segment.segment_means)


@st.composite
def dense_schedules(draw):
    T = draw(st.integers(1, 40))
    K = draw(st.integers(1, 3))
    levels = st.sampled_from([0.0, 0.25, 0.5, 0.75, 1.0])
    return np.array(draw(st.lists(st.lists(levels, min_size=K, max_size=K), min_size=T, max_size=T)))


@given(dense_schedules(), st.data())
def test_segment_count_matches_definition(dense, data):
    sched = MeanSchedule.from_dense(dense)
    T = sched.horizon
    s = data.draw(st.integers(1, T))
    t = data.draw(st.integers(s, T))
    assert segment_count(sched, s, t) == brute_segment_count(dense, s, t)
    assert segment_count(sched, 1, T) == sched.num_segments
    u = data.draw(st.integers(s, t))
    if u < t:
        split = segment_count(sched, s, u) + segment_count(sched, u + 1, t)
        assert split in (segment_count(sched, s, t), segment_count(sched, s, t) + 1)


def test_sample_reward_zero_noise():
    env = Environment(MeanSchedule.constant([0.9, 0.1], 5), 0.5, NoiseSpec("zero"))
    assert sample_reward(env, 3, 1, np.random.default_rng(0)) == 0.9
    with pytest.raises(RangeError):
        sample_reward(env, 3, 3, np.random.default_rng(0))


def test_sample_reward_replays_seeded_draw():
    env = Environment(MeanSchedule.constant([0.9, 0.1], 5), 0.5)
    r = sample_reward(env, 2, 2, np.random.default_rng(42))
    assert r - 0.1 == pytest.approx(np.random.default_rng(42).standard_normal(), abs=1e-15)


def test_noise_law_of_large_numbers():
    noise = NoiseSpec().draw_many(np.random.default_rng(3), 10**6)
    assert abs(noise.mean()) < 4 / math.sqrt(10**6)


def test_check_assumptions_examples():
    prm = swap_window_params(600, 5, 0.3, 0.5)
    swap = build_environment(prm, sample_nu(prm, np.random.default_rng(0))).schedule
    assert vars(check_assumptions(swap, 0.5)) == dict(realizable=True, always_realizable=False, no_down_crossing=False)
    T = 100
    step = MeanSchedule(2, T, (1, T // 2 + 1, T + 1), np.array([[0.8, 0.2], [0.8, 0.7]]))
    assert vars(check_assumptions(step, 0.5)) == dict(realizable=True, always_realizable=True, no_down_crossing=True)
    low = MeanSchedule.constant([0.4, 0.4], T)
    assert vars(check_assumptions(low, 0.5)) == dict(realizable=False, always_realizable=False, no_down_crossing=True)


@given(dense_schedules(), st.data())
def test_no_down_crossing_survives_truncation(dense, data):
    sched = MeanSchedule.from_dense(dense)
    T2 = data.draw(st.integers(1, sched.horizon))
    if check_assumptions(sched, 0.5).no_down_crossing:
        assert check_assumptions(MeanSchedule.from_dense(dense[:T2]), 0.5).no_down_crossing


def test_satisficing_regret_examples():
    sched = MeanSchedule.constant([0.9, 0.1], 3)
    assert satisficing_regret(sched, 0.5, [2, 2, 1]) == pytest.approx(0.8, abs=1e-12)
    assert satisficing_regret(sched, 0.5, [1, 1, 1]) == 0.0
    with pytest.raises(ContractError):
        satisficing_regret(sched, 0.5, [1, 1])


def test_swap_window_regret_is_delta_times_wrong_pulls():
    prm = swap_window_params(900, 7, 0.25, 0.5)
    rng = np.random.default_rng(11)
    env = build_environment(prm, sample_nu(prm, rng))
    actions = rng.integers(1, 3, size=prm.T)
    per_round = regret_per_round(env.schedule, 0.5, actions)
    wrong = np.count_nonzero(per_round > 0)
    assert satisficing_regret(env.schedule, 0.5, actions) == pytest.approx(prm.delta * wrong, rel=1e-12)
    assert satisficing_regret(env.schedule, 0.5, actions) == pytest.approx(math.fsum(per_round), rel=1e-12)


@settings(max_examples=60)
@given(dense_schedules(), st.data())
def test_regret_nonnegative_and_additive(dense, data):
    sched = MeanSchedule.from_dense(dense)
    T, K = sched.horizon, sched.num_arms
    actions = np.array(data.draw(st.lists(st.integers(1, K), min_size=T, max_size=T)))
    total = satisficing_regret(sched, 0.5, actions)
    per_round = regret_per_round(sched, 0.5, actions)
    assert total >= 0
    assert (total == 0) == bool(np.all(sched.dense()[np.arange(T), actions - 1] >= 0.5))
    cut = data.draw(st.integers(0, T))
    assert per_round[:cut].sum() + per_round[cut:].sum() == pytest.approx(total, abs=1e-9)


def test_alternating_schedule_segments():
    for L in (1, 2, 4, 8):
        sched = alternating_schedule(4096, L, 0.3, 0.5)
        assert segment_count(sched, 1, 4096) == L
        assert np.allclose(np.sort(sched.segment_means, axis=1), [[0.2, 0.8]] * L)


def test_environment_roundtrip():
    env = Environment(MeanSchedule(2, 10, (1, 6, 11), np.array([[0.9, 0.1], [0.1, 0.9]])), 0.5)
    d = env.to_dict()
    assert set(d) == {"K", "T", "S", "change_points", "segment_means"}
    back = Environment.from_dict(d)
    assert back.schedule.change_points == env.schedule.change_points
    assert back.threshold == 0.5
