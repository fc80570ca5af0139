import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from docosim.delays import (
    DelaySchedule,
    arrival_table,
    delay_stats,
    feedback_arrivals,
    generate_schedule,
    load_schedule_csv,
    missing_counts,
    save_schedule_csv,
    stats_json,
)


def brute_missing(delays):
    """Enumeration oracle: |m_t(u)| = #{tau < t : tau + d_tau(u) >= t}."""
    horizon, agents = delays.shape
    out = np.zeros((horizon, agents), dtype=int)
    for u in range(agents):
        for t in range(1, horizon + 1):
            out[t - 1, u] = sum(
                1 for tau in range(1, t) if tau + delays[tau - 1, u] >= t
            )
    return out


def custom(delays):
    arr = np.asarray(delays, dtype=int)
    return generate_schedule("custom", {"delays": arr}, arr.shape[1], arr.shape[0], 0)


class TestGenerate:
    def test_constant_zero(self):
        s = generate_schedule("constant", {"value": 0}, 3, 5, 0)
        assert not s.delays.any()

    def test_constant_truncation(self):
        s = generate_schedule("constant", {"value": 5}, 1, 4, 0)
        assert s.delays[:, 0].tolist() == [3, 2, 1, 0]

    def test_uniform_deterministic_in_seed(self):
        a = generate_schedule("uniform", {"max": 50}, 36, 200, 7)
        b = generate_schedule("uniform", {"max": 50}, 36, 200, 7)
        c = generate_schedule("uniform", {"max": 50}, 36, 200, 8)
        assert np.array_equal(a.delays, b.delays)
        assert not np.array_equal(a.delays, c.delays)

    def test_trial_changes_schedule(self):
        a = generate_schedule("uniform", {"max": 50}, 6, 100, 7, trial=0)
        b = generate_schedule("uniform", {"max": 50}, 6, 100, 7, trial=1)
        assert not np.array_equal(a.delays, b.delays)

    def test_geometric_supports(self):
        z = generate_schedule("geometric", {"p": 0.4}, 4, 4000, 3)
        assert z.delays.min() == 0
        o = generate_schedule("geometric", {"p": 0.4, "support": "one_based"}, 4, 4000, 3)
        # identical draws shifted by one, apart from horizon truncation
        interior = slice(0, 3000)
        assert np.array_equal(o.delays[interior], z.delays[interior] + 1)

    def test_parameter_validation(self):
        with pytest.raises(ValueError):
            generate_schedule("geometric", {"p": 0.0}, 2, 10, 0)
        with pytest.raises(ValueError):
            generate_schedule("geometric", {"p": 1.2}, 2, 10, 0)
        with pytest.raises(ValueError):
            generate_schedule("uniform", {"max": -1}, 2, 10, 0)
        with pytest.raises(ValueError):
            generate_schedule("constant", {"value": -2}, 2, 10, 0)

    def test_horizon_invariant_enforced(self):
        with pytest.raises(ValueError):
            DelaySchedule(np.array([[3], [0]]), "custom")


class TestMissingCounts:
    def test_zero_delays(self):
        s = generate_schedule("constant", {"value": 0}, 4, 6, 0)
        assert not missing_counts(s).any()

    def test_hand_example(self):
        s = custom([[2], [0], [0]])
        assert missing_counts(s)[:, 0].tolist() == [0, 1, 1]

    def test_constant_interior_formula(self):
        d = 4
        s = generate_schedule("constant", {"value": d}, 1, 30, 0)
        m = missing_counts(s)[:, 0]
        for t in range(1, 26):  # interior rounds, before truncation bites
            assert m[t - 1] == min(d, t - 1)

    @settings(max_examples=60, deadline=None)
    @given(
        st.integers(min_value=1, max_value=12),
        st.integers(min_value=1, max_value=4),
        st.integers(min_value=0, max_value=2 ** 31 - 1),
    )
    def test_matches_enumeration_oracle(self, horizon, agents, seed):
        gen = np.random.default_rng(seed)
        raw = gen.integers(0, horizon, size=(horizon, agents))
        s = custom(np.minimum(raw, horizon - np.arange(1, horizon + 1)[:, None]))
        assert np.array_equal(missing_counts(s), brute_missing(s.delays))

    def test_partition_with_observed(self):
        s = generate_schedule("uniform", {"max": 9}, 5, 40, 11)
        m = missing_counts(s)
        t_idx = np.arange(1, 41)[:, None]
        observed = (t_idx - 1) - m
        assert np.all(observed >= 0) and np.all(observed + m == t_idx - 1)


class TestDelayStats:
    def test_zero(self):
        s = generate_schedule("constant", {"value": 0}, 3, 9, 0)
        stats = delay_stats(s, 3)
        assert stats.delta_max == 0.0 and stats.total_delay == 0.0
        assert not stats.block_missing.any()

    def test_hand_example(self):
        s = custom([[2], [0], [0]])
        stats = delay_stats(s, 1)
        assert stats.delta_max == 1.0
        assert stats.total_delay == 2.0

    def test_block_budget_inequality_random(self):
        # B * sum_s |m_{sB+1}(u)| <= sum_t d_t(u) + B*T for every agent
        for seed in range(25):
            s = generate_schedule("uniform", {"max": 30}, 6, 120, seed)
            stats = delay_stats(s, 7)
            lhs = 7 * stats.block_missing.sum(axis=0)
            rhs = s.delays.sum(axis=0) + 7 * 120
            assert np.all(lhs <= rhs)
            # and the averaged per-block form
            assert np.all(7 * stats.block_missing_avg <= stats.total_delay + 7 * 120)

    def test_delta_max_bounded_by_mean_max_delay(self):
        s = generate_schedule("geometric", {"p": 0.2}, 8, 150, 4)
        assert delay_stats(s, 5).delta_max <= s.delays.max(axis=0).mean()

    def test_final_partial_block_boundary_is_horizon_plus_one(self):
        s = generate_schedule("uniform", {"max": 10}, 3, 10, 2)
        stats = delay_stats(s, 4)  # blocks of 4: boundaries 5, 9, 11
        assert stats.block_missing.shape == (3, 3)
        # nothing is outstanding after the horizon (truncation guarantees it)
        assert not stats.block_missing[-1].any()


class TestArrivals:
    def test_zero_delays_all_round_items(self):
        s = generate_schedule("constant", {"value": 0}, 3, 4, 0)
        assert feedback_arrivals(s, 2) == [(1, 2), (2, 2), (3, 2)]

    def test_hand_example(self):
        s = custom([[2], [0], [0]])
        assert sorted(feedback_arrivals(s, 3)) == [(1, 1), (1, 3)]

    def test_conservation(self):
        s = generate_schedule("uniform", {"max": 12}, 4, 25, 9)
        seen = set()
        total = 0
        for t in range(1, 26):
            for (u, tau) in feedback_arrivals(s, t):
                assert tau + s.delays[tau - 1, u - 1] == t
                assert (u, tau) not in seen
                seen.add((u, tau))
                total += 1
        assert total == 4 * 25

    def test_table_matches_per_round_listing(self):
        s = generate_schedule("geometric", {"p": 0.3}, 3, 30, 1)
        table = arrival_table(s)
        for t in range(1, 31):
            taus, who = table[t - 1]
            got = sorted((int(u + 1), int(tau + 1)) for tau, u in zip(taus, who))
            assert got == sorted(feedback_arrivals(s, t))

    def test_round_out_of_range(self):
        s = generate_schedule("constant", {"value": 0}, 2, 5, 0)
        with pytest.raises(ValueError):
            feedback_arrivals(s, 6)


def test_csv_round_trip(tmp_path):
    s = generate_schedule("uniform", {"max": 7}, 3, 12, 5)
    path = tmp_path / "sched.csv"
    save_schedule_csv(s, path)
    s2 = load_schedule_csv(path)
    assert np.array_equal(s.delays, s2.delays)


def test_stats_json_fields():
    s = generate_schedule("uniform", {"max": 5}, 4, 20, 0)
    payload = json.loads(stats_json(delay_stats(s, 4)))
    assert set(payload) == {"delta_max", "total_delay", "block_len", "block_missing_avg"}
    assert len(payload["block_missing_avg"]) == 5
