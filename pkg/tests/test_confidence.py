import numpy as np
import pytest
from scipy import stats

from dpcert.confidence import (ConfidenceBounds, ScoreTable, VoteTable,
                               bernstein_half_width, beta_quantile,
                               empirical_bernstein_bounds, hoeffding_bounds,
                               hoeffding_half_width, simuem_bounds)

import oracles


class TestBetaQuantile:
    def test_against_scipy(self):
        for p, a, b in [(0.0005, 70, 31), (0.9995, 31, 70), (0.05, 3, 8),
                        (0.5, 1, 1), (0.999, 12, 1)]:
            assert beta_quantile(p, a, b) == pytest.approx(
                stats.beta.ppf(p, a, b), abs=1e-9)

    def test_against_mpmath(self):
        assert beta_quantile(0.0005, 70, 31) == pytest.approx(
            0.53331357945515827, abs=1e-10)


class TestSimuEM:
    def test_unanimous_closed_form(self):
        # all P votes on one label: lower bound is (eta/L)^(1/P)
        for P, L, eta in [(50, 2, 0.001), (100, 4, 0.05)]:
            counts = np.zeros(L, dtype=int)
            counts[0] = P
            b = simuem_bounds(counts, eta)
            assert b.top_label == 0
            assert b.p_lower == pytest.approx((eta / L) ** (1.0 / P), abs=1e-9)

    def test_tie_break_by_lowest_index(self):
        b = simuem_bounds(np.array([25, 25, 25, 25]), 0.05)
        assert (b.top_label, b.rival_label) == (0, 1)
        assert b.p_lower <= 0.25

    def test_frozen_70_30(self):
        b = simuem_bounds(np.array([70, 30]), 0.001)
        assert b.top_label == 0 and b.rival_label == 1
        assert b.p_lower == pytest.approx(0.53331357945515827, abs=1e-9)
        assert b.p_upper == pytest.approx(0.46668642054484173, abs=1e-9)

    def test_matches_mpmath_oracle(self):
        b = simuem_bounds(np.array([88, 10, 2]), 0.01)
        assert b.p_lower == pytest.approx(
            oracles.beta_quantile(0.01 / 3, 88, 13), abs=1e-9)
        assert b.p_upper == pytest.approx(
            oracles.beta_quantile(1 - 0.01 / 3, 11, 90), abs=1e-9)

    def test_brackets_empirical_frequency(self):
        rng = np.random.default_rng(0)
        for _ in range(50):
            counts = rng.multinomial(60, [0.5, 0.3, 0.2])
            b = simuem_bounds(counts, 0.05)
            assert b.p_lower <= counts[b.top_label] / 60
            assert b.p_upper >= counts[b.rival_label] / 60

    def test_monotone_in_eta(self):
        wide = simuem_bounds(np.array([70, 30]), 0.001)
        narrow = simuem_bounds(np.array([70, 30]), 0.1)
        assert wide.p_lower < narrow.p_lower
        assert wide.p_upper > narrow.p_upper

    def test_shrinks_with_instances(self):
        small = simuem_bounds(np.array([35, 15]), 0.01)
        big = simuem_bounds(np.array([350, 150]), 0.01)
        assert big.p_lower > small.p_lower
        assert big.p_upper < small.p_upper

    def test_errors(self):
        with pytest.raises(ValueError):
            simuem_bounds(np.array([0, 0]), 0.05)
        with pytest.raises(ValueError):
            simuem_bounds(np.array([5]), 0.05)
        with pytest.raises(ValueError):
            simuem_bounds(np.array([5, 5]), 1.5)


class TestHoeffding:
    def test_half_width_value(self):
        assert hoeffding_half_width(0.05, 1, 100) == pytest.approx(
            0.13581015157406195, abs=1e-12)

    def test_width_vanishes_asymptotically(self):
        widths = [hoeffding_half_width(0.05, 2, P) for P in (10, 1000, 10 ** 8)]
        assert widths == sorted(widths, reverse=True)
        assert widths[-1] < 1e-3

    def test_constant_scores_centered(self):
        scores = np.tile([0.8, 0.2], (40, 1))
        b = hoeffding_bounds(scores, 0.05)
        hw = hoeffding_half_width(0.05, 2, 40)
        assert b.top_label == 0
        assert b.p_lower == pytest.approx(0.8 - hw)
        assert b.p_upper == pytest.approx(0.2 + hw)

    def test_rival_is_max_upper_bound(self):
        scores = np.tile([0.5, 0.26, 0.24], (30, 1))
        b = hoeffding_bounds(scores, 0.05)
        assert b.top_label == 0 and b.rival_label == 1

    def test_clamped_to_unit_interval(self):
        b = hoeffding_bounds(np.tile([0.99, 0.01], (5, 1)), 0.2)
        assert 0.0 <= b.p_lower and b.p_upper <= 1.0


class TestBernstein:
    def test_constant_scores_use_only_tail_term(self):
        P, L, eta = 60, 2, 0.05
        b = empirical_bernstein_bounds(np.tile([0.7, 0.3], (P, 1)), eta)
        tail = 7.0 * np.log(2 * L / eta) / (3 * (P - 1))
        assert b.p_lower == pytest.approx(0.7 - tail)

    def test_two_instance_variance(self):
        scores = np.array([[0.0, 1.0], [1.0, 0.0]])
        hw = bernstein_half_width(0.5, 0.05, 2, 2)
        expected = np.sqrt(2 * 0.5 * np.log(80.0) / 2) + 7 * np.log(80.0) / 3
        assert hw == pytest.approx(expected)
        b = empirical_bernstein_bounds(scores, 0.05)
        assert b.p_lower == 0.0  # clamped: the interval swallows [0,1]

    def test_beats_hoeffding_on_low_variance(self):
        rng = np.random.default_rng(3)
        s0 = np.clip(rng.normal(0.9, 0.01, 500), 0.0, 1.0)
        scores = np.column_stack([s0, 1.0 - s0])
        hb = hoeffding_bounds(scores, 0.05)
        bb = empirical_bernstein_bounds(scores, 0.05)
        assert (bb.p_lower > hb.p_lower) and (bb.p_upper < hb.p_upper)

    def test_needs_two_instances(self):
        with pytest.raises(ValueError):
            empirical_bernstein_bounds(np.array([[0.5, 0.5]]), 0.05)


class TestCoverageQuick:
    def test_lower_bound_covers_true_p(self):
        # small-scale version of the full coverage gate
        rng = np.random.default_rng(42)
        eta, P, p, trials = 0.05, 100, 0.7, 2000
        hits = 0
        for n1 in rng.binomial(P, p, size=trials):
            b = simuem_bounds(np.array([n1, P - n1]), eta)
            true_top = p if b.top_label == 0 else 1.0 - p
            hits += b.p_lower <= true_top
        assert hits / trials >= 1.0 - eta - 0.02


class TestTables:
    def test_vote_table_validation(self):
        with pytest.raises(ValueError):
            VoteTable(("a",), np.array([[3, 4]]), 8)
        with pytest.raises(ValueError):
            VoteTable(("a",), np.array([[-1, 9]]), 8)
        VoteTable(("a",), np.array([[3, 5]]), 8)

    def test_score_table_validation(self):
        good = np.full((1, 4, 2), 0.5)
        ScoreTable(("a",), good)
        with pytest.raises(ValueError):
            ScoreTable(("a",), np.full((1, 4, 2), 0.4))
        with pytest.raises(ValueError):
            ScoreTable(("a",), -good)

    def test_bounds_validation(self):
        with pytest.raises(ValueError):
            ConfidenceBounds(0, 0.5, 0, 0.5, 0.05)
        with pytest.raises(ValueError):
            ConfidenceBounds(0, 1.5, 1, 0.5, 0.05)
