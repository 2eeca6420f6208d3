from __future__ import annotations

import math
from fractions import Fraction

import numpy as np
import pytest

from conftest import lorenz_chain_n5
from riskcontest.equilibrium import build, scale_h
from riskcontest.errors import DimensionMismatch, IdenticalSchemes, OutOfRange
from riskcontest.market import MarketParams, RewardScheme, random_scheme
from riskcontest.metrics import (
    CrossDirection,
    expected_duration,
    expected_performance,
    expected_utility,
    exponential_utility,
    linear_utility,
    order_stat_mean,
    order_stat_mean_residual,
    phi_coeff,
    power_utility,
    second_order_dominance,
    single_crossing,
)


def wta_eq(n=2, mu=0.0, sigma=1.0, x0=100.0):
    return build(MarketParams(x0=x0, mu=mu, sigma=sigma, n=n),
                 RewardScheme.winner_takes_all(n))


class TestExpectedPerformance:
    def test_driftless_equals_start(self, rng):
        for _ in range(10):
            n = int(rng.integers(2, 9))
            market = MarketParams(x0=float(rng.uniform(0.5, 150)), mu=0.0, sigma=1.0, n=n)
            eq = build(market, random_scheme(n, rng))
            assert expected_performance(eq) == pytest.approx(market.x0, rel=1e-9)

    def test_drift_direction(self, rng):
        scheme = random_scheme(4, rng)
        down = build(MarketParams(x0=10.0, mu=-0.05, sigma=1.0, n=4), scheme)
        up = build(MarketParams(x0=10.0, mu=0.004, sigma=1.0, n=4), scheme)
        assert expected_performance(down) < 10.0
        assert expected_performance(up) > 10.0

    def test_lorenz_monotone_negative_drift(self):
        # more inequality means longer gambling, hence larger losses
        values = [expected_performance(build(MarketParams(100.0, -0.01, 1.0, 5), s))
                  for s in lorenz_chain_n5()]
        assert all(a < b for a, b in zip(values, values[1:]))


class TestExpectedDuration:
    def test_driftless_closed_case(self):
        # F uniform on [0, 200]: E[X^2] = 40000/3, so E[tau] = 10000/3
        assert expected_duration(wta_eq()) == pytest.approx(10000.0 / 3.0, rel=1e-10)

    def test_uniform_shorter_than_wta(self):
        market = MarketParams(x0=5.0, mu=0.0, sigma=1.0, n=4)
        wta = build(market, RewardScheme.winner_takes_all(4))
        uni = build(market, RewardScheme.uniform(4))
        assert expected_duration(uni) < expected_duration(wta)

    def test_drifted_uses_mean_identity(self, rng):
        market = MarketParams(x0=1.0, mu=-0.2, sigma=1.0, n=3)
        eq = build(market, random_scheme(3, rng))
        expected = (expected_performance(eq) - 1.0) / -0.2
        assert expected_duration(eq) == pytest.approx(expected, rel=1e-12)
        assert expected_duration(eq) > 0

    def test_most_equal_limit_trend(self):
        # the most equal normalized scheme is the uniform one; as n grows its
        # equilibrium concentrates at x0 and the duration falls to zero
        durations = [expected_duration(build(MarketParams(1.0, 0.0, 1.0, n),
                                             RewardScheme.uniform(n)))
                     for n in (2, 4, 8, 16, 32)]
        assert all(a > b for a, b in zip(durations, durations[1:]))
        assert durations[-1] < 0.02


class TestExpectedUtility:
    def test_identity_matches_performance(self, rng):
        eq = build(MarketParams(3.0, -0.1, 1.0, 4), random_scheme(4, rng))
        assert expected_utility(eq, linear_utility()) == pytest.approx(
            expected_performance(eq), rel=1e-12)

    def test_affine_in_scale_function(self, rng):
        # phi = a h + b integrates to a + b against any equilibrium law
        market = MarketParams(1.0, 0.01, 1.0, 3)
        eq = build(market, random_scheme(3, rng))
        phi = lambda x: 2.0 * np.asarray(scale_h(market, x)) + 3.0
        assert expected_utility(eq, phi) == pytest.approx(5.0, abs=1e-10)

    def test_power_utility_prefers_inequality_when_convex(self):
        market = MarketParams(1.0, 0.0, 1.0, 3)
        wta = build(market, RewardScheme.winner_takes_all(3))
        uni = build(market, RewardScheme.uniform(3))
        phi = power_utility(2.0)
        assert expected_utility(wta, phi) > expected_utility(uni, phi)

    def test_exponential_ordering_flips_at_critical_gamma(self):
        # bull market, CARA principal: inequality wins iff gamma < 2 mu / sigma^2
        market = MarketParams(1.0, 0.01, 1.0, 3)  # critical gamma = 0.02
        wta = build(market, RewardScheme.winner_takes_all(3))
        uni = build(market, RewardScheme.uniform(3))
        low = exponential_utility(0.01)
        high = exponential_utility(0.04)
        assert expected_utility(wta, low) > expected_utility(uni, low)
        assert expected_utility(wta, high) < expected_utility(uni, high)


class TestPhiCoeff:
    def test_two_player_values(self):
        assert phi_coeff(2, 1, 1) == 2
        assert phi_coeff(2, 1, 2) == 1

    def test_ratio_identity(self):
        for n in (4, 7, 12):
            for k in range(1, n):
                for l in range(1, n):
                    ratio = phi_coeff(n, k, l + 1) / phi_coeff(n, k, l)
                    assert ratio == Fraction((k + l - 1) * (n - l), (2 * n - k - l) * l)

    def test_unimodal_peak_at_k(self):
        n = 9
        for k in range(1, n):
            row = [phi_coeff(n, k, l) for l in range(1, n)]
            peak = k - 1
            assert all(row[i] < row[i + 1] for i in range(peak))
            assert all(row[i] > row[i + 1] for i in range(peak, len(row) - 1))

    def test_big_n_exact(self):
        # far past float factorial range, still exact
        value = phi_coeff(200, 3, 5)
        assert value == Fraction(math.factorial(392) * math.factorial(6),
                                 math.factorial(195) * math.factorial(4))

    def test_out_of_range(self):
        with pytest.raises(OutOfRange):
            phi_coeff(5, 6, 1)


class TestOrderStatMean:
    def test_driftless_two_player_max(self):
        # uniform [0, 200] sample of two: E[max] = 2/3 * 200
        assert order_stat_mean(wta_eq(), 1) == pytest.approx(400.0 / 3.0, rel=1e-12)

    def test_rank_sum_identity_driftless(self, rng):
        eq = build(MarketParams(1.0, 0.0, 1.0, 5), random_scheme(5, rng))
        ranks = [order_stat_mean(eq, k) for k in range(1, 5)]
        residual = order_stat_mean_residual(eq)
        assert math.fsum(ranks) + residual == pytest.approx(5 * 1.0, rel=1e-10)

    def test_decreasing_in_rank(self, rng):
        for mu in (0.0, -0.4, 0.003):
            eq = build(MarketParams(1.0, mu, 1.0, 6), random_scheme(6, rng))
            values = [order_stat_mean(eq, k) for k in range(1, 6)]
            assert all(a > b for a, b in zip(values, values[1:]))

    @pytest.mark.parametrize("mu", [-0.5, 0.0, 0.001])
    def test_top_rank_lorenz_monotone(self, mu):
        # E[Y^(1)] strictly grows with reward inequality in any market
        chain = lorenz_chain_n5()
        values = [order_stat_mean(build(MarketParams(1.0, mu, 1.0, 5), s), 1)
                  for s in chain]
        assert all(a > b for a, b in zip(values, values[1:]))

    def test_quadrature_continuous_at_zero_drift(self):
        # the drifted quadrature path at mu = +-1e-9 must agree with the
        # driftless closed form to 1e-8 (exercised at x0 = sigma = 1)
        for n in (2, 3, 4):
            scheme = RewardScheme.winner_takes_all(n)
            eq0 = build(MarketParams(1.0, 0.0, 1.0, n), scheme)
            for mu in (1e-9, -1e-9):
                eq = build(MarketParams(1.0, mu, 1.0, n), scheme)
                for k in range(1, n):
                    assert order_stat_mean(eq, k) == pytest.approx(
                        order_stat_mean(eq0, k), abs=1e-8)

    def test_rank_out_of_range(self):
        eq = wta_eq(n=4)
        with pytest.raises(OutOfRange):
            order_stat_mean(eq, 0)
        with pytest.raises(OutOfRange):
            order_stat_mean(eq, 4)  # last rank only via the residual helper


class TestSingleCrossing:
    def test_lorenz_pair_crosses_once_from_below(self):
        market = MarketParams(100.0, -0.01, 1.0, 3)
        more = build(market, RewardScheme.winner_takes_all(3))
        less = build(market, RewardScheme.uniform(3))
        report = single_crossing(more, less)
        assert report.is_strict_single_crossing
        ((location, direction),) = report.crossings
        assert direction is CrossDirection.UP
        assert 0 < location < more.xbar

    def test_common_crossing_point_when_two_ranks_vary(self):
        # schemes differing only in the first two ranks share one crossing x
        market = MarketParams(100.0, -0.01, 1.0, 3)
        eqs = [build(market, RewardScheme(r))
               for r in ((0.9, 0.1, 0.0), (0.7, 0.3, 0.0), (0.5, 0.5, 0.0))]
        locations = []
        for i in range(len(eqs)):
            for j in range(i + 1, len(eqs)):
                report = single_crossing(eqs[i], eqs[j])
                assert report.is_strict_single_crossing
                locations.append(report.crossings[0][0])
        assert max(locations) - min(locations) < 1e-6

    def test_quantile_cross_maps_through_cdf(self):
        # F-crossing at x1 shows up as a down-crossing of the quantile gap at
        # y1 = F(x1)
        market = MarketParams(100.0, -0.01, 1.0, 3)
        eq_a = build(market, RewardScheme.winner_takes_all(3))
        eq_b = build(market, RewardScheme.uniform(3))
        ((x1, _),) = single_crossing(eq_a, eq_b).crossings
        y1 = float(eq_a.cdf(x1))
        gap = lambda y: float(eq_b.quantile(y)) - float(eq_a.quantile(y))
        lo, hi = 1e-6, 1 - 1e-6
        assert gap(lo) > 0 > gap(hi)
        for _ in range(60):
            mid = 0.5 * (lo + hi)
            if gap(mid) > 0:
                lo = mid
            else:
                hi = mid
        assert 0.5 * (lo + hi) == pytest.approx(y1, abs=1e-6)

    def test_identical_schemes_rejected(self):
        market = MarketParams(1.0, 0.0, 1.0, 3)
        eq = build(market, RewardScheme.uniform(3))
        with pytest.raises(IdenticalSchemes):
            single_crossing(eq, build(market, RewardScheme.uniform(3)))

    def test_market_mismatch_rejected(self):
        eq_a = build(MarketParams(1.0, 0.0, 1.0, 3), RewardScheme.uniform(3))
        eq_b = build(MarketParams(2.0, 0.0, 1.0, 3), RewardScheme.winner_takes_all(3))
        with pytest.raises(DimensionMismatch):
            single_crossing(eq_a, eq_b)


class TestSecondOrderDominance:
    def test_negative_drift_less_inequality_dominates(self):
        market = MarketParams(100.0, -0.01, 1.0, 3)
        wta = build(market, RewardScheme.winner_takes_all(3))
        uni = build(market, RewardScheme.uniform(3))
        assert second_order_dominance(wta, uni)
        assert not second_order_dominance(uni, wta)

    def test_reflexive(self):
        eq = wta_eq(n=3, mu=-0.05, x0=10.0)
        assert second_order_dominance(eq, eq)

    def test_positive_drift_unordered(self):
        # in a bull market the CARA example shows neither law can dominate
        market = MarketParams(1.0, 0.01, 1.0, 3)
        wta = build(market, RewardScheme.winner_takes_all(3))
        uni = build(market, RewardScheme.uniform(3))
        assert not second_order_dominance(wta, uni)
        assert not second_order_dominance(uni, wta)
