"""Transition probabilities, lineage-count distributions, and their oracles."""

import math

import numpy as np
import pytest

from bipcover.coalescent import (
    MAX_LINEAGES,
    LineageDistribution,
    convolve,
    evolve,
    expected_lineages_bound,
    g,
    g_stable,
    g_tavare,
)
from bipcover.errors import DomainError, UnstableEvaluation

import oracles

T_GRID = (0.05, 0.2, 0.5, 1.0, 2.0, 5.0)

# Reference values computed at 60 decimal digits from the alternating-sum
# definition (exact rational term coefficients, high-precision exponentials).
HIGH_PRECISION_G = {
    (5, 2, 0.3): 0.19952951544858205,
    (8, 3, 0.5): 0.4238124080975657,
    (12, 1, 1.0): 0.21038923283447344,
    (12, 7, 0.1): 0.24660749154503062,
    (20, 4, 0.2): 0.03224941710444233,
    (30, 1, 0.5): 0.006527745846135824,
    (40, 10, 0.05): 9.758296225297488e-06,
    (60, 2, 1.0): 0.4740644638552117,
}
# Same source, but so deep in the left tail that only coarser relative
# accuracy is achievable in double precision.
HIGH_PRECISION_G_TINY = {
    (512, 1, 0.3): 8.662027604023835e-06,
    (30, 1, 0.05): 9.957578287082837e-18,
    (42, 1, 0.05): 7.094943160544473e-21,
    (200, 1, 0.05): 1.7833280289004473e-33,
}


class TestClosedForms:
    @pytest.mark.parametrize("T", T_GRID)
    def test_two_lineages(self, T):
        assert g(2, 1, T) == pytest.approx(1.0 - math.exp(-T), abs=1e-12)
        assert g(2, 2, T) == pytest.approx(math.exp(-T), abs=1e-12)

    @pytest.mark.parametrize("T", T_GRID)
    def test_three_lineages(self, T):
        pmf = oracles.small_g_pmf(3, T)
        for j in (1, 2, 3):
            assert g(3, j, T) == pytest.approx(pmf[j], abs=1e-12)

    def test_identity_kernel_at_zero_time(self):
        for i in (1, 2, 5, 17, 30):
            for j in range(1, i + 1):
                assert g(i, j, 0.0) == (1.0 if i == j else 0.0)

    def test_stable_route_matches_closed_forms(self):
        assert g_stable(2, 2, 1.0) == pytest.approx(math.exp(-1.0), abs=1e-12)
        expected = 1.5 * (math.exp(-0.2) - math.exp(-0.6))
        assert g_stable(3, 2, 0.2) == pytest.approx(expected, abs=1e-12)

    def test_single_lineage_is_absorbing(self):
        for T in (0.0, 0.5, 10.0):
            assert g(1, 1, T) == 1.0


class TestAlternatingSumContract:
    def test_matches_dispatcher_when_stable(self):
        for (i, j, T) in ((5, 2, 0.3), (8, 3, 0.5), (12, 7, 0.1)):
            assert g_tavare(i, j, T) == pytest.approx(g(i, j, T), abs=1e-12)

    @pytest.mark.parametrize("i,j,T", ((200, 4, 0.05), (100, 6, 0.1), (60, 7, 0.1)))
    def test_raises_on_catastrophic_cancellation(self, i, j, T):
        with pytest.raises(UnstableEvaluation):
            g_tavare(i, j, T)

    def test_dispatcher_falls_back_to_stable_route(self):
        # Same instance: the dispatcher must return the uniformization value.
        assert g(200, 4, 0.05) == pytest.approx(
            g_stable(200, 4, 0.05), rel=1e-9
        )


class TestAgainstIndependentOracles:
    @pytest.mark.parametrize("case,expected", sorted(HIGH_PRECISION_G.items()))
    def test_high_precision_reference(self, case, expected):
        assert g(*case) == pytest.approx(expected, rel=1e-9)

    @pytest.mark.parametrize("case,expected", sorted(HIGH_PRECISION_G_TINY.items()))
    def test_high_precision_reference_deep_tail(self, case, expected):
        assert g(*case) == pytest.approx(expected, rel=1e-4)

    @pytest.mark.parametrize("i", (5, 12, 30, 60))
    @pytest.mark.parametrize("T", (0.1, 1.0))
    def test_whole_rows_match_matrix_exponential(self, i, T):
        row = np.array([g(i, j, T) for j in range(1, i + 1)])
        assert np.max(np.abs(row - oracles.expm_row(i, T))) < 1e-10

    @pytest.mark.parametrize("i,T", ((5, 0.3), (10, 1.0), (20, 0.1)))
    def test_monte_carlo_agreement(self, i, T):
        n = 1_000_000
        freq = oracles.mc_lineage_frequencies(i, T, n, seed=1904 + i)
        for j in range(1, i + 1):
            p = g(i, j, T)
            if p * n < 10:
                continue
            se = math.sqrt(p * (1.0 - p) / n)
            assert abs(freq[j - 1] - p) < 4.0 * se, f"bin j={j}"


class TestDistributionalInvariants:
    def test_rows_are_stochastic_on_the_contract_grid(self):
        for T in (0.01, 0.1, 0.5, 1.0, 5.0):
            for i in range(1, 61):
                total = math.fsum(g(i, j, T) for j in range(1, i + 1))
                assert abs(total - 1.0) <= 1e-10, (i, T)

    @pytest.mark.parametrize("T", (0.2, 0.5, 1.0, 2.0, 5.0))
    def test_absorption_probability_nonincreasing_in_i(self, T):
        values = [g(i, 1, T) for i in range(2, 41)]
        for a, b in zip(values, values[1:]):
            assert b <= a + 1e-12

    @pytest.mark.parametrize("i", (2, 5, 10, 20, 30))
    def test_absorption_probability_nondecreasing_in_T(self, i):
        grid = np.linspace(0.1, 5.0, 50)
        values = [g(i, 1, T) for T in grid]
        for a, b in zip(values, values[1:]):
            assert b >= a - 1e-12

    @pytest.mark.parametrize("T", (0.2, 0.5, 1.0, 2.0))
    def test_absorption_probability_convex_in_i(self, T):
        values = [g(i, 1, T) for i in range(2, 41)]
        for a, b, c in zip(values, values[1:], values[2:]):
            assert c - 2.0 * b + a >= -1e-12

    @pytest.mark.parametrize("i,j", ((5, 1), (8, 2), (12, 4)))
    def test_log_concave_in_time(self, i, j):
        grid = [0.3 + 0.1 * m for m in range(30)]
        logs = [math.log(g(i, j, T)) for T in grid]
        for a, b, c in zip(logs, logs[1:], logs[2:]):
            assert c - 2.0 * b + a <= 1e-10

    @pytest.mark.parametrize("T", (0.1, 0.5, 1.0))
    def test_likelihood_ratio_order(self, T):
        rows = {i: [g(i, j, T) for j in range(1, i + 1)] for i in range(2, 21)}
        for i in range(2, 21):
            for j in range(i, 21):
                for m in range(1, i + 1):
                    for n in range(m, i + 1):
                        lhs = rows[i][m - 1] * rows[j][n - 1]
                        rhs = rows[i][n - 1] * rows[j][m - 1]
                        assert lhs >= rhs - 1e-14

    def test_domain_validation(self):
        with pytest.raises(DomainError):
            g(0, 1, 1.0)
        with pytest.raises(DomainError):
            g(5, 6, 1.0)
        with pytest.raises(DomainError):
            g(5, 0, 1.0)
        with pytest.raises(DomainError):
            g(5, 2, -0.1)
        with pytest.raises(DomainError):
            g(5, 2, math.inf)
        with pytest.raises(DomainError):
            g(MAX_LINEAGES + 1, 1, 1.0)


class TestLineageDistribution:
    def test_point_mass(self):
        d = LineageDistribution.point(7)
        assert d.min_count == 7 and d.max_count == 7
        assert d.prob(7) == 1.0 and d.prob(6) == 0.0
        assert d.mean() == 7.0

    def test_from_weights_trims_negligible_edges(self):
        d = LineageDistribution.from_weights(1, [1e-18, 0.5, 0.5, 1e-18])
        assert d.min_count == 2 and d.max_count == 3
        assert math.fsum(d.probs) == pytest.approx(1.0, abs=1e-12)

    def test_from_weights_rejects_large_trimmed_mass(self):
        # 2000 sub-threshold edge entries together carry 1.8e-12 of mass,
        # more than trimming is allowed to discard.
        weights = [9e-16] * 2000 + [1.0]
        with pytest.raises(UnstableEvaluation):
            LineageDistribution.from_weights(1, weights)

    def test_validation(self):
        with pytest.raises(DomainError):
            LineageDistribution(0, (1.0,))
        with pytest.raises(DomainError):
            LineageDistribution(1, (0.7, 0.7))
        with pytest.raises(DomainError):
            LineageDistribution(1, (1.5, -0.5))

    def test_cdf_is_cumulative(self):
        d = evolve(LineageDistribution.point(6), 0.4)
        cdf = d.cdf()
        assert cdf[-1] == pytest.approx(1.0, abs=1e-10)
        assert all(b >= a for a, b in zip(cdf, cdf[1:]))
        assert cdf[0] == pytest.approx(d.prob(d.min_count), abs=1e-15)


class TestEvolveAndConvolve:
    def test_evolve_matches_matrix_exponential(self):
        d = evolve(LineageDistribution.point(12), 0.7)
        row = oracles.expm_row(12, 0.7)
        for j in range(1, 13):
            assert d.prob(j) == pytest.approx(row[j - 1], abs=1e-10)

    def test_evolve_zero_time_is_identity(self):
        d = LineageDistribution.from_weights(2, [0.25, 0.5, 0.25])
        assert evolve(d, 0.0) is d

    @pytest.mark.parametrize("split", ((0.3, 0.4), (0.1, 0.9), (1.0, 1.0)))
    def test_evolve_semigroup_property(self, split):
        s, t = split
        start = LineageDistribution.point(15)
        direct = evolve(start, s + t)
        chained = evolve(evolve(start, s), t)
        for j in range(1, 16):
            assert chained.prob(j) == pytest.approx(direct.prob(j), abs=1e-11)

    def test_convolve_matches_dict_accumulation(self):
        a = evolve(LineageDistribution.point(4), 0.5)
        b = evolve(LineageDistribution.point(3), 0.8)
        expected = oracles.conv_dicts(dict(a.items()), dict(b.items()))
        c = convolve(a, b)
        for count, p in expected.items():
            assert c.prob(count) == pytest.approx(p, abs=1e-12)

    def test_convolve_mean_is_additive(self):
        a = evolve(LineageDistribution.point(6), 0.3)
        b = evolve(LineageDistribution.point(9), 1.2)
        assert convolve(a, b).mean() == pytest.approx(a.mean() + b.mean(), abs=1e-12)


class TestExpectedLineagesBound:
    def test_closed_form(self):
        assert expected_lineages_bound(1, 2.0) == 1.0
        i, T = 10, 0.5
        expected = 1.0 / (1.0 - (1.0 - 1.0 / i) * math.exp(-T / 2.0))
        assert expected_lineages_bound(i, T) == pytest.approx(expected, abs=1e-15)

    @pytest.mark.parametrize("i", (2, 5, 10, 40))
    @pytest.mark.parametrize("T", (0.1, 0.5, 2.0))
    def test_dominates_exact_mean(self, i, T):
        exact = evolve(LineageDistribution.point(i), T).mean()
        assert expected_lineages_bound(i, T) >= exact - 1e-12

    @pytest.mark.parametrize("i", (1, 3, 17, 200))
    def test_below_i_free_envelope(self, i):
        for T in (0.2, 1.0, 4.0):
            assert expected_lineages_bound(i, T) <= 1.0 / (1.0 - math.exp(-T / 2.0))

    def test_domain_validation(self):
        with pytest.raises(DomainError):
            expected_lineages_bound(0, 1.0)
        with pytest.raises(DomainError):
            expected_lineages_bound(5, 0.0)
