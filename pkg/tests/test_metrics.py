import itertools
import math

import numpy as np
import pytest
from scipy.stats import norm

from lfire.engine import GridPosterior
from lfire.errors import ConfigError, DegenerateInputError
from lfire.metrics import (
    PairedComparison,
    delta_rel_error,
    forecast_gain,
    quantile_band,
    relative_error,
    skl,
    wilcoxon_signed_rank,
)
from lfire.rng import Rng


def _gaussian_grid(mean, sd, axis):
    return GridPosterior.from_log_values((axis,), norm.logpdf(axis, mean, sd))


class TestSkl:
    def test_identity(self):
        axis = np.linspace(-5, 5, 201)
        p = _gaussian_grid(0.0, 1.0, axis)
        assert skl(p, p) == 0.0

    def test_exact_symmetry(self):
        axis = np.linspace(-6, 6, 301)
        p = _gaussian_grid(0.0, 1.0, axis)
        q = _gaussian_grid(0.7, 1.4, axis)
        assert skl(p, q) == skl(q, p)

    def test_shifted_gaussians_half_nat(self):
        # closed-form oracle: KL(N(0,1) || N(1,1)) = 1/2 each way
        axis = np.arange(-8.0, 9.0, 0.01)
        p = _gaussian_grid(0.0, 1.0, axis)
        q = _gaussian_grid(1.0, 1.0, axis)
        assert skl(p, q) == pytest.approx(0.5, abs=0.01)

    def test_nonnegative(self):
        axis = np.linspace(-5, 5, 101)
        g = Rng(1).generator()
        p = GridPosterior.from_log_values((axis,), g.standard_normal(101))
        q = GridPosterior.from_log_values((axis,), g.standard_normal(101))
        assert skl(p, q) > 0.0

    def test_mismatched_grids_rejected(self):
        p = _gaussian_grid(0.0, 1.0, np.linspace(-5, 5, 101))
        q = _gaussian_grid(0.0, 1.0, np.linspace(-5, 5, 99))
        with pytest.raises(ConfigError):
            skl(p, q)

    def test_zero_nodes_follow_floor_rule(self):
        axis = np.linspace(-1, 1, 5)
        lv_p = np.array([-np.inf, 0.0, 0.0, 0.0, -np.inf])
        lv_q = np.array([-np.inf, 0.0, 0.0, 0.0, 0.0])
        p = GridPosterior.from_log_values((axis,), lv_p)
        q = GridPosterior.from_log_values((axis,), lv_q)
        # both-zero node contributes nothing; the one-sided zero enters
        # through the 1e-300 floor
        pv, qv, cell = p.posterior, q.posterior, p.cell
        floor = 1e-300
        expected = 0.0
        for a, b in zip(pv, qv):
            if a == 0.0 and b == 0.0:
                continue
            lr = np.log(max(a, floor)) - np.log(max(b, floor))
            expected += 0.5 * (a * lr - b * lr) * cell
        assert skl(p, q) == pytest.approx(expected, rel=1e-12)
        assert np.isfinite(skl(p, q))


class TestRelativeError:
    def test_exact_match(self):
        assert np.array_equal(relative_error([1.0, 2.0], [1.0, 2.0]), [0.0, 0.0])

    def test_arithmetic(self):
        assert relative_error([1.1], [1.0])[0] == pytest.approx(0.1, abs=1e-14)

    def test_bruteforce_oracle(self):
        g = Rng(2).generator()
        est, ref = g.normal(1, 2, 20), g.normal(2, 1, 20)
        ref[np.abs(ref) < 0.05] = 0.5
        got = relative_error(est, ref)
        for i in range(20):
            assert got[i] == pytest.approx(abs(est[i] - ref[i]) / abs(ref[i]), abs=1e-15)

    def test_zero_reference_rejected(self):
        with pytest.raises(DegenerateInputError):
            relative_error([1.0], [0.0])


class TestDeltaRelError:
    def test_cases(self):
        assert np.array_equal(delta_rel_error([0.2, 0.2], [0.2, 0.2]), [0.0, 0.0])
        assert delta_rel_error([0.1], [0.3])[0] == pytest.approx(-0.2)

    def test_hand_computed_sign_convention(self):
        # ratio method has error 0.05, baseline 0.25: negative favours the
        # ratio method
        assert delta_rel_error([0.05], [0.25])[0] < 0


class TestForecastGain:
    def test_equal_predictions(self):
        y = Rng(3).generator().standard_normal((4, 8))
        yh = y + 0.5
        assert np.allclose(forecast_gain(y, yh, yh), 0.0)

    def test_perfect_prediction(self):
        y = Rng(4).generator().standard_normal((4, 8))
        ysl = y + 1.0
        assert np.allclose(forecast_gain(y, y, ysl), 1.0)

    def test_arithmetic(self):
        y = np.zeros((1, 4))
        yh = np.array([[0.5, 0.0, 0.0, 0.0]])  # error 0.5
        ysl = np.array([[1.0, 0.0, 0.0, 0.0]])  # error 1.0
        assert forecast_gain(y, yh, ysl)[0] == pytest.approx(0.5)

    def test_zero_denominator(self):
        y = np.ones((2, 3))
        with pytest.raises(DegenerateInputError):
            forecast_gain(y, y + 0.1, y)

    def test_rescaling_invariance(self):
        y = Rng(5).generator().standard_normal((3, 6))
        a = Rng(6).generator().standard_normal((3, 6))
        b = Rng(7).generator().standard_normal((3, 6))
        base = forecast_gain(y, y + a, y + b)
        scaled = forecast_gain(y, y + 4.0 * a, y + 4.0 * b)
        assert np.allclose(base, scaled, atol=1e-12)


def _wilcoxon_oracle(deltas):
    # literal 2^n enumeration over sign assignments with midranks
    d = np.asarray(deltas, dtype=float)
    d = d[d != 0]
    n = d.size
    absd = np.abs(d)
    order = np.argsort(absd, kind="stable")
    ranks = np.empty(n)
    sorted_abs = absd[order]
    i = 0
    while i < n:
        j = i
        while j + 1 < n and sorted_abs[j + 1] == sorted_abs[i]:
            j += 1
        ranks[order[i : j + 1]] = 0.5 * (i + j) + 1.0
        i = j + 1
    w_obs = ranks[d > 0].sum()
    values = []
    for signs in itertools.product([0, 1], repeat=n):
        values.append(sum(r for r, s in zip(ranks, signs) if s))
    values = np.asarray(values)
    # exact integer comparisons via doubled ranks
    p_le = int(np.sum(np.round(2 * values) <= round(2 * w_obs))) / 2**n
    p_ge = int(np.sum(np.round(2 * values) >= round(2 * w_obs))) / 2**n
    return w_obs, min(1.0, 2.0 * min(p_le, p_ge))


class TestWilcoxon:
    def test_antisymmetric_pairs_give_p_one(self):
        deltas = np.array([1.0, -1.0, 2.0, -2.0, 3.0, -3.0])
        stat, p = wilcoxon_signed_rank(deltas)
        assert p == 1.0

    def test_matches_enumeration_oracle_exactly(self):
        for seed in range(5):
            g = Rng(seed, 50).generator()
            deltas = np.round(g.normal(0.2, 1.0, 10), 3)
            deltas[deltas == 0.0] = 0.123
            stat, p = wilcoxon_signed_rank(deltas)
            stat_o, p_o = _wilcoxon_oracle(deltas)
            assert stat == stat_o
            assert p == p_o

    def test_hundred_negatives_extreme_p(self):
        deltas = -np.abs(Rng(8).generator().normal(1.0, 0.2, 100))
        stat, p = wilcoxon_signed_rank(deltas)
        assert stat == 0.0
        assert p < 1e-10

    def test_all_zeros_rejected(self):
        with pytest.raises(DegenerateInputError):
            wilcoxon_signed_rank(np.zeros(10))

    def test_too_short_rejected(self):
        with pytest.raises(ConfigError):
            wilcoxon_signed_rank(np.array([1.0, -2.0]))

    def test_normal_approx_monotone_in_statistic(self):
        # push the statistic further from its null center; p must shrink
        base = Rng(9).generator().normal(0.0, 1.0, 30)
        p_values = []
        for shift in [0.0, 0.5, 1.0, 2.0]:
            _, p = wilcoxon_signed_rank(base + shift)
            p_values.append(p)
        assert all(a >= b for a, b in zip(p_values, p_values[1:]))

    def test_p_in_unit_interval(self):
        for seed in range(10):
            deltas = Rng(seed, 60).generator().normal(0, 1, 25)
            _, p = wilcoxon_signed_rank(deltas)
            assert 0.0 < p <= 1.0


def _quantile_oracle(column, q):
    # linear interpolation between order statistics
    s = np.sort(column)
    pos = q * (s.size - 1)
    lo = int(np.floor(pos))
    hi = int(np.ceil(pos))
    return s[lo] + (pos - lo) * (s[hi] - s[lo])


class TestQuantileBand:
    def test_single_row(self):
        row = np.array([[1.0, 5.0, -2.0]])
        median, q25, q75 = quantile_band(row)
        assert np.array_equal(median, row[0])
        assert np.array_equal(q25, row[0])
        assert np.array_equal(q75, row[0])

    def test_standard_definition(self):
        col = np.array([[1.0], [2.0], [3.0], [4.0], [5.0]])
        median, q25, q75 = quantile_band(col)
        assert (median[0], q25[0], q75[0]) == (3.0, 2.0, 4.0)

    def test_matches_sort_based_oracle(self):
        arr = Rng(10).generator().normal(0, 1, (17, 4))
        median, q25, q75 = quantile_band(arr)
        for j in range(4):
            assert median[j] == pytest.approx(_quantile_oracle(arr[:, j], 0.5), abs=1e-12)
            assert q25[j] == pytest.approx(_quantile_oracle(arr[:, j], 0.25), abs=1e-12)
            assert q75[j] == pytest.approx(_quantile_oracle(arr[:, j], 0.75), abs=1e-12)


class TestPairedComparison:
    def test_fraction_negative(self):
        pc = PairedComparison((0, 1, 2, 3), np.array([-1.0, -0.5, 0.2, 0.3]), "d_skl")
        assert pc.fraction_negative == 0.5

    def test_alignment_validated(self):
        with pytest.raises(ConfigError):
            PairedComparison((0, 1), np.array([1.0]), "x")
