import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lfire.errors import ConfigError, DegenerateInputError
from lfire.rng import Rng
from lfire.summaries import (
    SummaryMapSpec,
    SummaryVector,
    arch_summaries,
    autocorrelation,
    cell_square_expand,
    expand_pairwise,
    lorenz_hakkarainen_summaries,
    make_summary_map,
    polynomial_summaries,
    ricker_wood_summaries,
    summaries_from_csv,
    summaries_to_csv,
)


class TestAutocorrelation:
    def test_lag_zero_is_one(self):
        assert autocorrelation(np.arange(10.0), 0) == 1.0

    def test_perfect_alternation(self):
        series = np.tile([1.0, -1.0], 50)
        assert autocorrelation(series, 1) == pytest.approx(-0.99)

    def test_white_noise_small(self):
        # Monte Carlo oracle: |rho_1| < 3/sqrt(n) for most seeds
        n, hits = 10**4, 0
        trials = 200
        for seed in range(trials):
            x = Rng(seed, 77).generator().standard_normal(n)
            if abs(autocorrelation(x, 1)) < 3 / np.sqrt(n):
                hits += 1
        assert hits >= 0.99 * trials

    def test_degenerate_series(self):
        with pytest.raises(DegenerateInputError):
            autocorrelation(np.ones(50), 1)

    def test_lag_too_large(self):
        with pytest.raises(ConfigError):
            autocorrelation(np.ones(5), 5)


class TestArchSummaries:
    def test_dimensions(self):
        # counting oracle: 5 + 5*6/2 + 3 = 23, plus 15 noise -> 38
        series = Rng(1).generator().standard_normal(100)
        assert len(arch_summaries(series)) == 23
        spec = SummaryMapSpec("arch", noise_dims=15)
        sv = arch_summaries(series, spec, Rng(2))
        assert len(sv) == 38

    def test_constant_entry(self):
        series = Rng(3).generator().standard_normal(50)
        sv = arch_summaries(series)
        assert sv.values[list(sv.names).index("const")] == 1.0

    def test_moment_entries_on_white_noise(self):
        series = Rng(4).generator().standard_normal(10**5)
        sv = arch_summaries(series)
        names = list(sv.names)
        assert abs(sv.values[names.index("mean")]) < 3 / np.sqrt(10**5)
        assert abs(sv.values[names.index("var")] - 1.0) < 0.02

    def test_products_cover_acorr_block_only(self):
        series = Rng(5).generator().standard_normal(200)
        sv = arch_summaries(series)
        names = list(sv.names)
        ac = {f"ac{k}": sv.values[names.index(f"ac{k}")] for k in range(1, 6)}
        assert sv.values[names.index("ac3*ac2")] == ac["ac3"] * ac["ac2"]
        assert sv.values[names.index("ac1*ac1")] == ac["ac1"] ** 2
        assert "mean*ac1" not in names

    def test_noise_columns_reproducible(self):
        series = Rng(6).generator().standard_normal(100)
        spec = SummaryMapSpec("arch", noise_dims=15)
        a = arch_summaries(series, spec, Rng(9, 5)).values[23:]
        b = arch_summaries(series, spec, Rng(9, 5)).values[23:]
        assert np.array_equal(a, b)
        c = arch_summaries(series, spec, Rng(9, 6)).values[23:]
        assert not np.array_equal(a, c)


def _autocov_oracle(y, lag):
    # brute-force double loop, divide by the series length
    y = np.asarray(y, dtype=float)
    n = y.shape[0]
    m = y.mean()
    total = 0.0
    for t in range(n - lag):
        total += (y[t] - m) * (y[t + lag] - m)
    return total / n


class TestRickerWood:
    def test_all_zero_series(self):
        observed = Rng(10).generator().poisson(5.0, 50)
        sv = ricker_wood_summaries(np.zeros(50, dtype=int), observed)
        names = list(sv.names)
        assert sv.values[names.index("n_zero")] == 50
        assert sv.values[names.index("mean")] == 0.0
        assert len(sv) == 13

    def test_dimension(self):
        observed = Rng(11).generator().poisson(5.0, 50)
        assert len(ricker_wood_summaries(observed, observed)) == 13

    def test_autocovariances_match_bruteforce(self):
        g = Rng(12).generator()
        observed = g.poisson(7.0, 50)
        series = g.poisson(7.0, 50)
        sv = ricker_wood_summaries(series, observed)
        names = list(sv.names)
        for lag in range(1, 6):
            expected = _autocov_oracle(series, lag)
            assert sv.values[names.index(f"acov{lag}")] == pytest.approx(expected, abs=1e-12)

    def test_cubic_block_matches_lstsq_oracle(self):
        g = Rng(13).generator()
        observed = g.poisson(7.0, 50)
        series = g.poisson(7.0, 50)
        sv = ricker_wood_summaries(series, observed)
        s = np.sort(np.diff(observed.astype(float)))
        r = np.sort(np.diff(series.astype(float)))
        design = np.column_stack([np.ones_like(s), s, s**2, s**3])
        coef, *_ = np.linalg.lstsq(design, r, rcond=None)
        names = list(sv.names)
        got = [sv.values[names.index(f"cub{k}")] for k in range(4)]
        assert np.allclose(got, coef, atol=1e-8)

    def test_power_block_matches_lstsq_oracle(self):
        g = Rng(14).generator()
        observed = g.poisson(7.0, 50)
        series = g.poisson(7.0, 50)
        sv = ricker_wood_summaries(series, observed)
        u = series[:-1].astype(float)
        design = np.column_stack([u**0.3, u**0.6])
        resp = series[1:].astype(float) ** 0.3
        coef, *_ = np.linalg.lstsq(design, resp, rcond=None)
        names = list(sv.names)
        got = [sv.values[names.index("pw1")], sv.values[names.index("pw2")]]
        assert np.allclose(got, coef, atol=1e-8)

    def test_singular_observed_raises_with_block_name(self):
        with pytest.raises(DegenerateInputError, match="cubic"):
            ricker_wood_summaries(np.zeros(50, dtype=int), np.full(50, 3))

    def test_constant_nonzero_series_power_block_raises(self):
        observed = Rng(15).generator().poisson(7.0, 50)
        with pytest.raises(DegenerateInputError, match="power"):
            ricker_wood_summaries(np.full(50, 3), observed)

    def test_unequal_lengths_rejected(self):
        with pytest.raises(ConfigError):
            ricker_wood_summaries(np.ones(40, dtype=int), np.ones(50, dtype=int))


def _hakkarainen_oracle(traj):
    # brute-force double loop over (k, t), cyclic site indexing,
    # divide by the number of time samples
    K, n_t = traj.shape
    means = traj.mean(axis=1)
    out = np.zeros(6)
    for k in range(K):
        up, down = (k + 1) % K, (k - 1) % K
        out[0] += means[k]
        for t in range(n_t):
            out[1] += (traj[k, t] - means[k]) ** 2 / n_t
            out[3] += (traj[k, t] - means[k]) * (traj[up, t] - means[up]) / n_t
        for t in range(n_t - 1):
            out[2] += (traj[k, t] - means[k]) * (traj[k, t + 1] - means[k]) / n_t
            out[4] += (traj[k, t] - means[k]) * (traj[down, t + 1] - means[down]) / n_t
            out[5] += (traj[k, t] - means[k]) * (traj[up, t + 1] - means[up]) / n_t
    return out / K


class TestLorenzHakkarainen:
    def test_constant_field(self):
        sv = lorenz_hakkarainen_summaries(np.full((8, 30), 2.5))
        assert sv.values[0] == 2.5
        assert np.allclose(sv.values[1:], 0.0)

    def test_dimension(self):
        traj = Rng(16).generator().standard_normal((8, 30))
        assert len(lorenz_hakkarainen_summaries(traj)) == 6

    def test_matches_bruteforce_oracle(self):
        traj = Rng(17).generator().standard_normal((6, 25))
        sv = lorenz_hakkarainen_summaries(traj)
        assert np.allclose(sv.values, _hakkarainen_oracle(traj), atol=1e-10)

    def test_nonfinite_trajectory_propagates(self):
        traj = np.ones((6, 25))
        traj[2, 10] = np.nan
        from lfire.errors import SimulationDivergedError

        with pytest.raises(SimulationDivergedError):
            lorenz_hakkarainen_summaries(traj)


class TestExpansions:
    def test_pairwise_two_dims(self):
        sv = expand_pairwise(SummaryVector(np.array([2.0, 3.0]), ("a", "b")))
        assert np.array_equal(sv.values, [2.0, 3.0, 4.0, 6.0, 9.0, 1.0])
        assert sv.names == ("a", "b", "a*a", "b*a", "b*b", "const")

    def test_pairwise_thirteen_dims(self):
        # counting oracle: 13 + 13*14/2 + 1 = 105
        phi = SummaryVector(np.arange(13.0), tuple(f"s{i}" for i in range(13)))
        assert len(expand_pairwise(phi)) == 105

    def test_pairwise_empty(self):
        sv = expand_pairwise(SummaryVector(np.zeros(0), ()))
        assert np.array_equal(sv.values, [1.0])

    @given(st.lists(st.floats(-50, 50), min_size=1, max_size=8), st.randoms())
    @settings(max_examples=50, deadline=None)
    def test_pairwise_permutation_property(self, values, random):
        values = np.asarray(values)
        d = values.shape[0]
        perm = list(range(d))
        random.shuffle(perm)
        base = expand_pairwise(SummaryVector(values, tuple(f"v{i}" for i in range(d))))
        permuted = expand_pairwise(
            SummaryVector(values[perm], tuple(f"v{i}" for i in perm))
        )
        # products commute, so the expansions agree as multisets and the
        # linear block is exactly the permutation
        assert np.array_equal(permuted.values[:d], values[perm])
        assert np.array_equal(np.sort(base.values), np.sort(permuted.values))

    def test_polynomial(self):
        assert len(polynomial_summaries(1.3, 9)) == 10
        assert np.array_equal(polynomial_summaries(0.0, 4).values, [1, 0, 0, 0, 0])
        assert np.array_equal(polynomial_summaries(2.0, 3).values, [1, 2, 4, 8])

    def test_cell_square(self):
        sv = cell_square_expand(SummaryVector(np.array([2.0, -3.0]), ("u", "v")))
        assert np.array_equal(sv.values, [2.0, -3.0, 4.0, 9.0, 1.0])
        phi = SummaryVector(np.ones(145), tuple(f"s{i}" for i in range(145)))
        assert len(cell_square_expand(phi)) == 291
        assert np.array_equal(cell_square_expand(SummaryVector(np.zeros(0), ())).values, [1.0])


class TestSummaryMap:
    def test_dimension_stability_and_names(self):
        smap = make_summary_map(SummaryMapSpec("arch", noise_dims=15))
        rng = Rng(18)
        batch = rng.generator().standard_normal((7, 60))
        out = smap.apply_batch(batch, rng.substream("noise"))
        assert out.shape == (7, 38)
        assert len(smap.names) == 38
        assert len(set(smap.names)) == 38

    def test_wood_map_needs_observed(self):
        with pytest.raises(ConfigError):
            make_summary_map(SummaryMapSpec("ricker-wood"))

    def test_wood_map_pairwise_dimension(self):
        observed = Rng(19).generator().poisson(7.0, 50)
        smap = make_summary_map(SummaryMapSpec("ricker-wood", pairwise=True), observed=observed)
        assert smap.dim == 105

    def test_hakkarainen_pairwise_dimension(self):
        smap = make_summary_map(SummaryMapSpec("lorenz-hakkarainen", pairwise=True))
        assert smap.dim == 28

    def test_external_matrix_square_expansion(self, tmp_path):
        g = Rng(20).generator()
        matrix = g.standard_normal((10, 145))
        path = tmp_path / "summaries.csv"
        summaries_to_csv(matrix, [f"s{i + 1}" for i in range(145)], path)
        back, names = summaries_from_csv(path)
        assert np.array_equal(back, matrix)
        smap = make_summary_map(SummaryMapSpec("external-matrix", square=True, external_dim=145))
        out = smap.apply_batch(back)
        assert out.shape == (10, 291)
        assert np.array_equal(out[:, :145], matrix)
        assert np.array_equal(out[:, 145:290], matrix**2)
        assert np.all(out[:, 290] == 1.0)

    def test_noise_requires_rng(self):
        smap = make_summary_map(SummaryMapSpec("arch", noise_dims=3))
        with pytest.raises(ConfigError):
            smap.apply_batch(Rng(1).generator().standard_normal((2, 30)))

    def test_spec_validation(self):
        with pytest.raises(ConfigError):
            SummaryMapSpec("unknown-base")
        with pytest.raises(ConfigError):
            SummaryMapSpec("arch", noise_dims=-1)
        with pytest.raises(ConfigError):
            SummaryMapSpec("ricker-wood", pairwise=True, square=True)
        with pytest.raises(ConfigError):
            SummaryMapSpec("lorenz-hakkarainen", pairwise=True, constant=True)
        with pytest.raises(ConfigError):
            SummaryMapSpec("external-matrix")

    def test_raw_arch_bases(self):
        series = Rng(21).generator().standard_normal((3, 80))
        acorr = make_summary_map(SummaryMapSpec("arch-acorr"))
        raw = make_summary_map(SummaryMapSpec("arch-raw"))
        assert acorr.apply_batch(series).shape == (3, 5)
        out = raw.apply_batch(series)
        assert out.shape == (3, 7)
        assert np.allclose(out[:, 5], series.mean(axis=1))

    def test_gaussian_maps(self):
        poly = make_summary_map(SummaryMapSpec("gaussian-poly", poly_degree=9))
        assert poly.apply(1.5).shape == (10,)
        ident = make_summary_map(SummaryMapSpec("gaussian-identity"))
        assert np.array_equal(ident.apply(1.5), [1.5])
