import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from surropt import AnalysisOptions, DegenerateSampleError, LandmarkWorkspace, SimSetting, ValidationError
from surropt.smoothing import (
    GridFunction,
    KernelSpec,
    bandwidth,
    kernel_column_sums,
    kernel_matrix,
    weighted_quantile,
)


class TestWeightedQuantile:
    @settings(max_examples=80, deadline=None)
    @given(
        st.lists(st.floats(-1e6, 1e6, allow_nan=False), min_size=2, max_size=60),
        st.floats(0.0, 1.0),
    )
    def test_equal_weights_match_numpy(self, values, q):
        v = np.array(values)
        got = weighted_quantile(v, np.ones_like(v), q)
        np.testing.assert_allclose(got, np.quantile(v, q), rtol=1e-9, atol=1e-6)

    def test_zero_weight_values_ignored(self):
        v = np.array([0.0, 1.0, 2.0, 1000.0])
        w = np.array([1.0, 1.0, 1.0, 0.0])
        assert weighted_quantile(v, w, 1.0) == 2.0

    def test_degenerate_weights_rejected(self):
        with pytest.raises(ValidationError):
            weighted_quantile(np.array([1.0, 2.0]), np.array([0.0, 0.0]), 0.5)
        with pytest.raises(ValidationError):
            weighted_quantile(np.array([1.0]), np.array([-1.0]), 0.5)


class TestBandwidth:
    def test_unit_scale_arithmetic(self):
        # 100 points with unit weighted sd and wide IQR: the rule reduces
        # to 1.06 * m**(-0.2) * m**(-0.06)
        raw = np.arange(100, dtype=float)
        x = raw / np.sqrt(np.mean((raw - raw.mean()) ** 2))
        h = bandwidth(x)
        expected = 1.06 * 100 ** (-0.26)
        assert h == pytest.approx(expected, abs=1e-12)
        assert expected == pytest.approx(0.3201145, abs=5e-7)

    def test_iqr_branch_when_tails_are_heavy(self):
        # one huge outlier inflates the sd; the IQR side must win
        x = np.concatenate([np.linspace(0, 1, 99), [1000.0]])
        q25, q75 = np.quantile(x, [0.25, 0.75])
        assert bandwidth(x) == pytest.approx(1.06 * (q75 - q25) / 1.34 * 100 ** (-0.26))

    @settings(max_examples=40, deadline=None)
    @given(st.floats(0.1, 10.0, allow_nan=False))
    def test_scale_equivariance(self, c):
        rng = np.random.default_rng(3)
        x = rng.normal(size=200)
        w = rng.uniform(0.5, 2.0, size=200)
        np.testing.assert_allclose(bandwidth(c * x, w), c * bandwidth(x, w), rtol=1e-12)

    def test_zero_weight_values_do_not_count(self):
        x = np.concatenate([np.linspace(0, 1, 50), [500.0, 600.0]])
        w = np.concatenate([np.ones(50), [0.0, 0.0]])
        assert bandwidth(x, w) == pytest.approx(bandwidth(x[:50]))

    def test_all_tied_values_rejected(self):
        with pytest.raises(DegenerateSampleError):
            bandwidth(np.full(20, 3.0))

    def test_heavy_ties_fall_back_to_sd(self):
        # IQR is 0 here, sd is not; the rule must still produce a width
        x = np.concatenate([np.full(90, 1.0), np.full(10, 2.0)])
        assert bandwidth(x) > 0


class TestKernels:
    def test_matrix_values_are_gaussian(self):
        pts = np.array([0.0, 1.0])
        grid = np.array([0.0, 0.5])
        h = 0.25
        k = kernel_matrix(pts, grid, h)
        z = (pts[:, None] - grid[None, :]) / h
        expected = np.exp(-0.5 * z**2) / (np.sqrt(2 * np.pi) * h)
        np.testing.assert_allclose(k, expected)

    def test_column_sums_match_direct_product_across_chunks(self):
        rng = np.random.default_rng(8)
        pts = rng.uniform(0, 2, 501)
        w = rng.uniform(0, 1, 501)
        grid = np.linspace(0, 2, 37)
        direct = w @ kernel_matrix(pts, grid, 0.1)
        chunked = kernel_column_sums(pts, grid, 0.1, row_weights=w, chunk=64)
        np.testing.assert_allclose(chunked, direct, rtol=1e-12)

    def test_spec_requires_positive_bandwidth(self):
        with pytest.raises(ValidationError):
            KernelSpec(bandwidth=0.0)
        with pytest.raises(ValidationError):
            KernelSpec(bandwidth=0.1, family="triangular")

    def test_subdensity_matches_closed_form(self, bench):
        # Setting-1 treated arm with negligible censoring: the surrogate is
        # exponential with mean 6 and the primary is exponential with rate
        # 1/(5s) given the surrogate, so the event-free subdensity at the
        # unit landmark is exp(-1/(5s)) * exp(-s/6) / 6.
        _, data = bench(SimSetting(setting=1, cens_rate=1e-9), 400_000, 21)
        ws = LandmarkWorkspace(data, 1.0, AnalysisOptions())
        ws._prepare_kernels()
        f_hat = ws._subdensity(1, 1.0, ws.weights_at(1.0))
        truth = np.exp(-1.0 / (5.0 * ws.grid)) * np.exp(-ws.grid / 6.0) / 6.0
        inner = (ws.grid > 0.15) & (ws.grid < 0.95)
        assert np.max(np.abs(f_hat - truth)[inner]) < 0.012

    def test_subdensity_mass_matches_weighted_fraction(self, bench):
        _, data = bench(1, 20_000, 13)
        ws = LandmarkWorkspace(data, 2.0, AnalysisOptions())
        ws._prepare_kernels()
        w = ws.weights_at(2.0)
        f_hat = ws._subdensity(1, 2.0, w)
        mass = float(np.trapezoid(f_hat, ws.grid))
        pos = ws.pos[1]
        member = (data.x[pos] > 2.0) & (data.s[pos] <= 2.0)
        frac = float(np.sum(w[pos][member]) / np.sum(w[pos]))
        assert mass == pytest.approx(frac, abs=0.02)


class TestGridFunction:
    def test_interpolates_and_clamps(self):
        g = GridFunction(np.array([0.0, 1.0, 2.0]), np.array([0.0, 2.0, 0.0]))
        np.testing.assert_allclose(g(np.array([0.5, 1.5])), [1.0, 1.0])
        np.testing.assert_allclose(g(np.array([-5.0, 7.0])), [0.0, 0.0])
        assert g(np.array([1.0]))[0] == 2.0

    def test_rejects_mismatched_lengths(self):
        with pytest.raises(ValidationError):
            GridFunction(np.array([0.0, 1.0]), np.array([1.0]))
