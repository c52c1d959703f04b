import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from roughboot.fgn import (
    HurstIndex,
    exact_pv_moments,
    fgn_autocovariance,
    fgn_second_diff_covariance_direct,
    gaussian_abs_moment,
    lambda_asymptotic,
    pv_mean,
    rho_second_diff,
    second_diff_covariance,
    simulate_fbm,
    simulate_fgn_batch,
    tau_squared,
)
from roughboot.seeding import derive_seed

from oracles import fbm_covariance, quadratic_variation_moments, second_diff_matrix

hursts = st.floats(min_value=0.02, max_value=0.98)


class TestHurstIndex:
    @pytest.mark.parametrize("H", [0.0, 1.0, -0.1, 1.5, float("nan")])
    def test_rejects_out_of_range(self, H):
        with pytest.raises(ValueError):
            HurstIndex(H)

    def test_alpha_roundtrip(self):
        h = HurstIndex.from_alpha(-1 / 3)
        assert h.H == pytest.approx(1 / 6)
        assert h.alpha == pytest.approx(-1 / 3)

    @pytest.mark.parametrize("alpha", [-0.5, 0.5, 0.7])
    def test_from_alpha_open_interval(self, alpha):
        with pytest.raises(ValueError):
            HurstIndex.from_alpha(alpha)


class TestAutocovariance:
    @pytest.mark.parametrize(
        "H, k, expected",
        [
            (0.5, 0, 1.0),
            (0.5, 3, 0.0),
            (0.8, 1, 0.5 * (2**1.6 - 2)),
        ],
    )
    def test_examples(self, H, k, expected):
        assert fgn_autocovariance(H, 1.0, k) == pytest.approx(expected, abs=1e-14)

    def test_h08_value(self):
        assert fgn_autocovariance(0.8, 1.0, 1) == pytest.approx(0.5157, abs=5e-5)

    @given(hursts, st.floats(min_value=1e-4, max_value=10.0))
    def test_scaling_in_delta(self, H, delta):
        k = np.arange(6)
        np.testing.assert_allclose(
            fgn_autocovariance(H, delta, k), delta ** (2 * H) * fgn_autocovariance(H, 1.0, k), rtol=1e-12, atol=0
        )

    @given(hursts, st.integers(min_value=0, max_value=10**6))
    @settings(max_examples=60)
    def test_matches_definition(self, H, k):
        mpmath = pytest.importorskip("mpmath")
        mpmath.mp.dps = 60
        a = 2 * mpmath.mpf(H)
        direct = 0.5 * (abs(mpmath.mpf(k + 1)) ** a - 2 * abs(mpmath.mpf(k)) ** a + abs(mpmath.mpf(k - 1)) ** a)
        assert fgn_autocovariance(H, 1.0, k) == pytest.approx(float(direct), rel=1e-11, abs=1e-300)

    @given(hursts, st.integers(min_value=1, max_value=10**6))
    def test_even(self, H, k):
        assert fgn_autocovariance(H, 1.0, k) == fgn_autocovariance(H, 1.0, -k)


class TestSecondDifferenceCovariance:
    @pytest.mark.parametrize("H", [0.1, 0.3, 0.5, 0.7, 0.9])
    @pytest.mark.parametrize("v1, v2", [(1, 1), (2, 2), (1, 2), (2, 1)])
    def test_against_dense_fbm_covariance(self, H, v1, v2):
        n, delta = 40, 0.05
        S = fbm_covariance(H, n, delta)
        D1, D2 = second_diff_matrix(n, v1), second_diff_matrix(n, v2)
        C = D1 @ S @ D2.T  # rows: i = 2 v1 .. n, cols: j = 2 v2 .. n
        i, j = 30, 20
        got = second_diff_covariance(H, delta, v1, v2, i - j)
        assert got == pytest.approx(C[i - 2 * v1, j - 2 * v2], rel=1e-10, abs=1e-14)

    @pytest.mark.parametrize("H", [0.2, 0.5, 0.8])
    @pytest.mark.parametrize("v1, v2", [(1, 1), (2, 2), (1, 2)])
    @pytest.mark.parametrize("h", [-7, -1, 0, 1, 3, 12])
    def test_against_fgn_composition(self, H, v1, v2, h):
        a = second_diff_covariance(H, 0.3, v1, v2, h)
        b = fgn_second_diff_covariance_direct(H, 0.3, v1, v2, h)
        assert a == pytest.approx(b, rel=1e-10, abs=1e-14)

    @pytest.mark.parametrize("H", [0.1, 0.5, 0.9])
    @pytest.mark.parametrize("h", [50, 1000, 10**5])
    def test_far_lags_against_high_precision(self, H, h):
        mpmath = pytest.importorskip("mpmath")
        mpmath.mp.dps = 80
        a = 2 * mpmath.mpf(H)
        offs, wts = (-2, -1, 0, 1, 2), (1, -4, 6, -4, 1)
        ref = -0.5 * sum(w * abs(mpmath.mpf(h + o)) ** a for o, w in zip(offs, wts))
        got = second_diff_covariance(H, 1.0, 1, 1, h)
        assert got == pytest.approx(float(ref), rel=1e-9)

    def test_tau_squared_is_zero_lag_variance(self):
        for H in (0.2, 0.5, 0.8):
            for v in (1, 2):
                assert second_diff_covariance(H, 0.1, v, v, 0) == pytest.approx(tau_squared(H, 0.1, v), rel=1e-13)

    def test_rejects_bad_lag(self):
        with pytest.raises(ValueError):
            second_diff_covariance(0.5, 1.0, 3, 1, 0)


class TestRho:
    @given(hursts)
    def test_unit_at_zero(self, H):
        assert rho_second_diff(H, 1, 1, 0) == pytest.approx(1.0, abs=1e-12)
        assert rho_second_diff(H, 2, 2, 0) == pytest.approx(1.0, abs=1e-12)

    @pytest.mark.parametrize("h, expected", [(1, -0.5), (3, 0.0), (2, 0.0)])
    def test_brownian_values(self, h, expected):
        assert rho_second_diff(0.5, 1, 1, h) == pytest.approx(expected, abs=1e-14)

    @pytest.mark.parametrize("H", [0.15, 0.5, 0.85])
    @pytest.mark.parametrize("v1, v2", [(1, 1), (2, 2), (1, 2)])
    def test_is_normalized_covariance(self, H, v1, v2):
        h = np.arange(-10, 11)
        cov = second_diff_covariance(H, 1.0, v1, v2, h)
        norm = math.sqrt(tau_squared(H, 1.0, v1) * tau_squared(H, 1.0, v2))
        np.testing.assert_allclose(rho_second_diff(H, v1, v2, h), cov / norm, rtol=1e-10, atol=1e-14)

    def test_unsupported_pair(self):
        with pytest.raises(ValueError, match="unsupported"):
            rho_second_diff(0.5, 2, 1, 0)


class TestSampler:
    def test_brownian_increment_variance(self):
        n, delta = 10**4, 1e-4
        path = simulate_fbm(0.5, n, delta, seed=11)
        inc = path.increments
        # var of the sample variance of n iid N(0, Δ) is 2 Δ² / n
        se = math.sqrt(2.0 / n) * delta
        assert abs(inc.var() - delta) < 3 * se

    def test_lag_one_correlation_h02(self):
        H, n = 0.2, 64
        inc, _ = simulate_fgn_batch(H, n, 1.0, [derive_seed(5, "t", j) for j in range(4000)])
        x, y = inc[:, 10], inc[:, 11]
        r = np.corrcoef(x, y)[0, 1]
        target = (2**0.4 - 2) / 2
        se = (1 - target**2) / math.sqrt(x.size)
        assert target == pytest.approx(-0.3402, abs=1e-4)
        assert abs(r - target) < 3 * se

    @pytest.mark.parametrize("H", [0.1, 0.5, 0.9])
    def test_empirical_covariance_matrix(self, H):
        n = 8
        inc, method = simulate_fgn_batch(H, n, 1.0, [derive_seed(9, "c", j) for j in range(40000)])
        assert method == "circulant"
        emp = np.cov(inc, rowvar=False)
        k = np.abs(np.subtract.outer(np.arange(n), np.arange(n)))
        theo = fgn_autocovariance(H, 1.0, k)
        # entrywise SE of a sample covariance is at most ~ sqrt(2/N) for unit variances
        assert np.max(np.abs(emp - theo)) < 4 * math.sqrt(2 / 40000)

    def test_deterministic(self):
        a = simulate_fbm(0.3, 100, 0.01, seed=123)
        b = simulate_fbm(0.3, 100, 0.01, seed=123)
        assert np.array_equal(a.values, b.values)
        assert a.values[0] == 0.0

    def test_rows_depend_only_on_own_seed(self):
        s = [derive_seed(1, "r", j) for j in range(5)]
        full, _ = simulate_fgn_batch(0.7, 50, 0.1, s)
        single, _ = simulate_fgn_batch(0.7, 50, 0.1, [s[3]])
        assert np.array_equal(full[3], single[0])

    def test_cholesky_fallback_recorded(self, monkeypatch):
        import roughboot.fgn as fgn

        monkeypatch.setattr(fgn, "_circulant_sqrt_eigs", lambda H, n: None)
        inc, method = fgn.simulate_fgn_batch(0.4, 30, 1.0, [1, 2])
        assert method == "cholesky"
        assert inc.shape == (2, 30)
        path = fgn.simulate_fbm(0.4, 30, 1.0, 3)
        assert path.method == "cholesky"


class TestMoments:
    @pytest.mark.parametrize("p, expected", [(2, 1.0), (4, 3.0), (1, math.sqrt(2 / math.pi))])
    def test_gaussian_abs_moment(self, p, expected):
        assert gaussian_abs_moment(p) == pytest.approx(expected, rel=1e-14)

    def test_pv_mean_tiny_n(self):
        assert pv_mean(0.5, 2, 1.0, 1) == pytest.approx(2.0)

    def test_exact_moments_need_n_5(self):
        with pytest.raises(ValueError):
            exact_pv_moments(0.5, 4, 1.0)

    @pytest.mark.parametrize("H", [0.05, 0.2, 0.5, 0.8, 0.95])
    @pytest.mark.parametrize("n", [5, 6, 10, 37])
    def test_against_dense_quadratic_forms(self, H, n):
        delta = 1.0 / n
        m = exact_pv_moments(H, n, delta)
        ref = quadratic_variation_moments(H, n, delta)
        assert m.mu1 == pytest.approx(ref["mu1"], rel=1e-11)
        assert m.mu2 == pytest.approx(ref["mu2"], rel=1e-11)
        assert m.varV1 == pytest.approx(ref["var1"], rel=1e-10)
        assert m.varV2 == pytest.approx(ref["var2"], rel=1e-10)
        assert m.covV12 == pytest.approx(ref["cov12"], rel=1e-10)

    def test_mu_ratio_brownian(self):
        n = 500
        m = exact_pv_moments(0.5, n, 1.0 / n)
        assert m.mu1 / m.mu2 == pytest.approx(2 * (n - 1) / (4 * (n - 3)), rel=1e-12)

    def test_covariance_matrix_psd(self):
        m = exact_pv_moments(0.3, 50, 0.02)
        assert np.all(np.linalg.eigvalsh(m.covariance_matrix()) > 0)


class TestLambda:
    def test_brownian_entries(self):
        lam = lambda_asymptotic(0.5)
        assert lam.l11 == pytest.approx(3.0, abs=1e-12)
        # BM: lag-2 second differences are again second differences of an iid
        # sum at spacing 2, and correlate with lag-1 ones only nearby
        m = exact_pv_moments(0.5, 20000, 1 / 20000)
        assert lam.l22 == pytest.approx(m.lambda22, rel=1e-3)
        assert lam.l12 == pytest.approx(m.lambda12, rel=1e-3)

    @given(hursts)
    @settings(max_examples=25, deadline=None)
    def test_positive_semidefinite(self, H):
        lam = lambda_asymptotic(H, tol=1e-10)
        assert lam.l12**2 <= lam.l11 * lam.l22
        assert lam.quadratic_form() >= 0

    def test_h025_matches_finite_n(self):
        lam = lambda_asymptotic(0.25, tol=1e-12)
        m = exact_pv_moments(0.25, 10**5, 1e-5)
        assert m.lambda11 == pytest.approx(lam.l11, rel=1e-3)
        assert m.lambda22 == pytest.approx(lam.l22, rel=1e-3)
        assert m.lambda12 == pytest.approx(lam.l12, rel=1e-3)

    @pytest.mark.parametrize("H", [0.25, 0.5, 0.7])
    def test_finite_n_gap_shrinks(self, H):
        lam = lambda_asymptotic(H)
        gaps = []
        for n in (10**2, 10**3, 10**4, 10**5):
            m = exact_pv_moments(H, n, 1.0 / n)
            gaps.append(abs(m.lambda11 - lam.l11) + abs(m.lambda22 - lam.l22) + abs(m.lambda12 - lam.l12))
        assert all(b < a for a, b in zip(gaps, gaps[1:]))

    def test_minimum_terms(self):
        assert lambda_asymptotic(0.5).terms >= 10_000

    def test_bad_tolerance(self):
        with pytest.raises(ValueError):
            lambda_asymptotic(0.5, tol=0.0)
