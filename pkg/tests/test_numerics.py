import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from probitfuse import (
    CorrelationMatrix,
    DomainError,
    FactorizationError,
    OrthantSpec,
    bvn_cdf,
    cholesky_lower,
    mvn_orthant_prob,
    nearest_correlation,
    std_normal_cdf,
    std_normal_quantile,
)

# frozen from a 40-digit erfc evaluation of the Gaussian integral
PHI_1_959964 = 0.9750000009035576
Z_975 = 1.959963984540054


def closed_form_quadrant(rho):
    # P(Z1<=0, Z2<=0) for correlated standard normals
    return 0.25 + math.asin(rho) / (2 * math.pi)


def closed_form_trivariate(rho):
    # P(all three > 0), equicorrelated, zero thresholds
    return 0.125 + 3 * math.asin(rho) / (4 * math.pi)


class TestStdNormalCdf:
    def test_median(self):
        assert std_normal_cdf(0.0) == 0.5

    def test_derived_value(self):
        assert std_normal_cdf(1.959964) == pytest.approx(PHI_1_959964, abs=1e-10)
        assert std_normal_cdf(1.959964) == pytest.approx(0.975, abs=1e-6)

    @given(st.floats(-8, 8))
    def test_symmetry(self, x):
        assert std_normal_cdf(x) + std_normal_cdf(-x) == pytest.approx(1.0, abs=1e-12)

    def test_strictly_increasing(self):
        xs = np.linspace(-6, 6, 201)
        values = [std_normal_cdf(x) for x in xs]
        assert all(b > a for a, b in zip(values, values[1:]))


class TestStdNormalQuantile:
    def test_median(self):
        assert std_normal_quantile(0.5) == 0.0

    def test_derived_value(self):
        assert std_normal_quantile(0.975) == pytest.approx(Z_975, abs=1e-9)
        assert std_normal_quantile(0.975) == pytest.approx(1.959964, abs=1e-6)

    def test_roundtrip_x(self):
        for x in np.linspace(-5, 5, 41):
            assert std_normal_quantile(std_normal_cdf(x)) == pytest.approx(x, abs=1e-9)

    @given(st.floats(1e-12, 1 - 1e-12))
    def test_roundtrip_p(self, p):
        assert std_normal_cdf(std_normal_quantile(p)) == pytest.approx(p, abs=1e-9)

    @pytest.mark.parametrize("p", [0.0, 1.0, -0.1, 1.1])
    def test_domain(self, p):
        with pytest.raises(DomainError):
            std_normal_quantile(p)


class TestBvnCdf:
    def test_independence(self):
        for h, k in [(0.3, -1.2), (2.0, 2.0), (-0.5, 0.1)]:
            assert bvn_cdf(h, k, 0.0) == pytest.approx(
                std_normal_cdf(h) * std_normal_cdf(k), abs=1e-14)

    def test_comonotone(self):
        assert bvn_cdf(0.4, -0.8, 1.0) == pytest.approx(std_normal_cdf(-0.8), abs=1e-14)

    def test_antimonotone(self):
        expected = max(0.0, std_normal_cdf(0.4) + std_normal_cdf(-0.8) - 1.0)
        assert bvn_cdf(0.4, -0.8, -1.0) == pytest.approx(expected, abs=1e-14)

    def test_quadrant_identity_at_half(self):
        assert bvn_cdf(0.0, 0.0, 0.5) == pytest.approx(1 / 3, abs=1e-7)

    @pytest.mark.parametrize("rho", [-0.95, -0.6, -0.2, 0.0, 0.3, 0.7, 0.93, 0.99])
    def test_quadrant_identity(self, rho):
        assert bvn_cdf(0.0, 0.0, rho) == pytest.approx(closed_form_quadrant(rho), abs=1e-10)

    @pytest.mark.parametrize("h,k,rho", [
        (0.5, -0.3, 0.4),
        (1.2, -0.4, 0.99),
        (-1.5, 2.0, -0.7),
        (0.3, 0.3, 0.93),
    ])
    def test_quadrature_oracle(self, h, k, rho):
        from scipy import integrate

        det = 1 - rho**2
        norm = 1 / (2 * math.pi * math.sqrt(det))

        def density(y, x):
            return norm * math.exp(-(x * x - 2 * rho * x * y + y * y) / (2 * det))

        oracle, err = integrate.dblquad(density, -9, h, -9, k, epsabs=1e-12)
        assert err < 1e-8
        assert bvn_cdf(h, k, rho) == pytest.approx(oracle, abs=1e-7)

    def test_rejects_bad_rho(self):
        with pytest.raises(DomainError):
            bvn_cdf(0.0, 0.0, 1.5)


# a fixed indefinite-free 5x5 correlation used across orthant tests
CORR5 = np.array([
    [1.0, 0.3, 0.2, 0.1, 0.25],
    [0.3, 1.0, 0.35, 0.15, 0.2],
    [0.2, 0.35, 1.0, 0.3, 0.1],
    [0.1, 0.15, 0.3, 1.0, 0.4],
    [0.25, 0.2, 0.1, 0.4, 1.0],
])


class TestOrthantProb:
    def test_univariate_reduction(self):
        spec = OrthantSpec([0.7], ("above",))
        p = mvn_orthant_prob(spec, CorrelationMatrix.identity(1), seed=1)
        assert p == pytest.approx(1 - std_normal_cdf(0.7), abs=1e-14)

    def test_identity_factorizes(self):
        rng = np.random.default_rng(5)
        for dim in (3, 4, 6):
            tau = rng.normal(size=dim)
            signs = tuple(rng.choice(["above", "below"], size=dim))
            spec = OrthantSpec(tau, signs)
            p = mvn_orthant_prob(spec, CorrelationMatrix.identity(dim), seed=2)
            marginals = [
                1 - std_normal_cdf(t) if s == "above" else std_normal_cdf(t)
                for t, s in zip(tau, signs)
            ]
            assert p == pytest.approx(math.prod(marginals), abs=1e-12)

    @pytest.mark.parametrize("rho", [-0.3, 0.0, 0.3, 0.5, 0.9])
    def test_trivariate_closed_form(self, rho):
        m = np.full((3, 3), rho)
        np.fill_diagonal(m, 1.0)
        spec = OrthantSpec([0.0, 0.0, 0.0], ("above",) * 3, 1e-3)
        p = mvn_orthant_prob(spec, CorrelationMatrix(m), seed=42)
        assert p == pytest.approx(closed_form_trivariate(rho), abs=1e-3)

    def test_against_plain_monte_carlo(self):
        # independent oracle: raw latent sampling, no QMC machinery shared
        rng = np.random.default_rng(2024)
        chol = np.linalg.cholesky(CORR5)
        tau = np.array([0.5, -0.3, 0.0, 0.8, -1.0])
        signs = ("above", "below", "above", "above", "below")
        n = 1_000_000
        z = rng.standard_normal((n, 5)) @ chol.T
        keep = np.ones(n, bool)
        for j, (s, t) in enumerate(zip(signs, tau)):
            keep &= (z[:, j] > t) if s == "above" else (z[:, j] <= t)
        mc = keep.mean()
        se = math.sqrt(mc * (1 - mc) / n)
        p = mvn_orthant_prob(OrthantSpec(tau, signs, 1e-4), CorrelationMatrix(CORR5), seed=7)
        assert abs(p - mc) < 4 * se + 1e-4

    def test_frozen_high_precision_value(self):
        # 0.08813421 frozen from an independent high-accuracy integration
        spec = OrthantSpec(np.zeros(5), ("above",) * 5, 1e-4)
        p = mvn_orthant_prob(spec, CorrelationMatrix(CORR5), seed=11)
        assert p == pytest.approx(0.08813421, abs=3e-4)

    def test_sign_patterns_sum_to_one(self):
        tau = np.array([0.5, -0.3, 0.0])
        corr = CorrelationMatrix(CORR5[:3, :3])
        total = sum(
            mvn_orthant_prob(OrthantSpec(tau, pattern, 1e-3), corr, seed=3)
            for pattern in itertools.product(("above", "below"), repeat=3)
        )
        assert total == pytest.approx(1.0, abs=8 * 1e-3)

    def test_deterministic_for_seed(self):
        spec = OrthantSpec([0.2, -0.1, 0.4, 0.0], ("above", "below", "above", "below"))
        corr = CorrelationMatrix(CORR5[:4, :4])
        assert mvn_orthant_prob(spec, corr, seed=99) == mvn_orthant_prob(spec, corr, seed=99)

    def test_non_psd_raises(self):
        m = np.full((3, 3), -0.9)
        np.fill_diagonal(m, 1.0)
        spec = OrthantSpec([0.0, 0.0, 0.0], ("above",) * 3)
        with pytest.raises(FactorizationError, match="nearest_correlation"):
            mvn_orthant_prob(spec, CorrelationMatrix(m), seed=1)

    def test_dim_mismatch(self):
        spec = OrthantSpec([0.0, 0.0], ("above", "below"))
        with pytest.raises(DomainError):
            mvn_orthant_prob(spec, CorrelationMatrix.identity(3), seed=1)

    def test_rejects_nonfinite_threshold(self):
        with pytest.raises(DomainError):
            OrthantSpec([np.inf], ("above",))


class TestCholesky:
    def test_identity(self):
        np.testing.assert_allclose(cholesky_lower(CorrelationMatrix.identity(4)), np.eye(4))

    def test_forced_2x2(self):
        m = CorrelationMatrix(np.array([[1.0, 0.6], [0.6, 1.0]]))
        np.testing.assert_allclose(cholesky_lower(m), [[1.0, 0.0], [0.6, 0.8]], atol=1e-15)

    def test_multiply_back(self):
        rng = np.random.default_rng(3)
        a = rng.normal(size=(5, 8))
        cov = a @ a.T
        d = np.sqrt(np.diag(cov))
        corr = cov / np.outer(d, d)
        np.fill_diagonal(corr, 1.0)
        lower = cholesky_lower(CorrelationMatrix(corr))
        np.testing.assert_allclose(lower @ lower.T, corr, atol=1e-10)

    def test_non_pd_raises(self):
        m = np.full((3, 3), -0.9)
        np.fill_diagonal(m, 1.0)
        with pytest.raises(FactorizationError):
            cholesky_lower(m)


class TestNearestCorrelation:
    def test_psd_unchanged(self):
        repaired = nearest_correlation(CORR5)
        np.testing.assert_allclose(repaired.entries, CORR5, atol=1e-12)

    def test_identity_unchanged(self):
        repaired = nearest_correlation(np.eye(4))
        np.testing.assert_allclose(repaired.entries, np.eye(4))

    def test_repairs_indefinite(self):
        m = np.full((3, 3), -0.9)
        np.fill_diagonal(m, 1.0)
        repaired = nearest_correlation(m)
        eigenvalues = np.linalg.eigvalsh(repaired.entries)
        assert eigenvalues.min() >= -1e-10
        np.testing.assert_allclose(np.diag(repaired.entries), 1.0)

    def test_idempotent(self):
        m = np.full((4, 4), -0.5)
        np.fill_diagonal(m, 1.0)
        once = nearest_correlation(m)
        twice = nearest_correlation(once)
        np.testing.assert_allclose(twice.entries, once.entries, atol=1e-12)

    def test_rejects_non_unit_diagonal(self):
        with pytest.raises(DomainError):
            nearest_correlation(np.diag([2.0, 1.0]))


class TestCorrelationMatrix:
    def test_rejects_asymmetric(self):
        m = np.eye(3)
        m[0, 1] = 0.5
        with pytest.raises(DomainError):
            CorrelationMatrix(m)

    def test_rejects_out_of_range(self):
        m = np.array([[1.0, 1.2], [1.2, 1.0]])
        with pytest.raises(DomainError):
            CorrelationMatrix(m)

    def test_restrict(self):
        sub = CorrelationMatrix(CORR5).restrict([0, 2, 4])
        np.testing.assert_allclose(sub.entries, CORR5[np.ix_([0, 2, 4], [0, 2, 4])])

    @given(st.integers(1, 6))
    @settings(max_examples=20)
    def test_identity_any_dim(self, dim):
        assert CorrelationMatrix.identity(dim).dim == dim
