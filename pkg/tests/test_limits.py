import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import integrate

import oracles
from prefkout.exact import negbin_moment_Z
from prefkout.limits import (
    LimitLawParams,
    eta_density,
    f_A_value,
    f_value,
    limit_tv,
    limit_tv_closed_form,
    limit_tv_quadrature,
    lognormal_mean_check,
    psi_density,
    sigma_matrix,
)
from prefkout.model import INFINITY, DomainError


class TestSigma:
    def test_examples(self):
        s1 = sigma_matrix(1)
        assert s1.matrix.tolist() == [[1, 3], [3, 11]] and s1.det == 2
        s2 = sigma_matrix(2)
        assert s2.matrix.tolist() == [[2, 10], [10, 58]] and s2.det == 16
        assert s2.det == pytest.approx(np.linalg.det(s2.matrix))

    @pytest.mark.parametrize("k", [1, 2, 3, 7])
    def test_inverse(self, k):
        s = sigma_matrix(k)
        assert np.allclose(s.matrix @ s.inverse, np.eye(2), atol=1e-12, rtol=0)
        assert np.all(np.linalg.eigvalsh(s.matrix) > 0)

    @pytest.mark.parametrize("k", [1, 2, 5])
    def test_is_poisson_covariance(self, k):
        m = [oracles.poisson_moment(k, s) for s in range(5)]
        var_y = m[2] - m[1] ** 2
        cov = m[3] - m[1] * m[2]
        var_y2 = m[4] - m[2] ** 2
        assert sigma_matrix(k).matrix.tolist() == [[var_y, cov], [cov, var_y2]]
        assert negbin_moment_Z(k, INFINITY, 4) == m[4]

    def test_rejects(self):
        with pytest.raises(DomainError):
            sigma_matrix(0)


class TestDensities:
    def test_eta_examples(self):
        assert eta_density(1, [0, 0]) == pytest.approx(1 / (2 * math.pi * math.sqrt(2)))
        x = np.array([[0.3, -1.2], [2.0, 5.0]])
        assert np.allclose(eta_density(1, x), eta_density(1, -x))

    def test_eta_normalised(self):
        k = 1
        s = sigma_matrix(k).matrix
        w1, w2 = 10 * math.sqrt(s[0, 0]), 10 * math.sqrt(s[1, 1])
        v, _ = integrate.dblquad(lambda y, x: eta_density(k, [x, y]), -w1, w1, -w2, w2, epsabs=1e-10)
        assert v == pytest.approx(1, abs=1e-6)

    def test_psi_examples(self):
        assert psi_density(1, 0) == pytest.approx(1 / (2 * math.sqrt(math.pi)))
        for k in (1, 3):
            mass, _ = integrate.quad(lambda x: psi_density(k, x), -np.inf, np.inf)
            var, _ = integrate.quad(lambda x: x * x * psi_density(k, x), -np.inf, np.inf)
            assert mass == pytest.approx(1, abs=1e-10)
            assert var == pytest.approx(2 * k * k, rel=1e-9)

    @pytest.mark.parametrize("k", [1, 2, 4])
    def test_psi_is_eta_slice(self, k):
        x = np.linspace(-10, 10, 41)
        pts = np.stack([np.zeros_like(x), x], axis=1)
        assert np.allclose(psi_density(k, x), math.sqrt(2 * math.pi * k) * eta_density(k, pts), rtol=1e-12)


class TestF:
    def test_examples(self):
        k, beta = 1, 1.0
        assert f_value(k, beta, -k * k / (2 * beta)) == 0
        assert f_value(k, beta, 1e4) == pytest.approx(1)
        assert f_value(1, 1, 0) == pytest.approx(1 - math.exp(-0.25))
        assert f_value(1, 1, 0) == pytest.approx(0.22120, abs=1e-5)

    def test_clamp(self):
        assert f_A_value(1, 1, 3, -10) == f_value(1, 1, -3)
        assert f_A_value(1, 1, 3, 2) == f_value(1, 1, 2)
        with pytest.raises(DomainError):
            f_A_value(1, 1, 0, 1)
        with pytest.raises(DomainError):
            f_value(1, 0, 1)

    @given(st.integers(1, 5), st.floats(0.05, 50), st.floats(-30, 30))
    def test_bounded_on_right(self, k, beta, x):
        v = f_value(k, beta, x)
        assert v >= 0
        if x >= -k * k / (2 * beta):
            assert v <= 1


class TestLimitTV:
    def test_examples(self):
        assert limit_tv(1, 1) == pytest.approx(0.27633, abs=1e-5)
        assert limit_tv(1, 0.1) == pytest.approx(0.99959, abs=1e-5)
        assert limit_tv(1, 1e4) < 1e-4

    @pytest.mark.parametrize("k,beta", [(1, 1), (1, 0.1), (2, 0.5), (3, 5.0), (1, 30.0), (4, 0.05)])
    def test_quadrature_against_mpmath_and_closed_form(self, k, beta):
        q, err = limit_tv_quadrature(k, beta)
        ref = float(oracles.limit_tv_mpmath(k, beta))
        assert abs(q - ref) < 1e-9
        assert err < 1e-8
        assert abs(limit_tv_closed_form(k, beta) - ref) < 1e-12
        assert limit_tv(k, beta, method="closed_form") == limit_tv_closed_form(k, beta)

    def test_monotone(self):
        betas = [0.1, 0.3, 1, 3, 10]
        vals = [limit_tv(1, b) for b in betas]
        assert all(a > b for a, b in zip(vals, vals[1:]))
        vals = [limit_tv(k, 1) for k in (1, 2, 3, 4)]
        assert all(a < b for a, b in zip(vals, vals[1:]))

    @pytest.mark.parametrize("k,beta", [(1, 1), (2, 0.3), (1, 4)])
    def test_lognormal_mean(self, k, beta):
        law = LimitLawParams(k, beta)
        assert law.mean == law.variance / 2
        assert lognormal_mean_check(k, beta) == pytest.approx(1, abs=1e-9)

    def test_rejects(self):
        with pytest.raises(DomainError):
            limit_tv(1, 0)
        with pytest.raises(DomainError):
            limit_tv(1, 1, method="simpson")
