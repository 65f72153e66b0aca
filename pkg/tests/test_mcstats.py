import math
from fractions import Fraction

import numpy as np
import pytest
from scipy import stats

from prefkout.exact import exact_tv_full, exact_tv_X, exact_var_power_sum, exact_X_distribution
from prefkout.limits import limit_tv
from prefkout.mcstats import (
    EstimateWithError,
    InsufficientSamples,
    LatticeHistogram,
    PoolingError,
    chi_square_gof,
    chi_square_two_sample,
    concentration_check,
    counts_of,
    distinguishing_event,
    distinguishing_event_check,
    estimate_tv_via_f,
    estimate_tv_X_plugin,
    exact_degree_moments,
    f_clamp,
    lclt_2d_check,
    lclt_scalar_check,
    lclt_scalar_sup_error,
    mc_degree_moments,
    sample_X,
    scalar_lattice_histogram,
)
from prefkout.model import INFINITY, DomainError, ModelParams
from prefkout.samplers import sample_degrees_direct_batch


class TestTypes:
    def test_histogram_invariants(self):
        with pytest.raises(DomainError):
            LatticeHistogram(0.0, 0.0, np.array([1]), 1)
        with pytest.raises(DomainError):
            LatticeHistogram(0.0, 1.0, np.array([1, 2]), 4)

    def test_histogram_merge_is_exact(self):
        a = LatticeHistogram(0.0, 0.5, np.array([1, 2, 3]), 6)
        b = LatticeHistogram(1.0, 0.5, np.array([4, 5]), 9)
        m = a.merge(b)
        assert m.origin == 0.0 and m.counts.tolist() == [1, 2, 7, 5] and m.total == 15
        assert b.merge(a).counts.tolist() == m.counts.tolist()
        with pytest.raises(DomainError):
            a.merge(LatticeHistogram(0.25, 0.5, np.array([1]), 1))

    def test_record(self):
        e = EstimateWithError(0.25, 0.01, 100, "x", 0.02)
        r = e.record("op", ModelParams(3, 1, Fraction(1, 2)), 7, runtime_ms=1.5)
        assert r == {
            "op": "op", "params": {"n": 3, "k": 1, "alpha": "1/2"}, "seed": 7, "estimate": 0.25,
            "std_error": 0.01, "bias_bound": 0.02, "n_samples": 100, "method": "x", "runtime_ms": 1.5,
        }


class TestPlugin:
    def test_identical_laws(self):
        p = ModelParams(200, 1, INFINITY)
        e = estimate_tv_X_plugin(p, 20_000, 1)
        assert e.std_error >= 0 and e.bias_bound > 0
        assert e.estimate <= 3 * e.std_error + e.bias_bound

    def test_two_vertices(self):
        e = estimate_tv_X_plugin(ModelParams(2, 1, 1), 1_000_000, 2, method="urn")
        assert abs(e.estimate - 1 / 6) < 0.01

    def test_urn_route_matches_exact(self):
        p = ModelParams(6, 2, 1)
        e = estimate_tv_X_plugin(p, 50_000, 3, method="urn")
        exact = float(exact_tv_full(p))
        assert abs(e.estimate - float(exact_tv_X(p))) < 4 * e.std_error + e.bias_bound
        assert e.estimate <= exact + 4 * e.std_error + e.bias_bound

    def test_rejects_small_m(self):
        with pytest.raises(DomainError):
            estimate_tv_X_plugin(ModelParams(5, 1, 1), 9_999, 0)

    def test_deterministic(self):
        p = ModelParams(500, 1, 20.0)
        assert estimate_tv_X_plugin(p, 10_000, 4) == estimate_tv_X_plugin(p, 10_000, 4, threads=3)


class TestViaF:
    def test_large_beta(self):
        n = 10_000
        e = estimate_tv_via_f(ModelParams(n, 1, 100 * math.sqrt(n)), 20_000, 1)
        assert e.estimate < 0.01
        assert "no-truncation" in e.method

    def test_moderate_n_near_limit(self):
        n = 10_000
        e = estimate_tv_via_f(ModelParams(n, 1, math.sqrt(n)), 50_000, 2)
        assert abs(e.estimate - limit_tv(1, 1)) < 0.02

    def test_clamp_far_from_samples(self):
        assert f_clamp(1, 1.0) == pytest.approx(-20 * (0.25 + 30))

    def test_uniform_rejected(self):
        with pytest.raises(DomainError):
            estimate_tv_via_f(ModelParams(100, 1, INFINITY), 100, 0)


class TestScalarLclt:
    def test_lattice(self):
        p = ModelParams(400, 1, 20)
        h = scalar_lattice_histogram(p, 10_000, 1)
        assert h.spacing == pytest.approx(0.1)
        assert h.counts.sum() == h.total == 10_000
        # every X has the parity of kn, so lattice points are S(X) for X = kn mod 2 + 2j
        x = sample_X(p, 10_000, 5)
        assert ((x - p.arcs) % 2 == 0).all()

    def test_mass_and_symmetry(self):
        p = ModelParams(10_000, 1, 100)
        r = lclt_scalar_check(p, 200_000, 8, 2)
        assert r.total_mass == 1.0
        assert r.asymmetry < 0.06
        assert r.sup_error < 0.05

    def test_insufficient_samples(self):
        with pytest.raises(InsufficientSamples):
            lclt_scalar_check(ModelParams(10**9, 1, float(math.sqrt(10**9))), 100_000, 8, 3)
        with pytest.raises(DomainError):
            lclt_scalar_check(ModelParams(100, 1, 10), 1000, 8, 3)

    @pytest.mark.slow
    def test_error_shrinks_with_n(self):
        small = lclt_scalar_sup_error(ModelParams(2500, 1, 50), 1_000_000, 8, 4)
        large = lclt_scalar_sup_error(ModelParams(10_000, 1, 100), 1_000_000, 8, 4)
        assert large <= small + 0.005


class TestLclt2d:
    def test_small_configuration(self):
        p = ModelParams(400, 1, 20)
        r = lclt_2d_check(p, 200_000, 4, 1)
        assert r.parity_violations == 0
        assert r.marginal_sup_error < 0.03
        assert r.sup_error < 0.06

    def test_direct_route_agrees(self):
        p = ModelParams(100, 1, 10)
        occ = lclt_2d_check(p, 50_000, 3, 2)
        direct = lclt_2d_check(p, 50_000, 3, 2, method="direct")
        assert direct.parity_violations == 0
        assert abs(occ.marginal_sup_error - direct.marginal_sup_error) < 0.05
        assert abs(occ.sup_error - direct.sup_error) < 0.05


class TestConcentration:
    def test_examples(self):
        n = 10_000
        p = ModelParams(n, 1, 100)
        assert concentration_check(p, 2, math.log(n), 10_000, 1).estimate >= 0.99
        assert concentration_check(p, 1, 0.01, 100, 1).estimate == 1.0
        assert concentration_check(p, 2, 0.01, 10_000, 1).estimate < 0.5

    @pytest.mark.parametrize("s", [2, 3, 4])
    def test_chebyshev_budget(self, s):
        n = 5_000
        p = ModelParams(n, 2, 70.0)
        sd = math.sqrt(float(exact_var_power_sum(p, s)) / n)
        omega = 5 * sd
        e = concentration_check(p, s, omega, 4_000, 2)
        assert e.estimate >= 1 - 1 / 25 - 4 * math.sqrt(0.04 * 0.96 / 4_000)

    def test_rejects(self):
        with pytest.raises(DomainError):
            concentration_check(ModelParams(10, 1, 1), 5, 1.0, 10, 0)


class TestDistinguishing:
    def test_event_parameters(self):
        ev = distinguishing_event(10_000, 1, 0.25)
        assert ev.alpha == pytest.approx(10.0)
        assert ev.omega == pytest.approx(10.0)
        assert ev.half_width == pytest.approx(math.sqrt(1e5))
        # gap in means is about k^2 omega sqrt(n), far above the window half-width
        assert ev.gap == pytest.approx(10 * 100, rel=0.01)
        assert ev.gap > 3 * ev.half_width

    def test_rejects_supercritical(self):
        with pytest.raises(DomainError):
            distinguishing_event_check(10_000, 1, 0.5, 100, 0)

    def test_supercritical_does_not_separate(self):
        r = distinguishing_event_check(10_000, 1, 1.0, 10_000, 1, allow_supercritical=True)
        assert abs(r.p_alpha - r.p_unif) < 0.03

    def test_lower_bound_chain(self):
        n, k = 8, 1
        r = distinguishing_event_check(n, k, 0.25, 50_000, 2)
        p = ModelParams(n, k, float(n) ** 0.25)
        plug = estimate_tv_X_plugin(p, 50_000, 3)
        exact = float(exact_tv_full(p))
        noise = 4 * math.sqrt(0.5 / 50_000)
        assert r.p_alpha - r.p_unif <= plug.estimate + 4 * plug.std_error + noise
        assert plug.estimate <= exact + 4 * plug.std_error + plug.bias_bound


class TestChiSquare:
    def test_calibration(self):
        p = ModelParams(3, 2, 1)
        law = exact_X_distribution(p)
        vals = np.array(law.support)
        probs = np.array([float(q) for q in law.probs])
        rng = np.random.default_rng(0)
        pvals = [chi_square_gof(counts_of(rng.choice(vals, 2_000, p=probs)), law) for _ in range(100)]
        assert stats.kstest(pvals, "uniform").pvalue > 1e-3

    def test_power(self):
        d = sample_degrees_direct_batch(ModelParams(2, 1, 1), 100_000, 1)
        uniform = {(2, 0): Fraction(1, 4), (1, 1): Fraction(1, 2), (0, 2): Fraction(1, 4)}
        assert chi_square_gof(counts_of(d), uniform) < 1e-6

    def test_degenerate(self):
        assert chi_square_gof({(3,): 1000}, {(3,): Fraction(1)}) == 1.0

    def test_outside_support(self):
        assert chi_square_gof({1: 10, 5: 1}, {1: Fraction(1)}) == 0.0

    def test_pooling(self):
        with pytest.raises(PoolingError):
            chi_square_gof({1: 1, 2: 1}, {1: Fraction(1, 2), 2: Fraction(1, 2)})
        with pytest.raises(PoolingError):
            chi_square_gof({}, {1: Fraction(1)})

    def test_two_sample(self):
        rng = np.random.default_rng(3)
        a = counts_of(rng.poisson(3, 20_000))
        b = counts_of(rng.poisson(3, 30_000))
        c = counts_of(rng.poisson(3.2, 30_000))
        assert chi_square_two_sample(a, b) > 1e-3
        assert chi_square_two_sample(a, c) < 1e-6


class TestMoments:
    def test_match_exact(self):
        p = ModelParams(100, 2, 5)
        ex = exact_degree_moments(p)
        for name, est in mc_degree_moments(p, 20_000, 1).items():
            tol = 4 * est.std_error if est.std_error > 0 else 1e-9
            assert abs(est.estimate - ex[name]) <= tol, name

    def test_fixed_order_route(self):
        p = ModelParams(20, 1, 2)
        ex = exact_degree_moments(p)
        for name, est in mc_degree_moments(p, 20_000, 2, method="fixed_order").items():
            assert abs(est.estimate - ex[name]) <= max(4 * est.std_error, 1e-9), name
