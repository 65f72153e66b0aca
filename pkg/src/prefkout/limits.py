"""Limit objects at the critical scaling alpha = beta * sqrt(n).

The TV limit is ``1/2 E|1 - exp(-N)|`` with N Gaussian, mean k^2/(4 beta^2) and
variance k^2/(2 beta^2). Since mean = variance / 2, E[exp(-N)] = 1, and a short
calculation with the Gaussian moment generating function gives

    1/2 E|1 - exp(-N)| = 2 Phi(k / (2 sqrt(2) beta)) - 1.

:func:`limit_tv` computes both the quadrature value and this closed form;
``tests/test_limits.py`` checks that they agree.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate

from .model import DomainError

QUAD_ABS_TOL = 1e-10
QUAD_HALF_WIDTH = 12.0  # in standard deviations


@dataclass(frozen=True)
class CovMatrix2:
    matrix: np.ndarray
    inverse: np.ndarray
    det: float


@dataclass(frozen=True)
class LimitLawParams:
    k: int
    beta: float

    def __post_init__(self) -> None:
        if not self.beta > 0:
            raise DomainError("beta must be positive")

    @property
    def mean(self) -> float:
        return self.k**2 / (4 * self.beta**2)

    @property
    def variance(self) -> float:
        return self.k**2 / (2 * self.beta**2)


def sigma_matrix(k: int) -> CovMatrix2:
    """Limit covariance of (Z, Z^2) and its closed-form inverse."""
    if k < 1:
        raise DomainError("k must be >= 1")
    m = np.array([[k, 2 * k * k + k], [2 * k * k + k, 4 * k**3 + 6 * k * k + k]], dtype=float)
    off = -1 / k - 1 / (2 * k * k)
    inv = np.array([[2 + 3 / k + 1 / (2 * k * k), off], [off, 1 / (2 * k * k)]])
    return CovMatrix2(m, inv, 2.0 * k**3)


def eta_density(k: int, x) -> np.ndarray | float:
    """Bivariate Gaussian density with covariance ``sigma_matrix(k)``; x has trailing axis of size 2."""
    cov = sigma_matrix(k)
    x = np.asarray(x, dtype=float)
    q = np.einsum("...i,ij,...j->...", x, cov.inverse, x)
    out = np.exp(-0.5 * q) / (2 * math.pi * math.sqrt(cov.det))
    return float(out) if out.ndim == 0 else out


def psi_density(k: int, x):
    """Normal(0, 2k^2) density."""
    x = np.asarray(x, dtype=float)
    out = np.exp(-(x**2) / (4 * k * k)) / (2 * k * math.sqrt(math.pi))
    return float(out) if out.ndim == 0 else out


def f_value(k: int, beta: float, x):
    """|1 - exp(-k^2/(4 beta^2) - x/(2 beta))|."""
    if not beta > 0:
        raise DomainError("beta must be positive")
    x = np.asarray(x, dtype=float)
    out = np.abs(-np.expm1(-k * k / (4 * beta * beta) - x / (2 * beta)))
    return float(out) if out.ndim == 0 else out


def f_A_value(k: int, beta: float, A: float, x):
    """f clamped to f(-A) below -A."""
    if not A > 0:
        raise DomainError("A must be positive")
    return f_value(k, beta, np.maximum(np.asarray(x, dtype=float), -A))


def _normal_logpdf(x: float, mean: float, var: float) -> float:
    return -((x - mean) ** 2) / (2 * var) - 0.5 * math.log(2 * math.pi * var)


def normal_cdf(x: float) -> float:
    return 0.5 * math.erfc(-x / math.sqrt(2))


def limit_tv_quadrature(k: int, beta: float) -> tuple[float, float]:
    """(value, error estimate) of 1/2 E|1 - exp(-N)| by adaptive Gauss-Kronrod.

    The integrand has a kink at 0, where the exponent vanishes; the range is
    split there. On x < 0 the factor exp(-x) moves mass to a Gaussian centred
    at mean - variance, so the lower limit covers that bump as well.
    """
    law = LimitLawParams(k, beta)
    mu, var = law.mean, law.variance
    sd = math.sqrt(var)
    lo, hi = mu - var - QUAD_HALF_WIDTH * sd, mu + QUAD_HALF_WIDTH * sd

    def g(x: float) -> float:
        lp = _normal_logpdf(x, mu, var)
        if x >= 0:
            return -0.5 * math.expm1(-x) * math.exp(lp)
        # e^-x - 1 = e^-x (1 - e^x); keep e^-x inside the exponent
        return -0.5 * math.expm1(x) * math.exp(lp - x)

    cuts = sorted({lo, hi, 0.0, mu - var, mu})
    value = err = 0.0
    for a, b in zip(cuts, cuts[1:]):
        v, e = integrate.quad(g, a, b, epsabs=QUAD_ABS_TOL, epsrel=1e-12, limit=200)
        value += v
        err += e
    return value, err


def limit_tv_closed_form(k: int, beta: float) -> float:
    law = LimitLawParams(k, beta)
    return 2 * normal_cdf(k / (2 * math.sqrt(2) * law.beta)) - 1


def limit_tv(k: int, beta: float, method: str = "quadrature") -> float:
    """Limit of d_TV(M^alpha, M^inf) for alpha = beta sqrt(n)."""
    if method == "quadrature":
        return limit_tv_quadrature(k, beta)[0]
    if method == "closed_form":
        return limit_tv_closed_form(k, beta)
    raise DomainError(f"unknown method {method!r}")


def lognormal_mean_check(k: int, beta: float) -> float:
    """E[exp(-N)] by quadrature; equals 1 because the mean is half the variance."""
    law = LimitLawParams(k, beta)
    mu, var = law.mean, law.variance
    sd = math.sqrt(var)
    v, _ = integrate.quad(
        lambda x: math.exp(_normal_logpdf(x, mu, var) - x),
        mu - QUAD_HALF_WIDTH * sd - var,
        mu + QUAD_HALF_WIDTH * sd,
        epsabs=1e-12,
        epsrel=1e-12,
        limit=200,
    )
    return v
