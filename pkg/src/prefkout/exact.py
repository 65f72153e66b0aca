"""Exact distributions, moments and total variation distances for small n.

Sums over admissible in-degree sequences are organised by integer partition:
all sequences that are rearrangements of one another share their probability,
so each partition of kn into at most n parts is visited once and weighted by
the number of sequences realising it.

Rational alpha (int or Fraction) and the uniform model give exact Fractions.
A float alpha is treated as a rounded irrational and evaluated in mpmath
interval arithmetic; the result carries a rigorous error bound.
"""

from __future__ import annotations

import logging
import math
from collections import Counter
from contextlib import contextmanager
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Iterator, Union

import mpmath

from .model import (
    INFINITY,
    DomainError,
    ModelParams,
    falling_factorial,
    is_rational,
    log_rising_factorial,
    rising_factorial,
)

log = logging.getLogger(__name__)

DEFAULT_BUDGET = 24
EXTENDED_DPS = 60


@contextmanager
def _iv_dps():
    saved = mpmath.iv.dps
    mpmath.iv.dps = EXTENDED_DPS
    try:
        yield
    finally:
        mpmath.iv.dps = saved


class BudgetExceeded(RuntimeError):
    """kn is above the enumeration budget."""


@dataclass(frozen=True)
class DegreePartition:
    parts: tuple[int, ...]  # nonzero in-degrees, non-increasing
    zeros: int
    multiplicity: int

    @property
    def n(self) -> int:
        return len(self.parts) + self.zeros

    def square_sum(self) -> int:
        return sum(x * x for x in self.parts)


@dataclass(frozen=True)
class ExtendedValue:
    """Extended-precision value with a rigorous absolute error bound."""

    value: mpmath.mpf
    error_bound: mpmath.mpf

    def __float__(self) -> float:
        return float(self.value)


Number = Union[Fraction, ExtendedValue]


@dataclass(frozen=True)
class ExactDistribution:
    support: tuple[int, ...]
    probs: tuple

    def __post_init__(self) -> None:
        if len(self.support) != len(self.probs):
            raise DomainError("support and probs differ in length")
        if any(p < 0 for p in self.probs):
            raise DomainError("negative probability")

    def as_dict(self) -> dict:
        return dict(zip(self.support, self.probs))

    def total(self):
        return sum(self.probs)

    def to_json(self) -> dict:
        return {"support": list(self.support), "probs": [_prob_str(p) for p in self.probs]}

    @classmethod
    def from_json(cls, obj: dict) -> "ExactDistribution":
        return cls(tuple(int(s) for s in obj["support"]), tuple(Fraction(p) for p in obj["probs"]))


def _prob_str(p) -> str:
    if isinstance(p, Fraction):
        return f"{p.numerator}/{p.denominator}"
    return mpmath.nstr(p, 30) if isinstance(p, mpmath.mpf) else repr(float(p))


def partition_count(total: int, max_parts: int) -> int:
    """Number of partitions of ``total`` into at most ``max_parts`` parts."""

    @lru_cache(maxsize=None)
    def count(t: int, parts: int, cap: int) -> int:
        if t == 0:
            return 1
        if parts == 0:
            return 0
        return sum(count(t - x, parts - 1, x) for x in range(min(cap, t), 0, -1))

    return count(total, max_parts, total)


def check_budget(p: ModelParams, budget: int = DEFAULT_BUDGET) -> int:
    """Raise BudgetExceeded if kn > budget; otherwise return the partition count."""
    if p.arcs > budget:
        raise BudgetExceeded(f"kn = {p.arcs} exceeds the enumeration budget {budget}")
    cost = partition_count(p.arcs, p.n)
    log.info("enumerating %d partitions of kn=%d into <= %d parts", cost, p.arcs, p.n)
    return cost


def _partitions(total: int, max_parts: int, cap: int) -> Iterator[tuple[int, ...]]:
    if total == 0:
        yield ()
        return
    if max_parts == 0:
        return
    for first in range(min(cap, total), 0, -1):
        for rest in _partitions(total - first, max_parts - 1, first):
            yield (first,) + rest


def enumerate_partitions(n: int, k: int, budget: int = DEFAULT_BUDGET) -> Iterator[DegreePartition]:
    kn = n * k
    if kn > budget:
        raise BudgetExceeded(f"kn = {kn} exceeds the enumeration budget {budget}")
    nfact = math.factorial(n)
    for parts in _partitions(kn, n, kn):
        zeros = n - len(parts)
        denom = math.factorial(zeros)
        for c in Counter(parts).values():
            denom *= math.factorial(c)
        yield DegreePartition(parts, zeros, nfact // denom)


def _multinomial(total: int, parts) -> int:
    out = math.factorial(total)
    for x in parts:
        out //= math.factorial(x)
    return out


# ---------------------------------------------------------------------------
# per-sequence probabilities in the chosen arithmetic


class _Arith:
    """Per-sequence probabilities (a single mapping's probability) for one model."""

    def __init__(self, p: ModelParams):
        self.p = p
        self.uniform = p.uniform
        self.exact = p.uniform or is_rational(p.alpha)
        if self.exact:
            self.zero = Fraction(0)
            if not self.uniform:
                self.a = Fraction(p.alpha)
                self.denom = rising_factorial(self.a * p.n, p.arcs)
            self.unif = Fraction(1, p.n**p.arcs)
        else:
            self.zero = mpmath.iv.mpf(0)
            with _iv_dps():
                self.a = mpmath.iv.mpf(float(p.alpha))
                self.denom = self._iv_rising(self.a * p.n, p.arcs)
                self.unif = mpmath.iv.mpf(1) / mpmath.iv.mpf(p.n) ** p.arcs

    @staticmethod
    def _iv_rising(a, b: int):
        out = mpmath.iv.mpf(1)
        for j in range(b):
            out = out * (a + j)
        return out

    def mapping_prob(self, parts) -> object:
        if self.uniform:
            return self.unif
        if self.exact:
            num = Fraction(1)
            for x in parts:
                num *= rising_factorial(self.a, x)
            return num / self.denom
        with _iv_dps():
            num = mpmath.iv.mpf(1)
            for x in parts:
                num = num * self._iv_rising(self.a, x)
            return num / self.denom

    def finish(self, x) -> Number:
        if self.exact:
            return x
        with mpmath.workdps(EXTENDED_DPS):
            return ExtendedValue(+mpmath.mpf(x.mid), mpmath.mpf(x.delta) / 2 + mpmath.mpf(10) ** -EXTENDED_DPS)


def _abs_iv(x):
    if isinstance(x, Fraction):
        return abs(x)
    lo, hi = x.a, x.b
    if lo >= 0:
        return x
    if hi <= 0:
        return -x
    return mpmath.iv.mpf([0, max(-lo, hi)])


def exact_tv_full(p: ModelParams, budget: int = DEFAULT_BUDGET) -> Number:
    """d_TV(M^alpha, M^inf) = 1/2 sum_d multinomial(kn; d) |prod alpha^<d_j>/(alpha n)^<kn> - n^-kn|."""
    check_budget(p, budget)
    if p.uniform:
        return Fraction(0)
    ar = _Arith(p)
    total = ar.zero
    with _iv_dps():
        for part in enumerate_partitions(p.n, p.k, budget):
            w = part.multiplicity * _multinomial(p.arcs, part.parts)
            diff = ar.mapping_prob(part.parts) - ar.unif
            total = total + w * _abs_iv(diff)
        return ar.finish(total / 2)


def degree_sequence_law(p: ModelParams, budget: int = DEFAULT_BUDGET) -> Iterator[tuple[DegreePartition, object]]:
    """Yield (partition, probability of each single sequence in that class)."""
    check_budget(p, budget)
    ar = _Arith(p)
    with _iv_dps():
        for part in enumerate_partitions(p.n, p.k, budget):
            yield part, _multinomial(p.arcs, part.parts) * ar.mapping_prob(part.parts)


def exact_X_distribution(p: ModelParams, budget: int = DEFAULT_BUDGET) -> ExactDistribution:
    """Law of X = sum_j d_j^2."""
    ar = _Arith(p)
    acc: dict[int, object] = {}
    with _iv_dps():
        for part, prob in degree_sequence_law(p, budget):
            key = part.square_sum()
            acc[key] = acc.get(key, ar.zero) + part.multiplicity * prob
    support = tuple(sorted(acc))
    if ar.exact:
        probs = tuple(acc[s] for s in support)
    else:
        probs = tuple(mpmath.mpf(acc[s].mid) for s in support)
    return ExactDistribution(support, probs)


def exact_tv_X(p: ModelParams, budget: int = DEFAULT_BUDGET):
    """d_TV between the laws of X under the alpha-model and the uniform model."""
    if p.uniform:
        return Fraction(0)
    return tv_between(exact_X_distribution(p, budget), exact_X_distribution(p.with_alpha(INFINITY), budget))


def _to_mp(x):
    if isinstance(x, Fraction):
        return mpmath.mpf(x.numerator) / x.denominator
    return mpmath.mpf(x)


def tv_between(lhs: ExactDistribution, rhs: ExactDistribution):
    """Half the L1 distance between two exact laws on integer supports."""
    a, b = lhs.as_dict(), rhs.as_dict()
    keys = set(a) | set(b)
    if all(isinstance(v, Fraction) for v in (*a.values(), *b.values())):
        return sum((abs(a.get(x, 0) - b.get(x, 0)) for x in keys), Fraction(0)) / 2
    with mpmath.workdps(EXTENDED_DPS):
        return sum(abs(_to_mp(a.get(x, 0)) - _to_mp(b.get(x, 0))) for x in keys) / 2


# ---------------------------------------------------------------------------
# moments


@lru_cache(maxsize=None)
def stirling2(s: int, ell: int) -> int:
    """Stirling partition number {s, ell}."""
    if s == ell:
        return 1
    if ell == 0 or ell > s:
        return 0
    return ell * stirling2(s - 1, ell) + stirling2(s - 1, ell - 1)


def _alpha_value(p: ModelParams):
    return Fraction(p.alpha) if is_rational(p.alpha) else float(p.alpha)


def exact_moment_factorial(p: ModelParams, ell: int):
    """E[(D_j)_ell]: alpha^<ell> (kn)_ell / (alpha n)^<ell>, or (kn)_ell / n^ell when uniform."""
    kn = p.arcs
    if p.uniform:
        return Fraction(falling_factorial(kn, ell), p.n**ell)
    a = _alpha_value(p)
    return rising_factorial(a, ell) * falling_factorial(kn, ell) / rising_factorial(a * p.n, ell)


def exact_moment(p: ModelParams, s: int):
    """mu_s = E[D_j^s] via Stirling numbers of the second kind."""
    return sum(stirling2(s, ell) * exact_moment_factorial(p, ell) for ell in range(1, s + 1))


def exact_mixed_factorial(p: ModelParams, ell: int, m: int):
    """E[(D_i)_ell (D_j)_m] for i != j."""
    kn = p.arcs
    ff = falling_factorial(kn, ell + m)
    if p.uniform:
        return Fraction(ff, p.n ** (ell + m))
    a = _alpha_value(p)
    return rising_factorial(a, ell) * rising_factorial(a, m) * ff / rising_factorial(a * p.n, ell + m)


def exact_mixed_moment(p: ModelParams, s: int, t: int):
    """E[D_i^s D_j^t] for i != j."""
    return sum(
        stirling2(s, ell) * stirling2(t, m) * exact_mixed_factorial(p, ell, m)
        for ell in range(1, s + 1)
        for m in range(1, t + 1)
    )


def exact_var_power_sum(p: ModelParams, s: int):
    """Var[sum_j D_j^s] = n mu_2s + n(n-1) E[D_1^s D_2^s] - (n mu_s)^2."""
    n = p.n
    mixed = exact_mixed_moment(p, s, s) if n > 1 else 0
    return n * exact_moment(p, 2 * s) + n * (n - 1) * mixed - (n * exact_moment(p, s)) ** 2


def negbin_moment_Z(k: int, alpha, s: int):
    """E[Z^s] for the unconditioned summand: sum_ell {s,ell} alpha^<ell> k^ell / alpha^ell."""
    if alpha is INFINITY:
        return sum(stirling2(s, ell) * k**ell for ell in range(1, s + 1))
    a = Fraction(alpha) if is_rational(alpha) else float(alpha)
    return sum(stirling2(s, ell) * rising_factorial(a, ell) * k**ell / a**ell for ell in range(1, s + 1))


def log_prob_sum_Z_equals_kn(p: ModelParams) -> float:
    """ln P(Z_1 + ... + Z_n = kn) = ln[(alpha n)^<kn>/(kn)! (alpha/(alpha+k))^(alpha n) (k/(alpha+k))^kn].

    The uniform model gives the Poisson(kn) point mass at kn.
    """
    kn, k = p.arcs, p.k
    if p.uniform:
        return -kn + kn * math.log(kn) - math.lgamma(kn + 1)
    a = float(p.alpha)
    return (
        log_rising_factorial(a * p.n, kn)
        - math.lgamma(kn + 1)
        - a * p.n * math.log1p(k / a)
        + kn * (math.log(k) - math.log(a + k))
    )


# ---------------------------------------------------------------------------
# conditioned IID representation, evaluated through the generating function


def _negbin_series(a: Fraction, q: Fraction, terms: int) -> list[Fraction]:
    """Coefficients of (1 - q x)^(-a) from (1 - q x) g' = a q g."""
    coef = [Fraction(1)]
    for d in range(terms - 1):
        coef.append(coef[-1] * q * (a + d) / (d + 1))
    return coef


def _poly_pow_coeff(series: list[Fraction], power: int, degree: int) -> Fraction:
    """[x^degree] of series**power by repeated truncated convolution."""
    result = [Fraction(0)] * (degree + 1)
    result[0] = Fraction(1)
    base = series[: degree + 1]
    e = power
    while e:
        if e & 1:
            result = _truncated_mul(result, base, degree)
        e >>= 1
        if e:
            base = _truncated_mul(base, base, degree)
    return result[degree]


def _truncated_mul(a: list[Fraction], b: list[Fraction], degree: int) -> list[Fraction]:
    out = [Fraction(0)] * (degree + 1)
    for i, x in enumerate(a):
        if x:
            for j in range(degree + 1 - i):
                out[i + j] += x * b[j]
    return out


def conditioned_iid_pmf(p: ModelParams, d) -> Fraction:
    """P(Z = d | sum Z = kn) for IID negative binomial Z, computed from the pgf.

    The factor (alpha/(alpha+k))^alpha shared by every summand cancels between
    numerator and denominator, which keeps the result rational for rational alpha.
    """
    d = [int(x) for x in d]
    if len(d) != p.n or sum(d) != p.arcs:
        raise DomainError("inadmissible degree sequence")
    kn = p.arcs
    if p.uniform:
        series = [Fraction(p.k**j, math.factorial(j)) for j in range(kn + 1)]
    else:
        if not is_rational(p.alpha):
            raise DomainError("exact pgf route needs rational alpha")
        a = Fraction(p.alpha)
        series = _negbin_series(a, Fraction(p.k) / (a + p.k), kn + 1)
    num = Fraction(1)
    for x in d:
        num *= series[x]
    return num / _poly_pow_coeff(series, p.n, kn)


def all_degree_sequences(n: int, total: int) -> Iterator[tuple[int, ...]]:
    """Every composition of ``total`` into ``n`` nonnegative parts."""
    if n == 1:
        yield (total,)
        return
    for first in range(total, -1, -1):
        for rest in all_degree_sequences(n - 1, total - first):
            yield (first,) + rest
