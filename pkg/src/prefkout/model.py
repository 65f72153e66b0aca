"""Core types and exact log-probability formulas for random k-out mappings.

A k-out mapping on ``[n]`` sends each vertex to a k-long vector of images.
Under the preferential-attachment model with initial weight ``alpha`` the
probability of a mapping depends only on its in-degree sequence; the uniform
mapping is the ``alpha = INFINITY`` member of the family.

Vertices are 0-based internally; :meth:`KOutDigraph.from_labels` and
:meth:`KOutDigraph.labels` convert to and from the 1-based labels used in files
and on the command line.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence, Union

import numpy as np


class _Infinity(enum.Enum):
    INFINITY = "inf"

    def __repr__(self) -> str:
        return "INFINITY"

    def __str__(self) -> str:
        return "inf"


INFINITY = _Infinity.INFINITY
"""Marker for the uniform model. Never compare alpha against ``float('inf')``."""

Alpha = Union[int, Fraction, float, _Infinity]

# b above this uses the log-Gamma identity for the rising factorial
_DIRECT_SUM_MAX = 32


class DomainError(ValueError):
    """Argument outside the domain of a formula."""


def is_infinite(alpha: Alpha) -> bool:
    return alpha is INFINITY


def is_rational(alpha: Alpha) -> bool:
    """True when alpha admits exact rational arithmetic (int or Fraction)."""
    return isinstance(alpha, (int, Fraction)) and not isinstance(alpha, bool)


@dataclass(frozen=True)
class ModelParams:
    n: int
    k: int
    alpha: Alpha

    def __post_init__(self) -> None:
        if not isinstance(self.n, (int, np.integer)) or self.n < 1:
            raise DomainError(f"n must be a positive integer, got {self.n!r}")
        if not isinstance(self.k, (int, np.integer)) or self.k < 1:
            raise DomainError(f"k must be a positive integer, got {self.k!r}")
        a = self.alpha
        if a is INFINITY:
            return
        if isinstance(a, bool) or not isinstance(a, (int, float, Fraction, np.floating, np.integer)):
            raise DomainError(f"alpha must be a positive real or INFINITY, got {a!r}")
        if isinstance(a, float) and math.isinf(a):
            raise DomainError("use INFINITY, not float('inf'), for the uniform model")
        if not a > 0 or (isinstance(a, float) and math.isnan(a)):
            raise DomainError(f"alpha must be positive, got {a!r}")

    @property
    def arcs(self) -> int:
        """Total number of arcs, kn."""
        return self.n * self.k

    @property
    def uniform(self) -> bool:
        return self.alpha is INFINITY

    def with_alpha(self, alpha: Alpha) -> "ModelParams":
        return ModelParams(self.n, self.k, alpha)

    def alpha_float(self) -> float:
        if self.alpha is INFINITY:
            return math.inf
        return float(self.alpha)


@dataclass(frozen=True)
class KOutDigraph:
    """A k-out mapping; ``targets[v, i]`` is the 0-based image of arc ``i`` of vertex ``v``."""

    params: ModelParams
    targets: np.ndarray

    def __post_init__(self) -> None:
        t = np.asarray(self.targets, dtype=np.int64)
        p = self.params
        if t.size != p.arcs:
            raise DomainError(f"expected {p.arcs} targets, got {t.size}")
        t = t.reshape(p.n, p.k)
        if t.size and (t.min() < 0 or t.max() >= p.n):
            raise DomainError("targets must lie in [0, n)")
        object.__setattr__(self, "targets", t)

    @classmethod
    def from_labels(cls, params: ModelParams, labels: Sequence[int]) -> "KOutDigraph":
        """Build from 1-based images listed vertex by vertex, arc by arc."""
        return cls(params, np.asarray(labels, dtype=np.int64) - 1)

    def labels(self) -> np.ndarray:
        return self.targets + 1


@dataclass(frozen=True)
class InDegreeSequence:
    counts: np.ndarray

    def __post_init__(self) -> None:
        c = np.asarray(self.counts, dtype=np.int64)
        if c.ndim != 1 or (c.size and c.min() < 0):
            raise DomainError("in-degree counts must be a 1-D array of nonnegative integers")
        object.__setattr__(self, "counts", c)

    @property
    def n(self) -> int:
        return int(self.counts.size)

    def total(self) -> int:
        return int(self.counts.sum())

    def check_admissible(self, p: ModelParams) -> None:
        if self.n != p.n or self.total() != p.arcs:
            raise DomainError(
                f"sequence of length {self.n} summing to {self.total()} is not "
                f"admissible for n={p.n}, k={p.k}"
            )

    def __iter__(self):
        return (int(x) for x in self.counts)


@dataclass(frozen=True)
class LogProb:
    value: float

    def __post_init__(self) -> None:
        if self.value > 1e-9:
            raise DomainError(f"log-probability must be <= 0, got {self.value}")

    def prob(self) -> float:
        return math.exp(self.value)

    def __float__(self) -> float:
        return self.value


@dataclass(frozen=True)
class PowerSums:
    s1: int
    s2: int
    s3: int
    s4: int

    def __getitem__(self, t: int) -> int:
        return (self.s1, self.s2, self.s3, self.s4)[t - 1]


def in_degrees(g: KOutDigraph) -> InDegreeSequence:
    return InDegreeSequence(np.bincount(g.targets.ravel(), minlength=g.params.n))


def log_rising_factorial(a: float, b: int) -> float:
    """ln of a(a+1)...(a+b-1)."""
    if not a > 0:
        raise DomainError(f"rising factorial needs a > 0, got {a}")
    b = int(b)
    if b < 0:
        raise DomainError(f"rising factorial needs b >= 0, got {b}")
    if b == 0:
        return 0.0
    a = float(a)
    if b <= _DIRECT_SUM_MAX:
        return math.fsum(math.log(a + j) for j in range(b))
    if a > 1e3 * b:
        # lgamma differences cancel catastrophically when a >> b
        return b * math.log(a) + math.fsum(np.log1p(np.arange(b) / a).tolist())
    return math.lgamma(a + b) - math.lgamma(a)


def rising_factorial(a, b: int):
    """Exact a^<b> for int/Fraction a; float product otherwise."""
    out = 1 if not isinstance(a, float) else 1.0
    for j in range(int(b)):
        out *= a + j
    return out


def falling_factorial(x, b: int):
    out = 1
    for j in range(int(b)):
        out *= x - j
    return out


@dataclass(frozen=True)
class Bracket:
    lower: float
    upper: float

    def contains(self, x: float, slack: float = 0.0) -> bool:
        return self.lower - slack <= x <= self.upper + slack


def rising_factorial_bounds(a: float, b: int) -> tuple[Bracket, Bracket]:
    """Log-space (rough, sharp) brackets for a^<b>, valid for integer 0 <= b < a + 1.

    rough:  b ln a + b(b-1)/2a - b^3/6a^2  <=  ln a^<b>  <=  b ln a + b(b-1)/2a
    sharp:  c  <=  ln a^<b>  <=  c + b^4/12a^3,  c = b ln a + b(b-1)/2a - b(b-1)(2b-1)/12a^2
    """
    if not a > 0:
        raise DomainError(f"a must be positive, got {a}")
    b = int(b)
    if b < 0 or b >= a + 1:
        raise DomainError(f"need 0 <= b < a + 1, got a={a}, b={b}")
    a = float(a)
    base = b * math.log(a) + b * (b - 1) / (2 * a)
    rough = Bracket(base - b**3 / (6 * a * a), base)
    sharp_low = base - b * (b - 1) * (2 * b - 1) / (12 * a * a)
    sharp = Bracket(sharp_low, sharp_low + b**4 / (12 * a**3))
    return rough, sharp


def _degree_counts(d) -> np.ndarray:
    if isinstance(d, InDegreeSequence):
        return d.counts
    return np.asarray(d, dtype=np.int64)


def log_pmf_from_degrees(p: ModelParams, d) -> float:
    """ln P(M = m) for any single mapping m whose in-degree sequence is ``d``."""
    counts = _degree_counts(d)
    if p.uniform:
        return -p.arcs * math.log(p.n)
    a = float(p.alpha)
    num = math.fsum(log_rising_factorial(a, int(x)) for x in counts if x)
    return num - log_rising_factorial(a * p.n, p.arcs)


def log_pmf_digraph(p: ModelParams, g: KOutDigraph) -> LogProb:
    if g.params.n != p.n or g.params.k != p.k:
        raise DomainError("digraph does not conform to the model parameters")
    return LogProb(log_pmf_from_degrees(p, in_degrees(g)))


def log_multinomial(d) -> float:
    counts = _degree_counts(d)
    return math.lgamma(int(counts.sum()) + 1) - math.fsum(math.lgamma(int(x) + 1) for x in counts)


def multinomial(d) -> int:
    counts = [int(x) for x in _degree_counts(d)]
    out = math.factorial(sum(counts))
    for x in counts:
        out //= math.factorial(x)
    return out


def log_pmf_degree_sequence(p: ModelParams, d) -> LogProb:
    seq = d if isinstance(d, InDegreeSequence) else InDegreeSequence(d)
    seq.check_admissible(p)
    return LogProb(min(0.0, log_multinomial(seq) + log_pmf_from_degrees(p, seq)))


def pmf_degree_sequence_exact(p: ModelParams, d) -> Fraction:
    """Exact P(D = d) for rational alpha or the uniform model."""
    seq = d if isinstance(d, InDegreeSequence) else InDegreeSequence(d)
    seq.check_admissible(p)
    mult = multinomial(seq)
    if p.uniform:
        return Fraction(mult, p.n**p.arcs)
    if not is_rational(p.alpha):
        raise DomainError("exact mode requires rational alpha (int or Fraction)")
    a = Fraction(p.alpha)
    num = 1
    for x in seq:
        num *= rising_factorial(a, x)
    return mult * num / rising_factorial(a * p.n, p.arcs)


def power_sums(d) -> PowerSums:
    c = [int(x) for x in _degree_counts(d)]
    return PowerSums(*(sum(x**t for x in c) for t in range(1, 5)))


def second_moment_Z(k: int, alpha: Alpha):
    """E[Z^2] for the negative binomial of shape alpha and mean k; Poisson(k) for INFINITY."""
    if alpha is INFINITY:
        return k * k + k
    if is_rational(alpha):
        a = Fraction(alpha)
        return k + k * k * (a + 1) / a
    a = float(alpha)
    return k + k * k * (a + 1) / a


def centered_S(p: ModelParams, s2: int, uniform_centering: bool = False) -> float:
    """(s2 - n E[Z^2]) / sqrt(n).

    The uniform model has no negative-binomial centering; pass
    ``uniform_centering=True`` to center by the Poisson value ``k^2 + k`` instead.
    """
    if p.uniform and not uniform_centering:
        raise DomainError("alpha = INFINITY: pass uniform_centering=True to center by E[Y^2]")
    ez2 = second_moment_Z(p.k, INFINITY if uniform_centering else p.alpha)
    return float(s2 - p.n * ez2) / math.sqrt(p.n)
