"""Monte Carlo estimators that tie samples to the exact and limit layers.

All estimators are deterministic functions of their inputs and seed. Sampling
runs in fixed chunks with their own RNG streams (see :mod:`prefkout.samplers`),
so ``threads`` changes wall time only, never results.

For large n the sums of powers of in-degrees are drawn with the histogram
samplers of :mod:`prefkout.occupancy`; ``method="urn"`` routes through the
sequential urn instead (feasible for small n only).
"""

from __future__ import annotations

import math
import time
from dataclasses import asdict, dataclass, field
from typing import Mapping, NamedTuple

import numpy as np
from scipy import stats

from . import occupancy
from .exact import ExactDistribution, exact_mixed_factorial, exact_moment, exact_moment_factorial
from .limits import eta_density, f_value, psi_density, sigma_matrix
from .model import INFINITY, DomainError, ModelParams, second_moment_Z
from .samplers import (
    derive_seed,
    sample_degrees_direct_batch,
    sample_fixed_order_batch,
    in_degrees_batch,
    sample_iid_Z_pairs_batch,
)

MIN_TV_SAMPLES = 10_000
MIN_LCLT_SAMPLES = 100_000
BOOTSTRAP_REPS = 200


class InsufficientSamples(RuntimeError):
    """The sample is too small for the requested check."""


class PoolingError(ValueError):
    """Expected counts too small to form any chi-square cell."""


@dataclass(frozen=True)
class EstimateWithError:
    estimate: float
    std_error: float
    n_samples: int
    method: str
    bias_bound: float = 0.0
    extras: dict = field(default_factory=dict)

    def record(self, op: str, params: ModelParams, seed: int, runtime_ms: float | None = None) -> dict:
        out = {
            "op": op,
            "params": {"n": params.n, "k": params.k, "alpha": str(params.alpha)},
            "seed": seed,
            "estimate": self.estimate,
            "std_error": self.std_error,
            "bias_bound": self.bias_bound,
            "n_samples": self.n_samples,
            "method": self.method,
        }
        if runtime_ms is not None:
            out["runtime_ms"] = runtime_ms
        return out


@dataclass(frozen=True)
class LatticeHistogram:
    """Counts on the points origin + i * spacing, i = 0..len(counts)-1."""

    origin: float
    spacing: float
    counts: np.ndarray
    total: int

    def __post_init__(self) -> None:
        if not self.spacing > 0:
            raise DomainError("spacing must be positive")
        if int(np.sum(self.counts)) != self.total:
            raise DomainError("counts do not sum to total")

    def points(self) -> np.ndarray:
        return self.origin + self.spacing * np.arange(len(self.counts))

    def probs(self) -> np.ndarray:
        return self.counts / self.total

    def merge(self, other: "LatticeHistogram") -> "LatticeHistogram":
        """Exact integer merge of two histograms on the same lattice."""
        shift = (other.origin - self.origin) / self.spacing
        if other.spacing != self.spacing or abs(shift - round(shift)) > 1e-6:
            raise DomainError("histograms live on different lattices")
        lo = min(0, int(round(shift)))
        hi = max(len(self.counts), int(round(shift)) + len(other.counts))
        counts = np.zeros(hi - lo, dtype=np.int64)
        counts[-lo : -lo + len(self.counts)] += self.counts
        s = int(round(shift)) - lo
        counts[s : s + len(other.counts)] += other.counts
        return LatticeHistogram(self.origin + lo * self.spacing, self.spacing, counts, self.total + other.total)


# ---------------------------------------------------------------------------
# sampling the statistic X = sum_j d_j^2


def sample_power_sums(p: ModelParams, m: int, seed: int, method: str = "occupancy", threads: int = 1) -> np.ndarray:
    """(m, 3) int array of (s2, s3, s4) for in-degree sequences of M_{n,k}^alpha."""
    if method == "occupancy":
        return occupancy.sample_power_sums(p, m, seed, threads)
    if method == "urn":
        d = sample_degrees_direct_batch(p, m, seed, threads)
        return np.stack([(d**t).sum(axis=1) for t in (2, 3, 4)], axis=1)
    raise DomainError(f"unknown method {method!r}")


def sample_X(p: ModelParams, m: int, seed: int, method: str = "occupancy", threads: int = 1) -> np.ndarray:
    return sample_power_sums(p, m, seed, method, threads)[:, 0]


def _shared_pmfs(xa: np.ndarray, xb: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    lo = int(min(xa.min(), xb.min()))
    size = int(max(xa.max(), xb.max())) - lo + 1
    pa = np.bincount(xa - lo, minlength=size)
    pb = np.bincount(xb - lo, minlength=size)
    return pa, pb


def estimate_tv_X_plugin(
    p_alpha: ModelParams,
    m: int,
    seed: int,
    method: str = "occupancy",
    threads: int = 1,
    bootstrap: int = BOOTSTRAP_REPS,
) -> EstimateWithError:
    """Plug-in d_TV(X(M^alpha), X(M^inf)) from m draws per model.

    ``bias_bound`` is 1/2 sum_x sqrt((p(1-p) + q(1-q)) / m) at the empirical
    pmfs: by Jensen, E|p_hat - q_hat| <= |p - q| + sd(p_hat - q_hat), so the
    upward bias of the plug-in estimate is at most this sum.
    """
    if m < MIN_TV_SAMPLES:
        raise DomainError(f"plug-in TV needs m >= {MIN_TV_SAMPLES}, got {m}")
    xa = sample_X(p_alpha, m, derive_seed(seed, 1), method, threads)
    xu = sample_X(p_alpha.with_alpha(INFINITY), m, derive_seed(seed, 2), method, threads)
    ca, cu = _shared_pmfs(xa, xu)
    pa, pu = ca / m, cu / m
    tv = 0.5 * float(np.abs(pa - pu).sum())
    bias = 0.5 * float(np.sqrt((pa * (1 - pa) + pu * (1 - pu)) / m).sum())
    rng = np.random.default_rng(derive_seed(seed, 3))
    boots = np.empty(bootstrap)
    for b in range(bootstrap):
        ra = rng.multinomial(m, pa) / m
        ru = rng.multinomial(m, pu) / m
        boots[b] = 0.5 * np.abs(ra - ru).sum()
    se = float(boots.std(ddof=1)) if bootstrap > 1 else 0.0
    return EstimateWithError(tv, se, m, f"plugin-X/{method}", bias, {"support_size": int(np.count_nonzero(ca + cu))})


def beta_of(p: ModelParams) -> float:
    if p.uniform:
        raise DomainError("the f-functional needs a finite alpha")
    return float(p.alpha) / math.sqrt(p.n)


def f_clamp(k: int, beta: float) -> float:
    """Lower clamp for the argument of f; prevents overflow of the exponential only."""
    return -20 * beta * (k * k / (4 * beta * beta) + 30)


def centered_X(p: ModelParams, x: np.ndarray) -> np.ndarray:
    """S_n^0 = (X - n E[Z^2]) / sqrt(n) for an array of X values."""
    ez2 = float(second_moment_Z(p.k, p.alpha))
    return (x - p.n * ez2) / math.sqrt(p.n)


def estimate_tv_via_f(
    p: ModelParams, m: int, seed: int, method: str = "occupancy", threads: int = 1
) -> EstimateWithError:
    """Mean of f(S_n^0)/2 under the alpha-model, beta = alpha/sqrt(n).

    The truncation to good degree sequences is not applied; its complement has
    vanishing probability.
    """
    beta = beta_of(p)
    x = sample_X(p, m, derive_seed(seed, 4), method, threads)
    s = np.maximum(centered_X(p, x), f_clamp(p.k, beta))
    vals = 0.5 * f_value(p.k, beta, s)
    vals = np.atleast_1d(vals)
    se = float(vals.std(ddof=1) / math.sqrt(m)) if m > 1 else 0.0
    return EstimateWithError(float(vals.mean()), se, m, f"f-functional/{method}/no-truncation")


# ---------------------------------------------------------------------------
# local limit checks


def scalar_lattice_histogram(
    p: ModelParams, m: int, seed: int, method: str = "occupancy", threads: int = 1
) -> LatticeHistogram:
    """Histogram of S_n^0 on its lattice: spacing 2/sqrt(n), X of the parity of kn."""
    x = sample_X(p, m, derive_seed(seed, 5), method, threads)
    parity = p.arcs % 2
    if np.any((x - parity) % 2):
        raise AssertionError("X off its parity lattice")
    j = (x - parity) // 2
    j0 = int(j.min())
    counts = np.bincount(j - j0)
    origin = float(centered_X(p, np.array([parity + 2 * j0]))[0])
    return LatticeHistogram(origin, 2 / math.sqrt(p.n), counts, m)


@dataclass(frozen=True)
class LcltResult:
    sup_error: float
    argmax: float
    points: int
    total_mass: float
    asymmetry: float


def lclt_scalar_check(
    p: ModelParams, m: int, window: float, seed: int, method: str = "occupancy", threads: int = 1
) -> LcltResult:
    if p.uniform:
        raise DomainError("the scalar local limit check needs a finite alpha")
    if m < MIN_LCLT_SAMPLES:
        raise DomainError(f"need m >= {MIN_LCLT_SAMPLES}, got {m}")
    h = scalar_lattice_histogram(p, m, seed, method, threads)
    # extend the lattice over the whole window; unseen points count as zero
    lo = int(math.floor((-window - h.origin) / h.spacing))
    hi = int(math.ceil((window - h.origin) / h.spacing))
    idx = np.arange(lo, hi + 1)
    pts = h.origin + h.spacing * idx
    inside = (idx >= 0) & (idx < len(h.counts))
    counts = np.zeros(len(idx), dtype=np.int64)
    counts[inside] = h.counts[idx[inside]]
    keep = np.abs(pts) <= window
    pts, counts = pts[keep], counts[keep]
    sigma = math.sqrt(2) * p.k
    if np.any(counts[np.abs(pts) <= sigma] == 0):
        raise InsufficientSamples("empty lattice cells within one standard deviation; increase m")
    scaled = math.sqrt(p.n) / 2 * counts / m
    err = np.abs(scaled - psi_density(p.k, pts))
    i = int(np.argmax(err))
    # asymmetry: compare cells at +x and -x through the interpolated scaled pmf
    mirrored = np.interp(-pts, pts, scaled)
    return LcltResult(
        float(err[i]), float(pts[i]), int(len(pts)), float(h.counts.sum() / m), float(np.abs(scaled - mirrored).max())
    )


def lclt_scalar_sup_error(
    p: ModelParams, m: int, window: float, seed: int, method: str = "occupancy", threads: int = 1
) -> float:
    """sup over lattice points in [-window, window] of |sqrt(n)/2 P_hat(S_n^0 = x) - psi(x)|."""
    return lclt_scalar_check(p, m, window, seed, method, threads).sup_error


@dataclass(frozen=True)
class Lclt2dResult:
    sup_error: float
    points: int
    parity_violations: int
    marginal_sup_error: float


def sample_pair_sums(
    p: ModelParams, m: int, seed: int, method: str = "occupancy", threads: int = 1
) -> tuple[np.ndarray, np.ndarray]:
    """m draws of (sum_j Z_j, sum_j Z_j^2) over n IID summands."""
    s = derive_seed(seed, 6)
    if method == "occupancy":
        return occupancy.sample_sum_pairs(p, p.n, m, s, threads)
    if method == "direct":
        z, z2 = sample_iid_Z_pairs_batch(p, m * p.n, s, threads)
        return z.reshape(m, p.n).sum(axis=1), z2.reshape(m, p.n).sum(axis=1)
    raise DomainError(f"unknown method {method!r}")


def lclt_2d_check(
    p: ModelParams, m: int, window: float, seed: int, method: str = "occupancy", threads: int = 1
) -> Lclt2dResult:
    """Sup error of n/2 P_hat(S = x) against eta over lattice points with Mahalanobis radius <= window.

    The lattice is {(a, b) : a = b mod 2} (cell area 2), scaled by 1/sqrt(n).
    """
    if p.uniform:
        raise DomainError("the 2-D local limit check needs a finite alpha")
    a, b = sample_pair_sums(p, m, seed, method, threads)
    parity = int(np.count_nonzero((a - b) % 2))
    n, k = p.n, p.k
    ez2 = float(second_moment_Z(k, p.alpha))
    rt = math.sqrt(n)
    a0, b0 = int(a.min()), int(b.min())
    hist = np.zeros((int(a.max()) - a0 + 1, int(b.max()) - b0 + 1), dtype=np.int64)
    np.add.at(hist, (a - a0, b - b0), 1)
    # lattice points over the window's bounding box, including unseen ones
    cov = sigma_matrix(k)
    ra = window * math.sqrt(cov.matrix[0, 0]) * rt
    rb = window * math.sqrt(cov.matrix[1, 1]) * rt
    ai = np.arange(int(math.floor(n * k - ra)) - 1, int(math.ceil(n * k + ra)) + 2)
    bi = np.arange(int(math.floor(n * ez2 - rb)) - 1, int(math.ceil(n * ez2 + rb)) + 2)
    A, B = np.meshgrid(ai, bi, indexing="ij")
    x = np.stack([(A - n * k) / rt, (B - n * ez2) / rt], axis=-1)
    q = np.einsum("...i,ij,...j->...", x, cov.inverse, x)
    on = ((A - B) % 2 == 0) & (q <= window * window)
    ia, ib = A - a0, B - b0
    seen = (ia >= 0) & (ia < hist.shape[0]) & (ib >= 0) & (ib < hist.shape[1])
    counts = np.zeros(A.shape, dtype=np.int64)
    counts[seen] = hist[ia[seen], ib[seen]]
    err = np.abs(n / 2 * counts / m - eta_density(k, x))
    # first coordinate alone: unit lattice spacing, density Normal(0, k)
    ca = np.bincount(a - a0)
    xa = (np.arange(len(ca)) + a0 - n * k) / rt
    dens = np.exp(-(xa**2) / (2 * k)) / math.sqrt(2 * math.pi * k)
    inside = np.abs(xa) <= window * math.sqrt(k)
    marg = float(np.abs(rt * ca / m - dens)[inside].max())
    return Lclt2dResult(float(err[on].max()), int(on.sum()), parity, marg)


def lclt_2d_sup_error(
    p: ModelParams, m: int, window: float, seed: int, method: str = "occupancy", threads: int = 1
) -> float:
    return lclt_2d_check(p, m, window, seed, method, threads).sup_error


# ---------------------------------------------------------------------------
# concentration and the distinguishing event


def concentration_check(
    p: ModelParams, s: int, omega: float, m: int, seed: int, method: str = "occupancy", threads: int = 1
) -> EstimateWithError:
    """Fraction of draws with |sum_j D_j^s - mu_s n| < omega sqrt(n)."""
    if s not in (1, 2, 3, 4):
        raise DomainError("s must be in 1..4")
    if not p.uniform and float(p.alpha) <= 0:
        raise DomainError("alpha must be positive")
    mu = float(exact_moment(p, s))
    if s == 1:
        sums = np.full(m, p.arcs)
    else:
        sums = sample_power_sums(p, m, derive_seed(seed, 7), method, threads)[:, s - 2]
    hit = np.abs(sums - mu * p.n) < omega * math.sqrt(p.n)
    frac = float(hit.mean())
    return EstimateWithError(frac, math.sqrt(frac * (1 - frac) / m), m, f"concentration/s={s}")


class DistinguishingResult(NamedTuple):
    p_alpha: float
    p_unif: float


@dataclass(frozen=True)
class DistinguishingEvent:
    alpha: float
    omega: float
    center: float  # mu_{2,alpha} n
    half_width: float  # sqrt(omega n)
    gap: float  # |mu_{2,alpha} - mu_{2,inf}| n


def distinguishing_event(n: int, k: int, beta_exponent: float, allow_supercritical: bool = False) -> DistinguishingEvent:
    """The event |sum d_j^2 - mu_{2,alpha} n| < sqrt(omega n) with alpha = n^sigma, omega = sqrt(n)/alpha."""
    if beta_exponent >= 0.5 and not allow_supercritical:
        raise DomainError("exponent must be < 1/2 for the event to separate the models")
    alpha = float(n) ** beta_exponent
    omega = math.sqrt(n) / alpha
    p = ModelParams(n, k, alpha)
    mu_a = float(exact_moment(p, 2))
    mu_u = float(exact_moment(p.with_alpha(INFINITY), 2))
    return DistinguishingEvent(alpha, omega, mu_a * n, math.sqrt(omega * n), abs(mu_a - mu_u) * n)


def distinguishing_event_check(
    n: int,
    k: int,
    beta_exponent: float,
    m: int,
    seed: int,
    method: str = "occupancy",
    threads: int = 1,
    allow_supercritical: bool = False,
) -> DistinguishingResult:
    ev = distinguishing_event(n, k, beta_exponent, allow_supercritical)
    p = ModelParams(n, k, ev.alpha)
    xa = sample_X(p, m, derive_seed(seed, 8), method, threads)
    xu = sample_X(p.with_alpha(INFINITY), m, derive_seed(seed, 9), method, threads)
    pa = float(np.mean(np.abs(xa - ev.center) < ev.half_width))
    pu = float(np.mean(np.abs(xu - ev.center) < ev.half_width))
    return DistinguishingResult(pa, pu)


# ---------------------------------------------------------------------------
# moments by simulation


def mc_degree_moments(
    p: ModelParams, m: int, seed: int, method: str = "urn", threads: int = 1
) -> dict[str, EstimateWithError]:
    """Per-draw vertex averages of D, D^2, (D)_2 and ordered-pair averages of D_i D_j.

    Vertex averages of exchangeable coordinates are unbiased for the
    per-vertex moment; standard errors come from the spread across draws.
    ``D_1`` is the first vertex alone.
    """
    if method == "urn":
        d = sample_degrees_direct_batch(p, m, derive_seed(seed, 10), threads)
    elif method == "fixed_order":
        d = in_degrees_batch(sample_fixed_order_batch(p, m, derive_seed(seed, 10), threads=threads), p.n)
    else:
        raise DomainError(f"unknown method {method!r}")
    d = d.astype(np.float64)
    n = p.n
    s1 = d.sum(axis=1)
    s2 = (d * d).sum(axis=1)
    stats_ = {
        "D_1": d[:, 0],
        "D": s1 / n,
        "D^2": s2 / n,
        "(D)_2": (s2 - s1) / n,
        "D_i D_j": (s1 * s1 - s2) / (n * (n - 1)) if n > 1 else np.zeros(m),
    }
    out = {}
    for name, v in stats_.items():
        out[name] = EstimateWithError(float(v.mean()), float(v.std(ddof=1) / math.sqrt(m)), m, f"mc/{method}")
    return out


def exact_degree_moments(p: ModelParams) -> dict[str, float]:
    return {
        "D_1": float(exact_moment_factorial(p, 1)),
        "D": float(exact_moment_factorial(p, 1)),
        "D^2": float(exact_moment(p, 2)),
        "(D)_2": float(exact_moment_factorial(p, 2)),
        "D_i D_j": float(exact_mixed_factorial(p, 1, 1)),
    }


# ---------------------------------------------------------------------------
# goodness of fit


def _pool(expected: np.ndarray, observed: np.ndarray, min_expected: float) -> tuple[np.ndarray, np.ndarray]:
    order = np.argsort(expected, kind="stable")
    e_cells, o_cells = [], []
    e_acc = o_acc = 0.0
    for i in order:
        e_acc += expected[i]
        o_acc += observed[i]
        if e_acc >= min_expected:
            e_cells.append(e_acc)
            o_cells.append(o_acc)
            e_acc = o_acc = 0.0
    if e_acc > 0 or o_acc > 0:
        if not e_cells:
            raise PoolingError("total expected count below the pooling threshold")
        e_cells[-1] += e_acc
        o_cells[-1] += o_acc
    return np.array(e_cells), np.array(o_cells)


def chi_square_gof(
    observed: Mapping, expected: ExactDistribution | Mapping, min_expected: float = 5.0
) -> float:
    """Chi-square goodness-of-fit p-value of observed counts against an exact law.

    Cells with expected count below ``min_expected`` are pooled, smallest first.
    An observation outside the support of ``expected`` gives p = 0.
    """
    probs = expected.as_dict() if isinstance(expected, ExactDistribution) else dict(expected)
    total = sum(observed.values())
    if total <= 0:
        raise PoolingError("no observations")
    if any(c > 0 and probs.get(x, 0) == 0 for x, c in observed.items()):
        return 0.0
    keys = [x for x, q in probs.items() if q > 0]
    e = np.array([float(probs[x]) * total for x in keys])
    o = np.array([float(observed.get(x, 0)) for x in keys])
    e, o = _pool(e, o, min_expected)
    if len(e) < 2:
        return 1.0
    stat = float(((o - e) ** 2 / e).sum())
    return float(stats.chi2.sf(stat, len(e) - 1))


def chi_square_two_sample(a: Mapping, b: Mapping, min_expected: float = 5.0) -> float:
    """Chi-square homogeneity p-value for two count tables over the same categories."""
    keys = sorted(set(a) | set(b))
    ca = np.array([a.get(x, 0) for x in keys], dtype=float)
    cb = np.array([b.get(x, 0) for x in keys], dtype=float)
    na, nb = ca.sum(), cb.sum()
    pooled = (ca + cb) / (na + nb)
    # pool sparse categories on the combined expected counts
    order = np.argsort(pooled * min(na, nb), kind="stable")
    ga, gb, acc_a, acc_b, acc_e = [], [], 0.0, 0.0, 0.0
    for i in order:
        acc_a += ca[i]
        acc_b += cb[i]
        acc_e += pooled[i] * min(na, nb)
        if acc_e >= min_expected:
            ga.append(acc_a)
            gb.append(acc_b)
            acc_a = acc_b = acc_e = 0.0
    if acc_a or acc_b:
        if not ga:
            raise PoolingError("too few observations to compare")
        ga[-1] += acc_a
        gb[-1] += acc_b
    if len(ga) < 2:
        return 1.0
    table = np.array([ga, gb])
    return float(stats.chi2_contingency(table, correction=False)[1])


def counts_of(rows: np.ndarray) -> dict:
    """Frequency table of the rows of a 2-D integer array (or values of a 1-D one)."""
    rows = np.asarray(rows)
    if rows.ndim == 1:
        vals, cnt = np.unique(rows, return_counts=True)
        return {int(v): int(c) for v, c in zip(vals, cnt)}
    vals, cnt = np.unique(rows, axis=0, return_counts=True)
    return {tuple(int(x) for x in v): int(c) for v, c in zip(vals, cnt)}


class Timer:
    def __enter__(self):
        self.t0 = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.ms = (time.perf_counter() - self.t0) * 1000


def as_dict(est: EstimateWithError) -> dict:
    return asdict(est)
