"""Exact samplers for power sums of degree sequences, working on the degree histogram.

Every statistic used by the Monte Carlo layer (sums of ``d_j^t``) depends on a
degree sequence only through its histogram ``N_c = #{j : d_j = c}``.

For IID ``Z_1..Z_n`` the histogram is multinomial(n; p_0, p_1, ...). The
in-degree sequence of the alpha-model is that IID vector conditioned on
``sum Z_j = kn`` (negative binomial Z; Poisson for the uniform model), so its
histogram is the multinomial conditioned on ``sum c N_c = kn``. We sample the
conditioned law by rejection: pick a pair of adjacent values ``(c0, c0 + 1)``,
draw all other cells and the pair total ``R`` from the multinomial, solve the
constraint for ``N_{c0+1}``, and accept with probability proportional to its
Binomial(R, q) mass. The cost per draw is O(number of cells), independent of n.

The acceptance constant bounds the binomial mode mass for every ``R`` at or
above 40 standard deviations below its mean; a proposal below that (probability
far under 1e-300) is accepted with probability clipped at 1 and counted in
``clipped``.
"""

from __future__ import annotations

import math

import numpy as np
from scipy import stats

from .model import DomainError, ModelParams
from .samplers import CHUNK, SampleBatch, chunk_generator, map_chunks

_TAIL_EPS = 1e-18


def degree_distribution(k: int, alpha) -> stats.rv_discrete:
    """Law of one IID summand: negative binomial (shape alpha, mean k), or Poisson(k)."""
    from .model import INFINITY

    if alpha is INFINITY:
        return stats.poisson(k)
    a = float(alpha)
    return stats.nbinom(a, a / (a + k))


class _Cells:
    def __init__(self, k: int, alpha, extra: int = 0):
        self.dist = degree_distribution(k, alpha)
        top = max(int(math.ceil(self.dist.mean())) + 2, 4 + extra)
        while self.dist.logsf(top - 1) > math.log(_TAIL_EPS):
            top += 1
        self.values = np.arange(top, dtype=np.int64)
        self.pmf = self.dist.pmf(self.values)
        self.tail = float(self.dist.sf(top - 1))
        self.top = top

    def draw_tail(self, rng: np.random.Generator, count: int) -> np.ndarray:
        """Draw ``count`` values from the law conditioned on value >= top."""
        log_tail = float(self.dist.logsf(self.top - 1))
        out = np.empty(count, dtype=np.int64)
        for i, u in enumerate(rng.random(count)):
            target = math.log(u) + log_tail
            c, acc = self.top, float(self.dist.logpmf(self.top))
            while acc < target:
                c += 1
                acc = float(np.logaddexp(acc, self.dist.logpmf(c)))
            out[i] = c
        return out


def _add_tail(rng, cells: _Cells, tail_counts: np.ndarray, sums: list[np.ndarray]) -> None:
    for row in np.flatnonzero(tail_counts):
        vals = cells.draw_tail(rng, int(tail_counts[row]))
        for t, s in enumerate(sums, start=1):
            s[row] += int((vals**t).sum())


class ConditionedOccupancySampler:
    """Power sums (s2, s3, s4) of the in-degree sequence of M_{n,k}^alpha."""

    def __init__(self, p: ModelParams):
        self.p = p
        cells = _Cells(p.k, p.alpha)
        self.cells = cells
        pmf = cells.pmf
        # pair (c0, c0+1) maximising the binomial spread, hence the acceptance rate
        spread = pmf[:-1] * pmf[1:] / (pmf[:-1] + pmf[1:])
        c0 = int(np.argmax(spread))
        self.c0 = c0
        self.q = float(pmf[c0 + 1] / (pmf[c0] + pmf[c0 + 1]))
        others = [c for c in range(cells.top) if c not in (c0, c0 + 1)]
        self.others = np.array(others, dtype=np.int64)
        probs = np.concatenate([pmf[others], [cells.tail], [pmf[c0] + pmf[c0 + 1]]])
        self.pvals = probs / probs.sum()
        n = p.n
        r_mean = n * self.pvals[-1]
        r_sd = math.sqrt(n * self.pvals[-1] * (1 - self.pvals[-1]))
        r_lo = max(0, int(math.floor(r_mean - 40 * r_sd)))
        # the largest Binomial(R, q) mass is non-increasing in R, because
        # b(j; R+1) = q b(j-1; R) + (1-q) b(j; R); so R = r_lo attains the bound
        modes = np.arange(max(0, int((r_lo + 1) * self.q) - 1), min(r_lo, int((r_lo + 1) * self.q) + 1) + 1)
        self.log_k = float(stats.binom.logpmf(modes, r_lo, self.q).max())
        self.r_lo = r_lo
        self.clipped = 0
        self.proposals = 0
        self.accepted = 0

    def _propose(self, rng: np.random.Generator, rows: int):
        p = self.p
        counts = rng.multinomial(p.n, self.pvals, size=rows)
        n_other = counts[:, : len(self.others)]
        tail = counts[:, len(self.others)]
        r = counts[:, -1]
        sums = [n_other @ self.others**t for t in (1, 2, 3, 4)]
        if tail.any():
            _add_tail(rng, self.cells, tail, sums)
        c0 = self.c0
        hi = p.arcs - c0 * r - sums[0]
        ok = (hi >= 0) & (hi <= r)
        log_acc = np.full(rows, -np.inf)
        log_acc[ok] = stats.binom.logpmf(hi[ok], r[ok], self.q) - self.log_k
        self.clipped += int(((log_acc > 0) & (r < self.r_lo)).sum())
        accept = np.log(rng.random(rows)) < log_acc
        self.proposals += rows
        self.accepted += int(accept.sum())
        lo = r - hi
        out = []
        for t in (2, 3, 4):
            out.append((sums[t - 1] + lo * c0**t + hi * (c0 + 1) ** t)[accept])
        return out

    def sample_chunk(self, rng: np.random.Generator, count: int) -> np.ndarray:
        """Array of shape (count, 3) holding s2, s3, s4 per draw."""
        got: list[np.ndarray] = []
        have = 0
        rows = max(256, count)
        while have < count:
            s2, s3, s4 = self._propose(rng, rows)
            got.append(np.stack([s2, s3, s4], axis=1))
            have += len(s2)
        return np.concatenate(got, axis=0)[:count]

    def acceptance_rate(self) -> float:
        return float("nan") if not self.proposals else self.accepted / self.proposals


def sample_power_sums(p: ModelParams, count: int, seed: int, threads: int = 1) -> np.ndarray:
    """``count`` draws of (s2, s3, s4) for the in-degree sequence of M_{n,k}^alpha.

    Works for finite alpha and for the uniform model. Returns int64 array (count, 3).
    """
    sampler = ConditionedOccupancySampler(p)
    batch = SampleBatch(p, count, seed)

    def one(c: int) -> np.ndarray:
        return sampler.sample_chunk(chunk_generator(seed, "occupancy_conditioned", c), CHUNK)

    return np.concatenate(map_chunks(one, batch.n_chunks, threads), axis=0)[:count]


def sample_sum_pairs(p: ModelParams, terms: int, count: int, seed: int, threads: int = 1):
    """``count`` draws of (sum Z_j, sum Z_j^2) over ``terms`` IID summands, no conditioning."""
    if terms < 1:
        raise DomainError("need at least one summand")
    cells = _Cells(p.k, p.alpha)
    order = np.argsort(cells.pmf)  # largest cell last absorbs rounding
    values = cells.values[order]
    pvals = np.concatenate([[cells.tail], cells.pmf[order]])
    pvals = pvals / pvals.sum()
    batch = SampleBatch(p, count, seed)

    def one(c: int):
        rng = chunk_generator(seed, "occupancy_iid", c)
        counts = rng.multinomial(terms, pvals, size=CHUNK)
        tail = counts[:, 0]
        cnt = counts[:, 1:]
        sums = [cnt @ values, cnt @ values**2]
        if tail.any():
            _add_tail(rng, cells, tail, sums)
        return np.stack(sums, axis=1)

    out = np.concatenate(map_chunks(one, batch.n_chunks, threads), axis=0)[:count]
    return out[:, 0], out[:, 1]
