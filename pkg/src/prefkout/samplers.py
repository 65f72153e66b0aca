"""Generators for the preferential-attachment k-out mapping and the uniform mapping.

Every sampler takes its randomness from an explicit seed. Single-draw functions
take an :class:`RngSeed`; batch functions take a master seed and split it into
fixed-size chunks, each with its own counter-based stream, so replicate ``i`` is
a function of ``(seed, i)`` alone and never of the batch size or worker count.

Target selection uses composition: at step ``t`` (``t`` arcs already placed)
draw a uniform vertex with probability ``alpha*n / (alpha*n + t)``, otherwise
copy the target of a uniformly chosen earlier arc. The resulting law is
``(alpha + d_j) / (alpha*n + t)``. ``method="cumulative"`` selects the target
from explicit cumulative weights instead and exists as a cross-check.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, TypeVar

import numpy as np

from .model import DomainError, InDegreeSequence, KOutDigraph, ModelParams

CHUNK = 8192
"""Replicates per RNG stream in batch sampling."""

T = TypeVar("T")

_ROUTE_TAGS = {
    "fixed_order": 1,
    "random_order": 2,
    "uniform": 3,
    "degrees_direct": 4,
    "z_pairs": 5,
    "occupancy_conditioned": 6,
    "occupancy_iid": 7,
}


@dataclass(frozen=True)
class RngSeed:
    seed: int
    stream: int = 0

    def __post_init__(self) -> None:
        for name in ("seed", "stream"):
            v = getattr(self, name)
            if not 0 <= int(v) < 2**64:
                raise DomainError(f"{name} must be a 64-bit unsigned integer, got {v}")

    def generator(self) -> np.random.Generator:
        ss = np.random.SeedSequence(int(self.seed), spawn_key=(int(self.stream),))
        return np.random.Generator(np.random.Philox(ss))


def chunk_generator(seed: int, route: str, chunk: int) -> np.random.Generator:
    ss = np.random.SeedSequence(int(seed), spawn_key=(_ROUTE_TAGS[route], int(chunk)))
    return np.random.Generator(np.random.Philox(ss))


@dataclass(frozen=True)
class SampleBatch:
    params: ModelParams
    count: int
    seed: int

    def __post_init__(self) -> None:
        if self.count < 1:
            raise DomainError("batch count must be positive")

    @property
    def n_chunks(self) -> int:
        return -(-self.count // CHUNK)


def map_chunks(fn: Callable[[int], T], n_chunks: int, threads: int = 1) -> list[T]:
    """Evaluate ``fn`` on chunk indices, returning results in chunk order."""
    if threads <= 1 or n_chunks <= 1:
        return [fn(i) for i in range(n_chunks)]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, range(n_chunks)))


def _finite_alpha(p: ModelParams) -> float:
    if p.uniform:
        raise DomainError("this sampler needs a finite alpha")
    return float(p.alpha)


def _floor_index(u: np.ndarray, bound) -> np.ndarray:
    """floor(u * bound) clamped below bound (guards float rounding at u -> 1)."""
    idx = (u * bound).astype(np.int64)
    return np.minimum(idx, np.asarray(bound, dtype=np.int64) - 1)


# ---------------------------------------------------------------------------
# single draws


class _Fenwick:
    """Cumulative weights alpha + d_j with O(log n) update and search."""

    def __init__(self, n: int, alpha: float):
        self.n = n
        self.tree = [0.0] * (n + 1)
        for i in range(1, n + 1):
            self.tree[i] += alpha
            j = i + (i & -i)
            if j <= n:
                self.tree[j] += self.tree[i]
        self.top = 1 << (n.bit_length() - 1)

    def add(self, i: int, w: float) -> None:
        i += 1
        while i <= self.n:
            self.tree[i] += w
            i += i & -i

    def find(self, x: float) -> int:
        """Smallest 0-based index whose prefix weight exceeds x."""
        pos, step = 0, self.top
        while step:
            nxt = pos + step
            if nxt <= self.n and self.tree[nxt] <= x:
                pos = nxt
                x -= self.tree[nxt]
            step >>= 1
        return min(pos, self.n - 1)


class _TargetPicker:
    def __init__(self, p: ModelParams, rng: np.random.Generator, method: str):
        if method not in ("composition", "cumulative"):
            raise DomainError(f"unknown method {method!r}")
        self.n = p.n
        self.a = _finite_alpha(p)
        self.rng = rng
        self.method = method
        self.placed: list[int] = []
        if method == "cumulative":
            self.fenwick = _Fenwick(p.n, self.a)

    def pick(self) -> int:
        t = len(self.placed)
        an = self.a * self.n
        u, v = self.rng.random(2)
        if self.method == "composition":
            if u * (an + t) < an:
                j = min(int(v * self.n), self.n - 1)
            else:
                j = self.placed[min(int(v * t), t - 1)]
        else:
            j = self.fenwick.find(u * (an + t))
            self.fenwick.add(j, 1.0)
        self.placed.append(j)
        return j


def sample_fixed_order(p: ModelParams, r: RngSeed, method: str = "composition") -> KOutDigraph:
    """Vertex 1 places arcs 1..k, then vertex 2, and so on."""
    picker = _TargetPicker(p, r.generator(), method)
    targets = [picker.pick() for _ in range(p.arcs)]
    return KOutDigraph(p, np.array(targets, dtype=np.int64))


def sample_random_order(p: ModelParams, r: RngSeed, method: str = "composition") -> KOutDigraph:
    """The deciding vertex at each step is uniform over vertices with out-degree below k."""
    rng = r.generator()
    picker = _TargetPicker(p, rng, method)
    pool = list(range(p.n))
    outdeg = [0] * p.n
    targets = np.empty((p.n, p.k), dtype=np.int64)
    for _ in range(p.arcs):
        i = min(int(rng.random() * len(pool)), len(pool) - 1)
        v = pool[i]
        targets[v, outdeg[v]] = picker.pick()
        outdeg[v] += 1
        if outdeg[v] == p.k:
            pool[i] = pool[-1]
            pool.pop()
    return KOutDigraph(p, targets)


def sample_uniform(p: ModelParams, r: RngSeed) -> KOutDigraph:
    return KOutDigraph(p, r.generator().integers(0, p.n, size=p.arcs))


def sample_degrees_direct(p: ModelParams, r: RngSeed) -> InDegreeSequence:
    """Sequential urn on the in-degree counts; no arc list is kept."""
    rng = r.generator()
    if p.uniform:
        return InDegreeSequence(rng.multinomial(p.arcs, np.full(p.n, 1.0 / p.n)))
    a = _finite_alpha(p)
    fenwick = _Fenwick(p.n, a)
    counts = np.zeros(p.n, dtype=np.int64)
    for t, u in enumerate(rng.random(p.arcs)):
        j = fenwick.find(u * (a * p.n + t))
        fenwick.add(j, 1.0)
        counts[j] += 1
    return InDegreeSequence(counts)


def sample_iid_Z_pairs(p: ModelParams, count: int, r: RngSeed) -> tuple[np.ndarray, np.ndarray]:
    """IID negative-binomial Z (shape alpha, mean k) via the Gamma-Poisson mixture; returns (Z, Z^2).

    For ``alpha = INFINITY`` Z is Poisson(k).
    """
    rng = r.generator()
    if p.uniform:
        z = rng.poisson(p.k, size=count)
    else:
        a = float(p.alpha)
        z = rng.poisson(rng.gamma(a, p.k / a, size=count))
    z = z.astype(np.int64)
    return z, z * z


# ---------------------------------------------------------------------------
# vectorised batches: one chunk of CHUNK replicates per stream


def _composition_chunk(rng: np.random.Generator, n: int, kn: int, a: float, rows: int) -> np.ndarray:
    arcs = np.zeros((rows, kn), dtype=np.int64)
    u = rng.random((rows, kn))
    v = rng.random((rows, kn))
    an = a * n
    ridx = np.arange(rows)
    for t in range(kn):
        fresh = _floor_index(v[:, t], n)
        if t == 0:
            arcs[:, 0] = fresh
            continue
        copied = arcs[ridx, _floor_index(v[:, t], t)]
        arcs[:, t] = np.where(u[:, t] * (an + t) < an, fresh, copied)
    return arcs


def _cumulative_chunk(rng: np.random.Generator, n: int, kn: int, a: float, rows: int) -> np.ndarray:
    arcs = np.zeros((rows, kn), dtype=np.int64)
    counts = np.zeros((rows, n), dtype=np.float64)
    u = rng.random((rows, kn))
    ridx = np.arange(rows)
    for t in range(kn):
        cum = np.cumsum(a + counts, axis=1)
        x = u[:, t] * (a * n + t)
        j = np.minimum((cum <= x[:, None]).sum(axis=1), n - 1)
        counts[ridx, j] += 1
        arcs[:, t] = j
    return arcs


def _pick_chunk(method: str):
    if method == "composition":
        return _composition_chunk
    if method == "cumulative":
        return _cumulative_chunk
    raise DomainError(f"unknown method {method!r}")


def _run_batch(batch: SampleBatch, route: str, chunk_fn, threads: int) -> np.ndarray:
    def one(c: int) -> np.ndarray:
        return chunk_fn(chunk_generator(batch.seed, route, c))

    parts = map_chunks(one, batch.n_chunks, threads)
    return np.concatenate(parts, axis=0)[: batch.count]


def sample_fixed_order_batch(
    p: ModelParams, count: int, seed: int, method: str = "composition", threads: int = 1
) -> np.ndarray:
    """``count`` fixed-order digraphs as an int array of shape (count, n, k), 0-based."""
    a = _finite_alpha(p)
    fn = _pick_chunk(method)
    out = _run_batch(
        SampleBatch(p, count, seed), "fixed_order", lambda rng: fn(rng, p.n, p.arcs, a, CHUNK), threads
    )
    return out.reshape(count, p.n, p.k)


def _random_order_chunk(rng: np.random.Generator, n: int, k: int, a: float, rows: int) -> np.ndarray:
    kn = n * k
    targets = np.zeros((rows, n * k), dtype=np.int64)
    placed = np.zeros((rows, kn), dtype=np.int64)
    pool = np.tile(np.arange(n, dtype=np.int64), (rows, 1))
    size = np.full(rows, n, dtype=np.int64)
    outdeg = np.zeros((rows, n), dtype=np.int64)
    w = rng.random((rows, kn))
    u = rng.random((rows, kn))
    v = rng.random((rows, kn))
    an = a * n
    ridx = np.arange(rows)
    for t in range(kn):
        i = _floor_index(w[:, t], size)
        vert = pool[ridx, i]
        fresh = _floor_index(v[:, t], n)
        if t == 0:
            j = fresh
        else:
            copied = placed[ridx, _floor_index(v[:, t], t)]
            j = np.where(u[:, t] * (an + t) < an, fresh, copied)
        placed[:, t] = j
        slot = outdeg[ridx, vert]
        targets[ridx, vert * k + slot] = j
        outdeg[ridx, vert] = slot + 1
        full = slot + 1 == k
        if full.any():
            rf = ridx[full]
            pool[rf, i[full]] = pool[rf, size[full] - 1]
            size[full] -= 1
    return targets


def sample_random_order_batch(p: ModelParams, count: int, seed: int, threads: int = 1) -> np.ndarray:
    a = _finite_alpha(p)
    out = _run_batch(
        SampleBatch(p, count, seed),
        "random_order",
        lambda rng: _random_order_chunk(rng, p.n, p.k, a, CHUNK),
        threads,
    )
    return out.reshape(count, p.n, p.k)


def sample_uniform_batch(p: ModelParams, count: int, seed: int, threads: int = 1) -> np.ndarray:
    out = _run_batch(
        SampleBatch(p, count, seed),
        "uniform",
        lambda rng: rng.integers(0, p.n, size=(CHUNK, p.arcs)),
        threads,
    )
    return out.reshape(count, p.n, p.k)


def _urn_counts_chunk(rng: np.random.Generator, n: int, kn: int, a: float, rows: int) -> np.ndarray:
    counts = np.zeros((rows, n), dtype=np.int64)
    u = rng.random((rows, kn))
    ridx = np.arange(rows)
    for t in range(kn):
        cum = np.cumsum(a + counts, axis=1)
        j = np.minimum((cum <= (u[:, t] * (a * n + t))[:, None]).sum(axis=1), n - 1)
        counts[ridx, j] += 1
    return counts


def sample_degrees_direct_batch(p: ModelParams, count: int, seed: int, threads: int = 1) -> np.ndarray:
    """``count`` in-degree sequences, shape (count, n), by the sequential urn on counts.

    The uniform model draws multinomial(kn; 1/n, ..., 1/n) rows.
    """
    if p.uniform:
        probs = np.full(p.n, 1.0 / p.n)
        fn = lambda rng: rng.multinomial(p.arcs, probs, size=CHUNK)  # noqa: E731
    else:
        a = float(p.alpha)
        fn = lambda rng: _urn_counts_chunk(rng, p.n, p.arcs, a, CHUNK)  # noqa: E731
    return _run_batch(SampleBatch(p, count, seed), "degrees_direct", fn, threads)


def in_degrees_batch(targets: np.ndarray, n: int) -> np.ndarray:
    """Row-wise in-degree counts for an array of shape (count, n, k)."""
    count = targets.shape[0]
    flat = targets.reshape(count, -1) + n * np.arange(count)[:, None]
    return np.bincount(flat.ravel(), minlength=count * n).reshape(count, n)


def sample_iid_Z_pairs_batch(p: ModelParams, count: int, seed: int, threads: int = 1):
    """Batch form of :func:`sample_iid_Z_pairs` with the chunked stream contract."""

    def fn(rng: np.random.Generator) -> np.ndarray:
        if p.uniform:
            return rng.poisson(p.k, size=CHUNK)
        a = float(p.alpha)
        return rng.poisson(rng.gamma(a, p.k / a, size=CHUNK))

    z = _run_batch(SampleBatch(p, count, seed), "z_pairs", fn, threads).astype(np.int64)
    return z, z * z


def degree_sequence_keys(rows: np.ndarray) -> list[tuple[int, ...]]:
    return [tuple(int(x) for x in r) for r in rows]


def derive_seed(seed: int, *labels: int) -> int:
    """Independent 64-bit seed for a labelled sub-experiment of ``seed``."""
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(int(x) for x in labels))
    return int(ss.generate_state(1, np.uint64)[0])
