"""Seeded parallel Monte Carlo helpers: independent streams, ordered parallel
map, batch-means confidence intervals."""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy import stats

DEFAULT_BATCHES = 50


@dataclass(frozen=True)
class Estimate:
    """A number with provenance: ``exact``, ``ci`` (95% interval) or ``bound``."""

    value: float
    lo: float
    hi: float
    kind: str = "exact"

    @classmethod
    def exact(cls, value):
        v = float(value)
        return cls(v, v, v, "exact")

    @classmethod
    def bound(cls, value):
        v = float(value)
        return cls(v, v, v, "bound")

    @property
    def halfwidth(self):
        return 0.5 * (self.hi - self.lo)

    def as_dict(self):
        return {"value": self.value, "lo": self.lo, "hi": self.hi, "kind": self.kind}


def batch_means(samples, n_batches: int = DEFAULT_BATCHES, level: float = 0.95) -> Estimate:
    """Mean of ``samples`` with a batch-means t-interval."""
    x = np.asarray(samples, dtype=float).ravel()
    n = len(x)
    if n == 0:
        raise ValueError("no samples")
    k = min(n_batches, n)
    size = n // k
    means = x[: k * size].reshape(k, size).mean(axis=1)
    centre = float(x.mean())
    if k < 2:
        return Estimate(centre, -np.inf, np.inf, "ci")
    half = stats.t.ppf(0.5 + level / 2, k - 1) * means.std(ddof=1) / np.sqrt(k)
    return Estimate(centre, centre - half, centre + half, "ci")


def variance_ci(samples, level: float = 0.95) -> Estimate:
    """Sample variance of iid replicates with a CI from the delta method on
    the fourth central moment (large-sample normal interval)."""
    x = np.asarray(samples, dtype=float).ravel()
    n = len(x)
    if n < 4:
        raise ValueError("need at least four replicates")
    dev = x - x.mean()
    v = float(dev.var(ddof=1))
    m4 = float((dev**4).mean())
    se = np.sqrt(max(m4 - v * v, 0.0) / n)
    z = stats.norm.ppf(0.5 + level / 2)
    return Estimate(v, max(0.0, v - z * se), v + z * se, "ci")


def spawn_generators(seed, k: int):
    """``k`` statistically independent generators derived from one seed."""
    ss = np.random.SeedSequence(seed)
    return [np.random.default_rng(s) for s in ss.spawn(k)]


def parallel_map(func, items, threads: int = 1):
    """``list(map(func, items))`` with results in input order."""
    items = list(items)
    if threads <= 1 or len(items) <= 1:
        return [func(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(func, items))


def run_streams(func, seed, total: int, streams: int = 8, threads: int = 1):
    """Split ``total`` replicates over independent seeded streams and
    concatenate the per-stream outputs in stream order.

    ``func(rng, count)`` must return an array with ``count`` leading rows.
    """
    gens = spawn_generators(seed, streams)
    counts = [total // streams + (1 if i < total % streams else 0) for i in range(streams)]
    parts = parallel_map(lambda gc: func(gc[0], gc[1]), list(zip(gens, counts)), threads)
    return np.concatenate([p for p, c in zip(parts, counts) if c > 0])
