import numpy as np
import pytest

from dnstein.mc import Estimate, batch_means, parallel_map, run_streams, spawn_generators, variance_ci


def test_estimate_kinds():
    e = Estimate.exact(2)
    assert e.lo == e.hi == 2 and e.halfwidth == 0 and e.kind == "exact"
    assert Estimate.bound(1).kind == "bound"


def test_batch_means_covers_truth():
    rng = np.random.default_rng(3)
    hits = 0
    for _ in range(200):
        e = batch_means(rng.exponential(size=2000))
        hits += e.lo <= 1.0 <= e.hi
    assert 0.9 <= hits / 200 <= 0.99
    with pytest.raises(ValueError):
        batch_means([])


def test_variance_ci():
    x = np.random.default_rng(4).normal(scale=2.0, size=100_000)
    e = variance_ci(x)
    assert e.lo <= 4.0 <= e.hi and e.halfwidth < 0.1


def test_streams_are_deterministic_and_thread_invariant():
    def draw(rng, k):
        return rng.normal(size=(k, 2))

    a = run_streams(draw, 11, 1003, streams=8, threads=1)
    b = run_streams(draw, 11, 1003, streams=8, threads=4)
    assert a.shape == (1003, 2) and np.array_equal(a, b)
    assert not np.array_equal(a, run_streams(draw, 12, 1003))
    g = spawn_generators(0, 3)
    assert len({x.integers(1 << 62) for x in g}) == 3
    assert parallel_map(lambda x: x * x, range(6), threads=3) == [0, 1, 4, 9, 16, 25]
