"""Regular graphs: deterministic circulants and configuration-model samples."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

PAIRING_RETRIES = 1000


class GraphError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class Graph:
    n: int
    edges: np.ndarray  # (E, 2), u < v
    neighbours: np.ndarray  # (n, r)
    kind: str = "circulant"

    @property
    def r(self) -> int:
        return self.neighbours.shape[1]

    @property
    def degrees(self):
        return np.bincount(self.edges.ravel(), minlength=self.n)

    def __repr__(self):
        return f"Graph(n={self.n}, r={self.r}, kind={self.kind!r})"


def from_edges(n, edges, kind="custom") -> Graph:
    edges = np.sort(np.asarray(edges, dtype=np.int64), axis=1)
    edges = edges[np.lexsort((edges[:, 1], edges[:, 0]))]
    deg = np.bincount(edges.ravel(), minlength=n)
    if len(set(deg.tolist())) != 1:
        raise GraphError(f"graph is not regular: degrees {sorted(set(deg.tolist()))}")
    r = int(deg[0])
    nb = [[] for _ in range(n)]
    for u, v in edges.tolist():
        nb[u].append(v)
        nb[v].append(u)
    return Graph(n, edges, np.array([sorted(x) for x in nb], dtype=np.int64).reshape(n, r), kind)


def circulant(n: int, r: int) -> Graph:
    """Vertex i adjacent to i +- 1..r//2, plus the antipode i + n/2 when r is odd."""
    offsets = list(range(1, r // 2 + 1))
    if r % 2:
        if n % 2:
            raise GraphError("odd degree needs an even number of vertices")
        offsets.append(n // 2)
    edges = set()
    for i in range(n):
        for k in offsets:
            j = (i + k) % n
            edges.add((min(i, j), max(i, j)))
    return from_edges(n, sorted(edges), "circulant")


def pairing(n: int, r: int, rng) -> Graph:
    """Configuration model with rejection of loops and multi-edges."""
    stubs = np.repeat(np.arange(n), r)
    for _ in range(PAIRING_RETRIES):
        perm = rng.permutation(stubs).reshape(-1, 2)
        if np.any(perm[:, 0] == perm[:, 1]):
            continue
        e = np.sort(perm, axis=1)
        if len(np.unique(e, axis=0)) < len(e):
            continue
        return from_edges(n, e, "pairing")
    raise GraphError(f"no simple {r}-regular pairing on {n} vertices after {PAIRING_RETRIES} tries")


def regular_graph(n: int, r: int, kind: str = "circulant", seed=None) -> Graph:
    if n * r % 2:
        raise GraphError("n * r must be even")
    if not 0 < r < n:
        raise GraphError("need 0 < r < n")
    if kind == "circulant":
        return circulant(n, r)
    if kind == "pairing":
        return pairing(n, r, np.random.default_rng(seed))
    raise GraphError(f"unknown graph kind {kind!r}")


def complete(n: int) -> Graph:
    return circulant(n, n - 1)


def cycle(n: int) -> Graph:
    return circulant(n, 2)
