"""Independent brute-force oracles written without the package's vectorized code."""

import itertools
from fractions import Fraction
from math import comb

import numpy as np


def colouring_joint(edges, n, m, p):
    """dict (W, xi) -> probability for the recolouring pair, by plain loops."""
    nbrs = {v: [] for v in range(n)}
    for a, b in edges:
        nbrs[a].append(b)
        nbrs[b].append(a)

    def stat(col):
        M = [sum(1 for a, b in edges if col[a] == col[b] == i) for i in range(m)]
        N = [sum(1 for c in col if c == i) for i in range(m - 1)]
        return tuple(M + N)

    out = {}
    for col in itertools.product(range(m), repeat=n):
        pc = float(np.prod([p[c] for c in col]))
        w = stat(col)
        for K in range(n):
            for new in range(m):
                col2 = list(col)
                col2[K] = new
                xi = tuple(int(a - b) for a, b in zip(stat(col2), w))
                out[(w, xi)] = out.get((w, xi), 0.0) + pc * p[new] / n
    return out


def law_of_W(joint):
    out = {}
    for (w, _), pr in joint.items():
        out[w] = out.get(w, 0.0) + pr
    return out


def moments_of(law):
    pts = np.array(list(law.keys()), dtype=float)
    pr = np.array(list(law.values()))
    mu = pr @ pts
    dev = pts - mu
    return mu, (dev * pr[:, None]).T @ dev


def mineka_tail_exact(m, k_max=None):
    """P[tau > m] for the lazy walk with up = down = 1/4: the number of real
    moves is Bin(m, 1/2) and a simple walk of k steps stays <= 0 with
    probability C(k, floor(k/2)) / 2^k (reflection principle)."""
    total = Fraction(0)
    for k in range(m + 1):
        total += Fraction(comb(m, k), 2**m) * Fraction(comb(k, k // 2), 2**k)
    return total


def mineka_tail_log(m):
    """Same quantity in floating point through log-binomials, for large m."""
    from scipy.special import gammaln

    k = np.arange(m + 1)
    lb = gammaln(m + 1) - gammaln(k + 1) - gammaln(m - k + 1) - m * np.log(2)
    lc = gammaln(k + 1) - gammaln(k // 2 + 1) - gammaln(k - k // 2 + 1) - k * np.log(2)
    return float(np.exp(lb + lc).sum())
