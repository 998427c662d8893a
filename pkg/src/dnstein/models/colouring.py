"""Monochrome-edge counts of random colourings of a regular graph.

W = (M_1..M_m, N_1..N_{m-1}) where N_i counts vertices of colour i and M_i
counts edges with both ends coloured i.  The pair resamples the colour of a
uniformly chosen vertex.  Colours are 0-based internally.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from math import factorial

import numpy as np
from scipy import sparse

from ..lattice import LatticePmf
from ..mc import Estimate, batch_means, run_streams, variance_ci
from ..matrixcore import spectral_norm
from ..pairs import (DiagnosticsReport, PairLaw, _condition_flags, assemble_u, find_chains,
                     lyapunov_ratio, standardize, z_parameters)
from .graphs import Graph

ENUMERATION_CAP = 2**22
_CHUNK = 1 << 16


def _check_p(p, m):
    p = np.asarray(p, dtype=float)
    if p.shape != (m,) or np.any(p <= 0) or abs(p.sum() - 1) > 1e-12:
        raise ValueError("p must be a strictly positive probability vector of length m")
    return p


def colouring_A_matrix(m: int, r: int, p) -> np.ndarray:
    """The exact regression matrix of the recolouring pair."""
    if m < 2:
        raise ValueError("need m >= 2")
    p = _check_p(p, m)
    d = 2 * m - 1
    A = np.zeros((d, d))
    for l in range(m - 1):
        A[l, l] = -2.0
        A[l, l + m] = r * p[l]
    A[m - 1, m - 1] = -2.0
    for t in range(m - 1):
        A[m - 1, m + t] = -r * p[m - 1]
    for l in range(m, d):
        A[l, l] = -1.0
    return A


def colouring_mean(n: int, r: int, p) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    return np.concatenate([n * r * p**2 / 2, n * p[:-1]])


def colouring_covariance(n: int, r: int, p) -> np.ndarray:
    """Closed-form Cov(W) for any r-regular graph on n vertices."""
    p = np.asarray(p, dtype=float)
    m = len(p)
    d = 2 * m - 1
    C = np.zeros((d, d))
    for i in range(m):
        for l in range(m):
            if i == l:
                C[i, i] = 0.5 * n * r * p[i] ** 2 * (1 - p[i]) * (1 + (2 * r - 1) * p[i])
            else:
                C[i, l] = -0.5 * n * r * (2 * r - 1) * p[i] ** 2 * p[l] ** 2
    for i in range(m):
        for l in range(m - 1):
            v = n * r * p[i] ** 2 * (1 - p[i]) if i == l else -n * r * p[i] ** 2 * p[l]
            C[i, m + l] = C[m + l, i] = v
    for i in range(m - 1):
        for l in range(m - 1):
            C[m + i, m + l] = n * p[i] * (1 - p[i]) if i == l else -n * p[i] * p[l]
    return C


def colouring_sigma2(r: int, p, listed_variant: bool = False) -> np.ndarray:
    """E{xi xi^T} for the recolouring pair.

    ``listed_variant=True`` reproduces the published entry list, whose
    E xi_{m+l}^2 = 2 p_l disagrees with exact enumeration (2 p_l (1 - p_l)).
    """
    p = np.asarray(p, dtype=float)
    m = len(p)
    d = 2 * m - 1
    S = np.zeros((d, d))
    for l in range(m):
        for k in range(m):
            if l == k:
                S[l, l] = 2 * p[l] ** 2 * (1 - p[l]) * (r * (r - 1) * p[l] + r)
            else:
                S[l, k] = -2 * r * (r - 1) * p[l] ** 2 * p[k] ** 2
        for k in range(m - 1):
            v = 2 * r * p[l] ** 2 * (1 - p[l]) if l == k else -2 * r * p[l] ** 2 * p[k]
            S[l, m + k] = S[m + k, l] = v
    for l in range(m - 1):
        for k in range(m - 1):
            if l == k:
                S[m + l, m + l] = 2 * p[l] if listed_variant else 2 * p[l] * (1 - p[l])
            else:
                S[m + l, m + k] = -2 * p[l] * p[k]
    return S


# ---------------------------------------------------------------------------
# local vertex types

def neighbour_profiles(m: int, r: int) -> list:
    """T_{m,r}: all m-tuples of nonnegative integers summing to r."""
    return [t for t in itertools.product(range(r + 1), repeat=m) if sum(t) == r]


def type_jump(m: int, old: int, t, new: int) -> np.ndarray:
    """xi produced by recolouring a vertex of colour ``old`` with neighbour
    colour counts ``t`` to colour ``new``."""
    J = np.zeros(2 * m - 1, dtype=np.int64)
    if new == old:
        return J
    J[new] += t[new]
    J[old] -= t[old]
    if new < m - 1:
        J[m + new] += 1
    if old < m - 1:
        J[m + old] -= 1
    return J


@dataclass(frozen=True, eq=False)
class TypeTable:
    """Vertex types (colour, neighbour profile) and their jump distributions."""

    m: int
    r: int
    p: np.ndarray
    profiles: list
    jumps: np.ndarray  # (M, d), lexicographically sorted
    weight: np.ndarray  # (T, M): sum_{c'} p_{c'} I[J(type, c') = J]
    type_prob: np.ndarray  # (T,) P[vertex type] for iid colours
    q: np.ndarray  # (M,)
    code_to_profile: np.ndarray  # profile index by base-(r+1) code of the counts

    def type_index(self, colour, counts):
        """Type index from vertex colour (N,) and neighbour counts (N, m)."""
        radix = (self.r + 1) ** np.arange(self.m - 1, -1, -1)
        return colour * len(self.profiles) + self.code_to_profile[counts @ radix]


def type_table(m: int, r: int, p) -> TypeTable:
    p = _check_p(p, m)
    profiles = neighbour_profiles(m, r)
    rows = []
    for old in range(m):
        for t in profiles:
            for new in range(m):
                rows.append((old, t, new, type_jump(m, old, t, new)))
    jumps = np.unique(np.array([row[3] for row in rows]), axis=0)
    index = {tuple(J.tolist()): k for k, J in enumerate(jumps)}
    T = m * len(profiles)
    weight = np.zeros((T, len(jumps)))
    tp = np.zeros(T)
    for old in range(m):
        for k, t in enumerate(profiles):
            ti = old * len(profiles) + k
            multinom = factorial(r) / np.prod([factorial(x) for x in t])
            tp[ti] = p[old] * multinom * np.prod(p ** np.array(t))
            for new in range(m):
                weight[ti, index[tuple(type_jump(m, old, t, new).tolist())]] += p[new]
    q = tp @ weight
    keep = q > 0
    radix = (r + 1) ** np.arange(m - 1, -1, -1)
    code = np.full((r + 1) ** m, -1, dtype=np.int64)
    for k, t in enumerate(profiles):
        code[int(np.dot(t, radix))] = k
    return TypeTable(m, r, p, profiles, jumps[keep], weight[:, keep], tp, q[keep], code)


def colouring_jump_law(m: int, r: int, p) -> LatticePmf:
    """Exact L(xi); it does not depend on the graph beyond r."""
    tt = type_table(m, r, p)
    return LatticePmf(tt.jumps, tt.q)


# ---------------------------------------------------------------------------
# the model

def enumerate_colourings(n: int, m: int, start: int = 0, stop: int | None = None) -> np.ndarray:
    """Colourings with indices in [start, stop) of all m^n, as base-m digits."""
    stop = m**n if stop is None else stop
    idx = np.arange(start, stop, dtype=np.int64)
    powers = m ** np.arange(n, dtype=np.int64)
    return ((idx[:, None] // powers[None, :]) % m).astype(np.int8)


def colouring_stats(C: np.ndarray, graph: Graph, m: int) -> np.ndarray:
    """W for each row of the colouring array C (S, n)."""
    a, b = graph.edges[:, 0], graph.edges[:, 1]
    ca, cb = C[:, a], C[:, b]
    mono = ca == cb
    M = np.stack([(mono & (ca == i)).sum(axis=1) for i in range(m)], axis=1)
    N = np.stack([(C == i).sum(axis=1) for i in range(m - 1)], axis=1)
    return np.concatenate([M, N], axis=1).astype(np.int64)


def neighbour_counts(C: np.ndarray, graph: Graph, m: int, vertex) -> np.ndarray:
    """(S, m) colour counts among the neighbours of ``vertex`` (scalar or (S,))."""
    nb = graph.neighbours[vertex]
    cols = C[np.arange(len(C))[:, None], nb] if np.ndim(vertex) else C[:, nb]
    return np.stack([(cols == i).sum(axis=1) for i in range(m)], axis=1)


def recolour_jump(C, graph: Graph, m: int, K, new) -> np.ndarray:
    """xi for recolouring vertex K (per row) to colour ``new``; O(r) per row."""
    S = len(C)
    K = np.broadcast_to(np.asarray(K), (S,))
    new = np.broadcast_to(np.asarray(new), (S,))
    old = C[np.arange(S), K].astype(np.int64)
    cnt = neighbour_counts(C, graph, m, K)
    eye = np.eye(m, dtype=np.int64)
    change = eye[new] - eye[old]
    M = cnt * change
    return np.concatenate([M, change[:, : m - 1]], axis=1)


@dataclass(eq=False)
class ColouringModel:
    graph: Graph
    m: int
    p: np.ndarray
    mode: str
    seed: int | None = None
    pair: PairLaw | None = None
    types: TypeTable = field(default=None, repr=False)

    @property
    def n(self):
        return self.graph.n

    @property
    def r(self):
        return self.graph.r

    @property
    def dim(self):
        return 2 * self.m - 1

    @property
    def A(self):
        return colouring_A_matrix(self.m, self.r, self.p)

    @property
    def mean(self):
        return colouring_mean(self.n, self.r, self.p)

    @property
    def covariance(self):
        return colouring_covariance(self.n, self.r, self.p)

    @property
    def sigma2(self):
        return colouring_sigma2(self.r, self.p)

    def law_W(self) -> LatticePmf:
        if self.pair is None:
            raise ValueError("exact law needs enumeration mode")
        return self.pair.law_W()

    def sample_colourings(self, rng, size):
        return rng.choice(self.m, size=(size, self.n), p=self.p).astype(np.int8)

    def sample_pairs(self, rng, size):
        """(W, xi) samples; xi derived from the r neighbours of K only."""
        C = self.sample_colourings(rng, size)
        K = rng.integers(self.n, size=size)
        new = rng.choice(self.m, size=size, p=self.p)
        return colouring_stats(C, self.graph, self.m), recolour_jump(C, self.graph, self.m, K, new)

    def vertex_types(self, C):
        """(S, n) type index of every vertex in each colouring."""
        S = len(C)
        out = np.empty((S, self.n), dtype=np.int64)
        for v in range(self.n):
            cnt = neighbour_counts(C, self.graph, self.m, v)
            out[:, v] = self.types.type_index(C[:, v].astype(np.int64), cnt)
        return out

    def partition_probs(self, C):
        """P[xi = J | F] for each colouring row, where F is generated by the
        vertex types; shape (S, M) aligned with ``self.types.jumps``."""
        ty = self.vertex_types(C)
        T = len(self.types.type_prob)
        counts = np.zeros((len(C), T))
        rows = np.repeat(np.arange(len(C)), self.n)
        np.add.at(counts, (rows, ty.ravel()), 1.0)
        return counts @ self.types.weight / self.n

    def colouring_probs(self, C):
        return np.prod(self.p[C.astype(np.int64)], axis=1)


def build_colouring_model(graph: Graph, m: int, p=None, seed=None, mode: str | None = None) -> ColouringModel:
    """Exact enumeration when m^n <= 2^22, else a seeded sampler."""
    if m < 2:
        raise ValueError("need m >= 2")
    p = _check_p(np.full(m, 1.0 / m) if p is None else p, m)
    deg = graph.degrees
    if np.any(deg != deg[0]):
        raise ValueError("graph is not regular")
    exact_ok = m**graph.n <= ENUMERATION_CAP
    if mode is None:
        mode = "exact" if exact_ok else "mc"
    if mode == "exact" and not exact_ok:
        raise ValueError(f"{m}^{graph.n} colourings exceed the enumeration cap")
    model = ColouringModel(graph, m, p, mode, seed, types=type_table(m, graph.r, p))
    if mode == "exact":
        model.pair = _enumerate_pair(model)
    return model


def _enumerate_pair(model: ColouringModel) -> PairLaw:
    n, m, d = model.n, model.m, model.dim
    r = model.r
    total = m**n
    # jump codes: M part in [-r, r], N part in [-1, 1]
    jbase = np.array([2 * r + 1] * m + [3] * (m - 1), dtype=np.int64)
    jradix = np.concatenate([np.cumprod(jbase[::-1])[::-1][1:], [1]])
    joff = np.array([r] * m + [1] * (m - 1), dtype=np.int64)
    wbase = np.concatenate([np.full(m, graph_edges(model) + 1), np.full(m - 1, n + 1)]).astype(np.int64)
    wradix = np.concatenate([np.cumprod(wbase[::-1])[::-1][1:], [1]])
    acc = None
    bound = 2 * (r * r + 1)
    for start in range(0, total, _CHUNK):
        C = enumerate_colourings(n, m, start, min(total, start + _CHUNK))
        W = colouring_stats(C, model.graph, m)
        wcode = W @ wradix
        pc = model.colouring_probs(C)
        for K in range(n):
            for new in range(m):
                xi = recolour_jump(C, model.graph, m, K, new)
                if np.any((xi**2).sum(axis=1) > bound):
                    raise AssertionError("|xi|^2 exceeds 2(r^2 + 1)")
                jcode = (xi + joff) @ jradix
                mat = sparse.coo_matrix((pc * (model.p[new] / n), (wcode, jcode)),
                                        shape=(int(np.prod(wbase)), int(np.prod(jbase)))).tocsr()
                acc = mat if acc is None else acc + mat
    acc = acc.tocoo()
    acc.sum_duplicates()
    wc, jc, pr = acc.row, acc.col, acc.data
    atoms = (wc[:, None] // wradix[None, :]) % wbase[None, :]
    jumps = (jc[:, None] // jradix[None, :]) % jbase[None, :] - joff[None, :]
    return PairLaw.from_samples(atoms, jumps, pr, exchangeable=True,
                                label=f"colouring (n={n}, r={r}, m={m})")


def graph_edges(model: ColouringModel) -> int:
    return len(model.graph.edges)


# ---------------------------------------------------------------------------
# u-bounds through the vertex-type sigma-field

@dataclass
class PartitionU:
    jumps: np.ndarray
    q: np.ndarray
    u: dict  # jump tuple -> Estimate of (q^J)^{-1} E|P[xi=J|F] - q^J|
    nvar: dict  # jump tuple -> Estimate of n Var{P[xi=J|F]}
    mode: str
    replicates: int = 0


def colouring_partition_u(model: ColouringModel, mode: str = "exact", replicates: int = 100_000,
                          seed=None, threads: int = 1) -> PartitionU:
    tt = model.types
    keys = [tuple(int(x) for x in J) for J in tt.jumps]
    n = model.n
    if mode == "exact":
        if model.m**n > ENUMERATION_CAP:
            raise ValueError("exact partition mode needs an enumerable model")
        total = model.m**n
        abs_dev = np.zeros(len(keys))
        second = np.zeros(len(keys))
        for start in range(0, total, _CHUNK):
            C = enumerate_colourings(n, model.m, start, min(total, start + _CHUNK))
            pc = model.colouring_probs(C)
            P = model.partition_probs(C)
            abs_dev += pc @ np.abs(P - tt.q)
            second += pc @ (P - tt.q) ** 2
        u = {k: Estimate.exact(a / q) for k, a, q in zip(keys, abs_dev, tt.q)}
        nv = {k: Estimate.exact(n * s) for k, s in zip(keys, second)}
        return PartitionU(tt.jumps, tt.q, u, nv, "exact")
    if mode != "mc":
        raise ValueError(f"unknown mode {mode!r}")
    seed = model.seed if seed is None else seed

    def draw(rng, count):
        out = []
        for s in range(0, count, 4096):
            C = model.sample_colourings(rng, min(4096, count - s))
            out.append(model.partition_probs(C))
        return np.concatenate(out) if out else np.zeros((0, len(keys)))

    P = run_streams(draw, seed, replicates, streams=8, threads=threads)
    u, nv = {}, {}
    for k, col, q in zip(keys, P.T, tt.q):
        e = batch_means(np.abs(col - q) / q)
        u[k] = e
        v = variance_ci(col)
        nv[k] = Estimate(n * v.value, n * v.lo, n * v.hi, "ci")
    return PartitionU(tt.jumps, tt.q, u, nv, "mc", replicates)


def m2_identity_gap(model: ColouringModel) -> float:
    """max |M_1 - M_2 - r (N_1 - n/2)| over enumerated atoms (m = 2 only)."""
    if model.m != 2 or model.pair is None:
        raise ValueError("needs an enumerated m = 2 model")
    W = model.pair.atoms
    return float(np.abs(W[:, 0] - W[:, 1] - model.r * (W[:, 2] - model.n / 2)).max())


def diagnose_colouring_mc(model: ColouringModel, samples: int = 100_000, seed=None,
                          threads: int = 1) -> DiagnosticsReport:
    """Diagnostics without enumeration.

    A, sigma2 and L(xi) are exact from the type table; R1 vanishes by the
    exact regression; u^J are Monte Carlo estimates through the vertex-type
    sigma-field; eps1, eps1(xi) and E||R2||_1 are replaced by their u-bounds.
    """
    seed = model.seed if seed is None else seed
    n, A, d = model.n, model.A, model.dim
    s2 = model.sigma2
    tt = model.types
    flags = []
    pu = colouring_partition_u(model, "mc", samples, seed, threads)
    chains = find_chains(tt.jumps, d)
    if not chains.ok:
        flags.append(f"no chain of jumps reaches axes {chains.failed_axes}")
    us = assemble_u(pu.u, chains, "partition-mc")
    xi = LatticePmf(tt.jumps, tt.q)
    chi, L = lyapunov_ratio(n, A, s2, xi)
    try:
        std = standardize(n, A, s2)
        Sigma = std.Sigma_hat / n
    except ValueError as exc:
        flags.append(f"no positive definite Sigma: {exc}")
        std, Sigma = None, None
    eps_xi = us.u_tilde_star + 2 * us.u_star
    norms3 = np.sqrt((tt.jumps.astype(float) ** 2).sum(axis=1)) ** 3
    nan = float("nan")
    z = dict(L_Sigma=nan, chi_Sigma=nan, nu=nan, alpha1=nan, m3=nan, z2=nan, z3=nan)
    checks = []
    if Sigma is not None:
        R, s2S, tr, alpha1, nu, chi_S, L_S, normA = z_parameters(n, A, s2, Sigma, xi)

        def draw(rng, count):
            return colouring_stats(model.sample_colourings(rng, count), model.graph, model.m)

        W = run_streams(draw, [0 if seed is None else seed, 1], samples, streams=8, threads=threads)
        Z = (W - model.mean) @ R / np.sqrt(n * d * nu)
        zn = np.sqrt((Z**2).sum(axis=1))
        z2, z3 = batch_means(zn**2), batch_means(zn**3)
        m3 = 2 * (1 + 10 * chi_S / tr**1.5)
        z = dict(L_Sigma=L_S, chi_Sigma=chi_S, nu=nu, alpha1=alpha1, m3=m3, z2=z2.value, z3=z3.value)
        if n / alpha1 >= 1:
            checks.append({"name": "E|Z|^2 <= 2, E|Z|^3 <= m3 (95% CI lower ends)",
                           "lhs": [z2.lo, z3.lo], "rhs": [2.0, m3],
                           "ok": bool(z2.lo <= 2 and z3.lo <= m3)})
    prov = {"u_star": "ci", "u_tilde_star": "ci", "R1_mean_abs": "identity", "R2_l1_mean": "bound",
            "eps1": "bound", "eps1_xi_max": "bound", "L": "exact", "z2": "ci", "z3": "ci"}
    return DiagnosticsReport(
        label=f"colouring n={n} r={model.r} m={model.m} (mc)", dim=d, n=float(n), A=A, A_hat=A / n,
        sigma2=s2, Sigma=Sigma, n_tilde=std.n_tilde if std else nan,
        A_tilde=std.A_tilde if std else A / spectral_norm(A), Sigma_tilde=std.Sigma_tilde if std else None,
        R1_mean_abs=0.0, R1_sigma_moment3=0.0, R2_l1_mean=d * float(np.trace(s2)) * us.u_star,
        u_table={str(k): v for k, v in us.u.items()}, u_star=us.u_star,
        u_tilde={int(k): v for k, v in us.u_tilde.items()}, u_tilde_star=us.u_tilde_star,
        chains={int(k): v for k, v in chains.chains.items()},
        eps1=us.u_tilde_star, eps1_xi_max=eps_xi, E_xi3_eps1=float(tt.q @ norms3) * eps_xi,
        L=L, chi=chi, condition_flags={"R1_identically_zero": True}, provenance=prov,
        checks=checks, flags=flags, **z,
    )
