"""Exchangeable and linear-regression pairs (W, W').

In exact mode a pair is stored as the joint law of (W, xi) with xi = W' - W:
a ``(K, M)`` array over the distinct atoms of W and the distinct jumps.
Everything here is an exact finite sum over that array.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .lattice import LatticePmf, aligned, translate_tv, tv_distance
from .matrixcore import inv_sqrt, lyapunov_solve, spectral_norm
from .mc import Estimate

CHAIN_DEPTH = 8
nan = float("nan")


class ZeroProbabilityAtom(KeyError):
    pass


@dataclass(frozen=True, eq=False)
class PairLaw:
    atoms: np.ndarray  # (K, d) distinct values of W
    jumps: np.ndarray  # (M, d) distinct values of xi
    joint: np.ndarray  # (K, M) P[W = atom, xi = jump]
    exchangeable: bool = False
    label: str = ""

    def __post_init__(self):
        if self.joint.shape != (len(self.atoms), len(self.jumps)):
            raise ValueError("joint shape does not match atoms x jumps")
        if np.any(self.joint < 0):
            raise ValueError("negative joint probability")
        if abs(self.joint.sum() - 1.0) > 1e-10:
            raise ValueError(f"joint mass {self.joint.sum():.15g} != 1")

    @classmethod
    def from_samples(cls, w, xi, probs, exchangeable=False, label=""):
        """Build from aligned rows (w_i, xi_i, p_i); duplicates are merged."""
        w = np.atleast_2d(np.asarray(w, dtype=np.int64))
        xi = np.atleast_2d(np.asarray(xi, dtype=np.int64))
        probs = np.asarray(probs, dtype=float)
        atoms, ia = np.unique(w, axis=0, return_inverse=True)
        jumps, ij = np.unique(xi, axis=0, return_inverse=True)
        joint = np.zeros((len(atoms), len(jumps)))
        np.add.at(joint, (ia.ravel(), ij.ravel()), probs)
        return cls(atoms, jumps, joint, exchangeable, label)

    @property
    def dim(self):
        return self.atoms.shape[1]

    @property
    def pW(self):
        return self.joint.sum(axis=1)

    @property
    def q(self):
        return self.joint.sum(axis=0)

    @property
    def mu(self):
        return self.pW @ self.atoms

    def law_W(self) -> LatticePmf:
        return LatticePmf(self.atoms, self.pW)

    def law_W_prime(self) -> LatticePmf:
        K, M = self.joint.shape
        pts = (self.atoms[:, None, :] + self.jumps[None, :, :]).reshape(-1, self.dim)
        return LatticePmf(pts, self.joint.ravel())

    def law_xi(self) -> LatticePmf:
        return LatticePmf(self.jumps, self.q)

    def conditional_W(self, m: int) -> LatticePmf:
        """L(W | xi = jumps[m])."""
        return LatticePmf(self.atoms, self.joint[:, m] / self.q[m])

    def jump_index(self, J):
        J = tuple(int(x) for x in np.atleast_1d(J))
        for i, row in enumerate(self.jumps.tolist()):
            if tuple(row) == J:
                return i
        return None

    def marginal_gap(self) -> float:
        """Half-l1 gap between L(W) and L(W'); zero for a genuine pair."""
        return tv_distance(self.law_W(), self.law_W_prime())

    def symmetry_gap(self) -> float:
        """max_J |q^J - q^{-J}| (missing -J counts as probability zero)."""
        q = self.q
        gap = 0.0
        for i, J in enumerate(self.jumps):
            k = self.jump_index(-J)
            gap = max(gap, abs(q[i] - (q[k] if k is not None else 0.0)))
        return gap

    def cond_mean_xi(self):
        """E(xi | W = atom), shape (K, d)."""
        return (self.joint @ self.jumps) / self.pW[:, None]


# ---------------------------------------------------------------------------
# regression structure

@dataclass
class RegressionFit:
    R1: np.ndarray  # (K, d)
    weights: np.ndarray
    mean: np.ndarray
    mean_abs: float
    max_abs: float

    def sigma_moment(self, Sigma, power=3):
        """E|Sigma^{-1/2} R1(W)|^power."""
        Y = self.R1 @ inv_sqrt(Sigma)
        return float(self.weights @ np.sqrt((Y**2).sum(axis=1)) ** power)


def fit_regression(p: PairLaw, n: float, A) -> RegressionFit:
    """R1(w) = (n/||A||)^{1/2} (E(xi|W=w) - n^{-1} A (w - mu)) on every atom."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    if np.any(p.pW <= 0):
        raise ZeroProbabilityAtom("atom with zero probability")
    resid = p.cond_mean_xi() - (p.atoms - p.mu) @ A.T / n
    R1 = np.sqrt(n / spectral_norm(A)) * resid
    r = np.sqrt((R1**2).sum(axis=1))
    return RegressionFit(R1, p.pW, p.pW @ R1, float(p.pW @ r), float(r.max(initial=0.0)))


@dataclass
class CovResidual:
    sigma2: np.ndarray
    R2: np.ndarray  # (K, d, d)
    l1_mean: float
    mean: np.ndarray


def conditional_cov_residual(p: PairLaw) -> CovResidual:
    outer = np.einsum("mi,mj->mij", p.jumps, p.jumps).astype(float)
    sigma2 = np.einsum("m,mij->ij", p.q, outer)
    cond = np.einsum("km,mij->kij", p.joint, outer) / p.pW[:, None, None]
    R2 = cond - sigma2[None]
    l1 = float(p.pW @ np.abs(R2).sum(axis=(1, 2)))
    return CovResidual(sigma2, R2, l1, np.einsum("k,kij->ij", p.pW, R2))


def exchange_identity_residual(p: PairLaw) -> np.ndarray:
    """E{xi xi^T} + 2 E{E(xi|W)(W - mu)^T}; zero for an exchangeable pair."""
    s2 = conditional_cov_residual(p).sigma2
    m = p.cond_mean_xi()
    return s2 + 2 * np.einsum("k,ki,kj->ij", p.pW, m, p.atoms - p.mu)


def lyapunov_identity_residual(p: PairLaw, n: float, A) -> np.ndarray:
    """A_hat Cov(W) + Cov(W) A_hat^T + sigma2 with A_hat = A / n."""
    A_hat = np.atleast_2d(np.asarray(A, dtype=float)) / n
    dev = p.atoms - p.mu
    cov = (dev * p.pW[:, None]).T @ dev
    s2 = conditional_cov_residual(p).sigma2
    return A_hat @ cov + cov @ A_hat.T + s2


# ---------------------------------------------------------------------------
# chains of jumps

@dataclass
class ChainResult:
    chains: dict  # axis -> list of jump tuples, or None on failure
    radius: int
    depth: int

    @property
    def failed_axes(self):
        return [j for j, c in self.chains.items() if c is None]

    @property
    def ok(self):
        return not self.failed_axes


def find_chains(jumps, d: int, radius: int | None = None, depth: int = CHAIN_DEPTH) -> ChainResult:
    """Shortest sums of jumps equal to each unit vector, by breadth-first
    search over partial sums in an L-infinity box.

    Among predecessors of a newly reached partial sum the lexicographically
    smallest partial sum (then jump) is kept, so results are deterministic.
    """
    J = np.atleast_2d(np.asarray(jumps, dtype=np.int64)).reshape(-1, d)
    J = J[np.any(J != 0, axis=1)]
    J = np.unique(J, axis=0)  # lexicographic order
    if radius is None:
        radius = 3 * int(np.abs(J).max()) if len(J) else 1
    chains = {j: None for j in range(d)}
    if len(J) == 0:
        return ChainResult(chains, radius, depth)
    base = 2 * radius + 1
    radix = base ** np.arange(d - 1, -1, -1, dtype=np.int64)  # first axis most significant

    def encode(X):
        return (X + radius) @ radix

    targets = {j: int(encode(np.eye(d, dtype=np.int64)[j][None])[0]) for j in range(d)}
    frontier = np.zeros((1, d), dtype=np.int64)
    visited = np.array([encode(frontier)[0]])
    parent = {int(visited[0]): None}
    for _ in range(depth):
        cand = (frontier[:, None, :] + J[None, :, :]).reshape(-1, d)
        par = np.repeat(encode(frontier), len(J))
        jid = np.tile(np.arange(len(J)), len(frontier))
        inside = np.all(np.abs(cand) <= radius, axis=1)
        cand, par, jid = cand[inside], par[inside], jid[inside]
        keys = encode(cand)
        fresh = ~np.isin(keys, visited)
        cand, par, jid, keys = cand[fresh], par[fresh], jid[fresh], keys[fresh]
        if len(keys) == 0:
            break
        order = np.lexsort((jid, par, keys))
        keys, par, jid, cand = keys[order], par[order], jid[order], cand[order]
        first = np.ones(len(keys), bool)
        first[1:] = keys[1:] != keys[:-1]
        keys, par, jid, cand = keys[first], par[first], jid[first], cand[first]
        for k, pa, ji in zip(keys.tolist(), par.tolist(), jid.tolist()):
            parent[k] = (pa, ji)
        visited = np.union1d(visited, keys)
        frontier = cand
        if all(t in parent for t in targets.values()):
            break
    for j, t in targets.items():
        if t in parent:
            seq = []
            k = t
            while parent[k] is not None:
                pa, ji = parent[k]
                seq.append(tuple(int(x) for x in J[ji]))
                k = pa
            chains[j] = seq[::-1]
    return ChainResult(chains, radius, depth)


# ---------------------------------------------------------------------------
# u-statistics

@dataclass
class UStatistics:
    u: dict  # jump tuple -> Estimate
    u_star: float
    u_tilde: dict  # axis -> float (inf when the axis has no chain)
    u_tilde_star: float
    chains: ChainResult
    mode: str

    def u_value(self, J):
        e = self.u.get(tuple(J))
        return float("inf") if e is None else e.value


def u_atoms(p: PairLaw) -> dict:
    """Exact u^J = (q^J)^{-1} E|Q^J(W) - q^J| by conditioning on W."""
    q = p.q
    dev = np.abs(p.joint - np.outer(p.pW, q)).sum(axis=0) / q
    return {tuple(int(x) for x in J): Estimate.exact(v) for J, v in zip(p.jumps, dev)}


def u_from_partition(cell_probs, cond_probs, q, jumps, kind="exact") -> dict:
    """u^J upper bounds from a refinement F of sigma(W):
    (q^J)^{-1} E|P[xi = J | F] - q^J| with F given by cells."""
    cell_probs = np.asarray(cell_probs, dtype=float)
    cond_probs = np.atleast_2d(np.asarray(cond_probs, dtype=float))
    q = np.asarray(q, dtype=float)
    vals = cell_probs @ np.abs(cond_probs - q[None, :]) / q
    return {tuple(int(x) for x in J): Estimate(float(v), float(v), float(v), kind)
            for J, v in zip(np.atleast_2d(jumps), vals)}


def assemble_u(u: dict, chains: ChainResult, mode: str) -> UStatistics:
    u_star = max((e.value for e in u.values()), default=0.0)
    tilde = {}
    for j, chain in chains.chains.items():
        if chain is None:
            tilde[j] = float("inf")
            continue
        total = 0.0
        for J in chain:
            neg = tuple(-x for x in J)
            a = u.get(tuple(J))
            b = u.get(neg)
            total += (a.value if a else float("inf")) + (b.value if b else float("inf"))
        tilde[j] = total
    return UStatistics(u, u_star, tilde, max(tilde.values(), default=0.0), chains, mode)


def u_statistics(p: PairLaw, conditioning="atoms", partition=None, chains: ChainResult | None = None) -> UStatistics:
    """u^J table, u*, per-axis chain sums u~_j and u~*.

    ``conditioning='partition'`` needs ``partition=(cell_probs, cond_probs)``
    aligned with ``p.jumps``; the result bounds the atom values from above.
    """
    if chains is None:
        chains = find_chains(p.jumps, p.dim)
    if conditioning == "atoms":
        u = u_atoms(p)
    elif conditioning == "partition":
        if partition is None:
            raise ValueError("partition mode needs (cell_probs, cond_probs)")
        u = u_from_partition(partition[0], partition[1], p.q, p.jumps)
    else:
        raise ValueError(f"unknown conditioning {conditioning!r}")
    return assemble_u(u, chains, conditioning)


# ---------------------------------------------------------------------------
# translate total variation

@dataclass
class TranslateDiagnostics:
    eps1_axes: np.ndarray  # per axis d_TV(W, W + e_j)
    cond_tv: np.ndarray  # (M, d) d_TV(W | xi=J, W + e_j | xi=J)
    eps1: float
    eps1_xi: np.ndarray  # per jump, max over axes
    eps1_xi_max: float
    E_xi3_eps1: float
    checks: list = field(default_factory=list)

    @property
    def ok(self):
        return all(c["ok"] for c in self.checks)


def translate_tv_diagnostics(p: PairLaw, ustats: UStatistics | None = None,
                             cov: CovResidual | None = None) -> TranslateDiagnostics:
    """Exact eps_1, eps_1(xi) and the three translate-TV inequalities."""
    d = p.dim
    W = p.law_W()
    eps_axes = np.array([translate_tv(W, j) for j in range(d)])
    cond = np.zeros((len(p.jumps), d))
    for m in range(len(p.jumps)):
        cw = p.conditional_W(m)
        for j in range(d):
            cond[m, j] = translate_tv(cw, j)
    eps_xi = cond.max(axis=1)
    norms3 = np.sqrt((p.jumps.astype(float) ** 2).sum(axis=1)) ** 3
    out = TranslateDiagnostics(eps_axes, cond, float(eps_axes.max()), eps_xi,
                               float(eps_xi.max()), float(p.q @ (norms3 * eps_xi)))
    if ustats is not None:
        for j in range(d):
            bound = ustats.u_tilde[j]
            out.checks.append({"name": f"eps1[j={j}] <= u_tilde_j", "lhs": float(eps_axes[j]),
                               "rhs": bound, "ok": bool(eps_axes[j] <= bound + 1e-12)})
        for m, J in enumerate(p.jumps):
            uJ = ustats.u_value(J)
            for j in range(d):
                bound = ustats.u_tilde[j] + 2 * uJ
                out.checks.append({"name": f"cond_tv[J={tuple(J.tolist())},j={j}] <= u_tilde_j + 2u^J",
                                   "lhs": float(cond[m, j]), "rhs": bound,
                                   "ok": bool(cond[m, j] <= bound + 1e-12)})
        cov = cov if cov is not None else conditional_cov_residual(p)
        bound = d * np.trace(cov.sigma2) * ustats.u_star
        out.checks.append({"name": "E||R2||_1 <= d Tr(sigma2) u*", "lhs": cov.l1_mean,
                           "rhs": float(bound), "ok": bool(cov.l1_mean <= bound + 1e-12)})
    return out


# ---------------------------------------------------------------------------
# standardization and Z-moments

@dataclass(frozen=True)
class Standardized:
    n_tilde: float
    A_tilde: np.ndarray
    Sigma_tilde: np.ndarray
    Sigma_hat: np.ndarray


def standardize(n: float, A, sigma2) -> Standardized:
    """Scale-free version of (n, A): Sigma_hat = n Sigma solves
    (A/n) Sigma_hat + Sigma_hat (A/n)^T + sigma2 = 0."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    S_hat = lyapunov_solve(A / n, sigma2)
    norm = spectral_norm(A)
    n_t = n / norm
    return Standardized(n_t, A / norm, S_hat / n_t, S_hat)


@dataclass
class ZMoments:
    z2: float
    z3: float
    m3: float
    alpha1: float
    nu: float
    chi_Sigma: float
    L_Sigma: float
    tr_sigma2_Sigma: float
    cond11: tuple
    cond12: tuple
    simpler: tuple
    n_over_alpha1: float
    tail_bound: float
    tail_lhs: float

    @property
    def conditions_hold(self):
        return self.cond11[0] <= self.cond11[1] and self.cond12[0] <= self.cond12[1]

    @property
    def applicable(self):
        return self.conditions_hold and self.n_over_alpha1 >= 1

    @property
    def ok(self):
        if not self.applicable:
            return True
        return self.z2 <= 2 + 1e-12 and self.z3 <= self.m3 + 1e-12

    def as_dict(self):
        return {k: (list(v) if isinstance(v, tuple) else v) for k, v in self.__dict__.items()} | {
            "conditions_hold": self.conditions_hold, "applicable": self.applicable, "ok": self.ok}


def z_parameters(n, A, sigma2, Sigma, xi_law: LatticePmf):
    d = Sigma.shape[0]
    R = inv_sqrt(Sigma)
    s2S = R @ sigma2 @ R
    tr = float(np.trace(s2S))
    alpha1 = 0.5 * float(np.linalg.eigvalsh(Sigma)[0])
    nu = tr / (d * alpha1)
    Y = xi_law.points.astype(float) @ R
    chi_S = float(xi_law.probs @ np.sqrt((Y**2).sum(axis=1)) ** 3)
    normA = spectral_norm(A)
    L_S = np.sqrt(normA / n) * chi_S * tr**-1.5
    return R, s2S, tr, alpha1, nu, chi_S, float(L_S), normA


def z_moments_check(p: PairLaw, n: float, A, sigma2=None, Sigma=None, delta: float = 1.0) -> ZMoments:
    """Exact E|Z|^2, E|Z|^3 with Z = (nd nu)^{-1/2} Sigma^{-1/2}(W - mu), the
    regression-residual conditions, and the deviation tail bound."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    d = p.dim
    if sigma2 is None:
        sigma2 = conditional_cov_residual(p).sigma2
    if Sigma is None:
        Sigma = lyapunov_solve(A, sigma2)
    R, s2S, tr, alpha1, nu, chi_S, L_S, normA = z_parameters(n, A, sigma2, Sigma, p.law_xi())
    Z = (p.atoms - p.mu) @ R / np.sqrt(n * d * nu)
    zn = np.sqrt((Z**2).sum(axis=1))
    w = p.pW
    z2, z3 = float(w @ zn**2), float(w @ zn**3)
    fit = fit_regression(p, n, A)
    r = np.sqrt(((fit.R1 @ R) ** 2).sum(axis=1))
    k = np.sqrt(normA / alpha1)
    c11 = (k * float(w @ ((1 + zn) * r)), 0.5 * np.sqrt(tr) * (1 + z2))
    c12 = (k * float(w @ (zn * (1 + zn) * r)), 0.25 * np.sqrt(tr) * (1 + z3))
    simple = (float(w @ r**3) ** (1 / 3), 0.125 * np.sqrt(alpha1 * tr / normA))
    m3 = 2 * (1 + 10 * chi_S / tr**1.5)
    ev = np.linalg.eigvalsh(s2S)
    tail = (2 * d**1.5 / delta**3 * (np.sqrt(normA / n) + 10 * L_S)
            * (2 * ev.mean() / ev[0]) ** 1.5)
    snorm = np.sqrt((((p.atoms - p.mu) @ R) ** 2).sum(axis=1))
    tail_lhs = n / normA * float(w[snorm > n * delta / np.sqrt(normA)].sum())
    return ZMoments(z2, z3, float(m3), alpha1, nu, chi_S, L_S, tr, c11, c12, simple,
                    n / alpha1, float(tail), tail_lhs)


# ---------------------------------------------------------------------------
# the full report

def _jsonable(x):
    if isinstance(x, Estimate):
        return x.as_dict()
    if isinstance(x, np.ndarray):
        return x.tolist()
    if isinstance(x, np.generic):
        x = x.item()
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, float) and not np.isfinite(x):
        return str(x)
    return x


@dataclass
class DiagnosticsReport:
    label: str
    dim: int
    n: float
    A: np.ndarray
    A_hat: np.ndarray
    sigma2: np.ndarray
    Sigma: np.ndarray
    n_tilde: float
    A_tilde: np.ndarray
    Sigma_tilde: np.ndarray
    R1_mean_abs: float
    R1_sigma_moment3: float
    R2_l1_mean: float
    u_table: dict
    u_star: float
    u_tilde: dict
    u_tilde_star: float
    chains: dict
    eps1: float
    eps1_xi_max: float
    E_xi3_eps1: float
    L: float
    L_Sigma: float
    chi: float
    chi_Sigma: float
    nu: float
    alpha1: float
    m3: float
    z2: float
    z3: float
    condition_flags: dict
    provenance: dict = field(default_factory=dict)
    checks: list = field(default_factory=list)
    flags: list = field(default_factory=list)

    @property
    def ok(self):
        """All checks pass and nothing flagged the model as degenerate."""
        return not self.flags and all(c.get("ok", True) for c in self.checks)

    def as_dict(self):
        out = {k: _jsonable(v) for k, v in self.__dict__.items()}
        out["ok"] = self.ok
        return out

    def to_json(self, path=None, indent=2):
        text = json.dumps(self.as_dict(), indent=indent)
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text + "\n")
        return text


def lyapunov_ratio(n, A, sigma2, xi_law: LatticePmf):
    """(chi, L) with chi = E|xi|^3 and L = (||A||/n)^{1/2} chi (Tr sigma2)^{-3/2}."""
    chi = float(xi_law.probs @ np.sqrt((xi_law.points.astype(float) ** 2).sum(axis=1)) ** 3)
    return chi, float(np.sqrt(spectral_norm(A) / n) * chi * np.trace(sigma2) ** -1.5)


def _condition_flags(zm):
    if zm is None:
        return {}
    return {"cond11": list(zm.cond11), "cond12": list(zm.cond12),
            "simpler": list(zm.simpler), "n_over_alpha1": zm.n_over_alpha1,
            "cond11_ok": bool(zm.cond11[0] <= zm.cond11[1]),
            "cond12_ok": bool(zm.cond12[0] <= zm.cond12[1]),
            "simpler_ok": bool(zm.simpler[0] <= zm.simpler[1])}


def diagnose_exact(p: PairLaw, n: float, A, partition=None) -> DiagnosticsReport:
    """Every pair statistic by exact summation over the joint law."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    d = p.dim
    cov = conditional_cov_residual(p)
    flags = []
    chains = find_chains(p.jumps, d)
    if not chains.ok:
        flags.append(f"no chain of jumps reaches axes {chains.failed_axes}")
    try:
        std = standardize(n, A, cov.sigma2)
        Sigma = std.Sigma_hat / n
    except ValueError as exc:
        flags.append(f"no positive definite Sigma: {exc}")
        std, Sigma = None, None
    fit = fit_regression(p, n, A)
    us = u_statistics(p, "atoms", chains=chains)
    tr = translate_tv_diagnostics(p, us, cov)
    chi, L = lyapunov_ratio(n, A, cov.sigma2, p.law_xi()) if np.trace(cov.sigma2) > 0 else (0.0, nan)
    checks = list(tr.checks)
    if Sigma is not None:
        zm = z_moments_check(p, n, A, cov.sigma2, Sigma)
        checks.append({"name": "E|Z|^2 <= 2, E|Z|^3 <= m3", "lhs": [zm.z2, zm.z3], "rhs": [2.0, zm.m3],
                       "applicable": zm.applicable, "ok": zm.ok})
    else:
        zm = None
    if partition is not None:
        up = u_statistics(p, "partition", partition=partition, chains=chains)
        dom = all(up.u[J].value >= us.u[J].value - 1e-12 for J in us.u)
        checks.append({"name": "partition u-bounds dominate atom u-values", "ok": bool(dom)})
    if p.exchangeable and p.symmetry_gap() > 1e-12:
        flags.append("declared exchangeable but q^J != q^-J")
    if not np.any(p.jumps):
        flags.append("degenerate jump law: xi is identically zero")
    prov = {k: "exact" for k in ("R1_mean_abs", "R2_l1_mean", "u_star", "u_tilde_star", "eps1",
                                 "eps1_xi_max", "L", "z2", "z3")}
    return DiagnosticsReport(
        label=p.label, dim=d, n=float(n), A=A, A_hat=A / n, sigma2=cov.sigma2, Sigma=Sigma,
        n_tilde=std.n_tilde if std else nan, A_tilde=std.A_tilde if std else A / spectral_norm(A),
        Sigma_tilde=std.Sigma_tilde if std else None,
        R1_mean_abs=fit.mean_abs, R1_sigma_moment3=fit.sigma_moment(Sigma, 3) if std else nan,
        R2_l1_mean=cov.l1_mean, u_table={str(k): v for k, v in us.u.items()},
        u_star=us.u_star, u_tilde={int(k): v for k, v in us.u_tilde.items()},
        u_tilde_star=us.u_tilde_star,
        chains={int(k): v for k, v in chains.chains.items()},
        eps1=tr.eps1, eps1_xi_max=tr.eps1_xi_max, E_xi3_eps1=tr.E_xi3_eps1,
        L=L, L_Sigma=zm.L_Sigma if zm else nan, chi=chi, chi_Sigma=zm.chi_Sigma if zm else nan,
        nu=zm.nu if zm else nan, alpha1=zm.alpha1 if zm else nan,
        m3=zm.m3 if zm else nan, z2=zm.z2 if zm else nan, z3=zm.z3 if zm else nan,
        condition_flags=_condition_flags(zm),
        provenance=prov, checks=checks, flags=flags,
    )
