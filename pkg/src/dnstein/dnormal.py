"""The discrete normal family DN_d(nc, n Sigma).

Each integer point receives the N(nc, n Sigma) probability of the unit box
centred on it.  Diagonal covariances are handled exactly with 1-d normal tail
functions; otherwise a tensor Gauss-Legendre rule is applied box by box.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
from scipy import special, stats

from . import constants
from .lattice import LatticePmf, translate_tv
from .matrixcore import SigmaNorm, check_spd

SUPPORT_CAP = 2**24
_CHUNK_EVALS = 2_000_000


class TruncationError(ValueError):
    pass


@dataclass(frozen=True)
class GaussianParams:
    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self):
        cov = check_spd(self.cov, "cov")
        mean = np.atleast_1d(np.asarray(self.mean, dtype=float))
        if mean.shape != (cov.shape[0],):
            raise ValueError("mean and cov dimensions differ")
        object.__setattr__(self, "cov", cov)
        object.__setattr__(self, "mean", mean)

    @property
    def dim(self):
        return len(self.mean)

    @property
    def is_diagonal(self):
        off = self.cov - np.diag(np.diag(self.cov))
        return not np.any(off)


def default_order(d: int) -> int:
    """Gauss-Legendre points per axis: 12, reduced in high dimension so the
    tensor rule stays near 4096 nodes."""
    if d <= 3:
        return 12
    return max(3, int(4096 ** (1.0 / d)))


def _interval_probs(lo, hi):
    """P[lo < N < hi] for standard normal N, accurate in both tails."""
    lo = np.asarray(lo, float)
    hi = np.asarray(hi, float)
    upper = lo > 0
    out = np.where(upper, special.ndtr(-lo) - special.ndtr(-hi), special.ndtr(hi) - special.ndtr(lo))
    return out


def _gl_rule(order, d):
    x, w = np.polynomial.legendre.leggauss(order)
    x = 0.5 * x
    w = 0.5 * w
    grids = np.meshgrid(*([x] * d), indexing="ij")
    nodes = np.stack([g.ravel() for g in grids], axis=1)
    wgrid = np.meshgrid(*([w] * d), indexing="ij")
    weights = np.prod(np.stack([g.ravel() for g in wgrid], axis=1), axis=1)
    return nodes, weights


def box_probabilities(points, g: GaussianParams, order: int | None = None) -> np.ndarray:
    """Gaussian mass of the unit box around each row of ``points``."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    d = g.dim
    if pts.shape[1] != d:
        raise ValueError("point dimension does not match the Gaussian")
    if g.is_diagonal:
        s = np.sqrt(np.diag(g.cov))
        lo = (pts - 0.5 - g.mean) / s
        hi = (pts + 0.5 - g.mean) / s
        return np.prod(_interval_probs(lo, hi), axis=1)
    order = default_order(d) if order is None else order
    nodes, weights = _gl_rule(order, d)
    L = np.linalg.cholesky(g.cov)
    Linv = np.linalg.inv(L)
    lognorm = -0.5 * d * np.log(2 * np.pi) - np.log(np.diag(L)).sum()
    out = np.empty(len(pts))
    step = max(1, _CHUNK_EVALS // len(nodes))
    for start in range(0, len(pts), step):
        block = pts[start:start + step] - g.mean
        x = block[:, None, :] + nodes[None, :, :]
        z = x @ Linv.T
        dens = np.exp(lognorm - 0.5 * (z**2).sum(axis=2))
        # sorted summation so mirror-image boxes give bit-identical results
        out[start:start + step] = np.sort(dens * weights[None, :], axis=1).sum(axis=1)
    return out


def box_probability(i, g: GaussianParams, order: int | None = None) -> float:
    return float(box_probabilities(np.atleast_1d(i)[None, :], g, order)[0])


def box_probabilities_with_error(points, g: GaussianParams, order: int | None = None):
    """Box masses plus a per-box error estimate from a lower-order rule."""
    vals = box_probabilities(points, g, order)
    if g.is_diagonal:
        return vals, np.full(len(vals), 4e-16)
    order = default_order(g.dim) if order is None else order
    coarse = box_probabilities(points, g, max(2, order - 2))
    return vals, np.abs(vals - coarse)


class TVEstimate(NamedTuple):
    value: float
    err: float


@dataclass(frozen=True, eq=False)
class DiscreteNormal:
    params: GaussianParams
    pmf: LatticePmf
    discarded_mass: float
    quadrature_order: int
    n: float
    c: np.ndarray
    Sigma: np.ndarray
    radius: float = 0.0
    renormalized: bool = False
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def dim(self):
        return self.params.dim

    def dense(self):
        if "dense" not in self._cache:
            self._cache["dense"] = self.pmf.to_dense()
        return self._cache["dense"]


def truncation_radius(d: int, tail_tol: float) -> float:
    """Smallest R with P[chi2_d > R^2] <= tail_tol / 2."""
    return float(np.sqrt(stats.chi2.isf(tail_tol / 2.0, d)))


def dn_build(n, c, Sigma, tail_tol=1e-10, renormalize=False, order=None) -> DiscreteNormal:
    """DN_d(nc, n Sigma) over the padded integer box hull of the
    ``tail_tol``-ellipsoid of N(nc, n Sigma)."""
    if not (0 < tail_tol <= 1e-6):
        raise ValueError("tail_tol must lie in (0, 1e-6]")
    Sigma = check_spd(Sigma, "Sigma")
    d = Sigma.shape[0]
    c = np.broadcast_to(np.asarray(c, dtype=float), (d,)).copy()
    g = GaussianParams(n * c, n * Sigma)
    R = truncation_radius(d, tail_tol)
    half = R * np.sqrt(np.diag(g.cov))
    lo = np.floor(g.mean - half).astype(np.int64) - 2
    hi = np.ceil(g.mean + half).astype(np.int64) + 2
    shape = hi - lo + 1
    if np.prod(shape.astype(float)) > SUPPORT_CAP:
        raise TruncationError(
            f"support of {int(np.prod(shape.astype(float)))} points exceeds cap {SUPPORT_CAP}"
        )
    axes = [np.arange(a, b + 1) for a, b in zip(lo, hi)]
    grid = np.stack([m.ravel() for m in np.meshgrid(*axes, indexing="ij")], axis=1)
    order = default_order(d) if order is None else order
    probs = box_probabilities(grid, g, order)
    if g.is_diagonal:
        s = np.sqrt(np.diag(g.cov))
        out = special.ndtr((lo - 0.5 - g.mean) / s) + special.ndtr(-(hi + 0.5 - g.mean) / s)
        discarded = float(-np.expm1(np.log1p(-out).sum()))
    else:
        # Gaussian mass outside the box hull is below the ellipsoid tail
        discarded = float(stats.chi2.sf(R**2, d))
    tol = discarded
    if renormalize:
        probs = probs / probs.sum()
        tol = 1e-12
    pmf = LatticePmf(grid, probs, tolerance=max(tol, 1e-15))
    return DiscreteNormal(g, pmf, discarded, order, float(n), c, Sigma, R, renormalize)


def dn_translate_tv(dn: DiscreteNormal, j: int) -> TVEstimate:
    """d_TV(DN, DN + e_j) on the truncated support, with a 2*discarded error bar."""
    return TVEstimate(translate_tv(dn.pmf, j), 2.0 * dn.discarded_mass)


# moment bounds ------------------------------------------------------------

@dataclass
class CheckLine:
    name: str
    lhs: float
    rhs: float
    precondition: bool
    note: str = ""

    @property
    def margin(self):
        return self.rhs - self.lhs

    @property
    def ok(self):
        return (not self.precondition) or self.margin >= 0

    def as_dict(self):
        return {"name": self.name, "lhs": self.lhs, "rhs": self.rhs, "margin": self.margin,
                "precondition": self.precondition, "ok": self.ok, "note": self.note}


@dataclass
class CheckReport:
    lines: list

    @property
    def ok(self):
        return all(line.ok for line in self.lines)

    @property
    def checked(self):
        return [line for line in self.lines if line.precondition]

    @property
    def skipped(self):
        return [line for line in self.lines if not line.precondition]

    def as_dict(self):
        return {"ok": self.ok, "lines": [line.as_dict() for line in self.lines]}


def dn_moment_check(dn: DiscreteNormal, l_max: int = 4) -> CheckReport:
    """Exact truncated moments of DN against the three moment inequalities.

    Failed preconditions are reported per line and do not count as failures.
    """
    n, Sigma, d = dn.n, dn.Sigma, dn.dim
    lmin = float(np.linalg.eigvalsh(Sigma)[0])
    Sinv = np.linalg.inv(Sigma)
    x = dn.pmf.points - n * dn.c
    w = dn.pmf.probs
    r = SigmaNorm(Sigma)(x)
    y = x @ Sinv.T
    lines = []
    pre_a = n >= 1.0 / lmin
    for l in range(1, l_max + 1):
        lines.append(CheckLine(f"a[l={l}]", float(w @ r**l), constants.C(l) * (n * d) ** (l / 2),
                               bool(pre_a), "E||W-nc||^l <= C(l)(nd)^{l/2}"))
    for j in range(d):
        lines.append(CheckLine(f"b[j={j}]", float(w @ x[:, j] ** 2), 0.5 + 2 * n * Sigma[j, j],
                               bool(n >= 1), "E(W_j-nc_j)^2 <= 1/2 + 2 n Sigma_jj"))
    pre_c = n >= d / (4.0 * lmin**2)
    for j in range(d):
        for l in range(1, l_max + 1):
            rhs = n**l * constants.C_prime(l) * (1.0 + Sinv[j, j] ** l)
            lines.append(CheckLine(f"c[j={j},l={l}]", float(w @ y[:, j] ** (2 * l)), rhs,
                                   bool(pre_c), "E[Sigma^-1(W-nc)]_j^{2l} <= n^l C'(l)(1+(Sigma^-1)_jj^l)"))
    return CheckReport(lines)


def tv_to_gaussian_boxes(p: LatticePmf, g: GaussianParams, order: int | None = None) -> TVEstimate:
    """Exact-form d_TV between p and the box-discretized Gaussian g.

    Box masses are needed only on the support S of p, because the
    discretized law has total mass exactly one:
    d_TV = 1/2 sum_S |p - q| + 1/2 (1 - sum_S q).
    """
    q, qerr = box_probabilities_with_error(p.points, g, order)
    val = 0.5 * np.abs(p.probs - q).sum() + 0.5 * max(0.0, 1.0 - q.sum())
    err = float(qerr.sum() + p.tolerance)
    return TVEstimate(float(val), err)


def tv_to_dn(p: LatticePmf, dn: DiscreteNormal) -> tuple[float, float, float]:
    """d_TV(p, truncated DN) with error bar and the DN truncation slack.

    Returns (tv, err, slack); err >= slack always.
    """
    from .lattice import tv_distance

    tv = tv_distance(p, dn.pmf)
    slack = dn.discarded_mass
    return tv, slack + p.tolerance, slack
