"""Experiment harness: total variation convergence curves and term-by-term
bound brackets assembled from exact diagnostics."""

from __future__ import annotations

import csv
import json
import time
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .dnormal import GaussianParams, box_probabilities, dn_build, tv_to_dn, tv_to_gaussian_boxes
from .lattice import LatticePmf, convolve_power
from .matrixcore import check_spd, inv_sqrt, spectral_norm
from .mc import parallel_map, run_streams
from .models.colouring import (ColouringModel, ENUMERATION_CAP, colouring_covariance, colouring_mean,
                               colouring_stats, enumerate_colourings)
from .models.graphs import regular_graph
from .pairs import DiagnosticsReport, _jsonable

CURVE_COLUMNS = ("size", "tv", "err", "slack", "seconds")
MC_SAMPLES = 200_000


@dataclass
class CurveRow:
    size: int
    tv: float
    err: float
    slack: float
    seconds: float
    kind: str = "exact"


@dataclass
class ConvergenceCurve:
    label: str
    rows: list = field(default_factory=list)
    flags: list = field(default_factory=list)  # degeneracies; a flagged curve is not "ok"
    notes: list = field(default_factory=list)

    def __post_init__(self):
        self.validate()

    def validate(self):
        sizes = [r.size for r in self.rows]
        if any(b <= a for a, b in zip(sizes, sizes[1:])):
            raise ValueError("curve sizes must be strictly increasing")
        if any(r.err < 0 or r.err < r.slack for r in self.rows):
            raise ValueError("error bars must be nonnegative and cover the truncation slack")

    @property
    def sizes(self):
        return np.array([r.size for r in self.rows])

    @property
    def tv(self):
        return np.array([r.tv for r in self.rows])

    def tv_at(self, size):
        for r in self.rows:
            if r.size == size:
                return r.tv
        raise KeyError(size)

    def ratio(self, a, b):
        """tv(a) / tv(b)."""
        return self.tv_at(a) / self.tv_at(b)

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(CURVE_COLUMNS)
            for r in self.rows:
                w.writerow([r.size, repr(r.tv), repr(r.err), repr(r.slack), f"{r.seconds:.3f}"])

    def as_dict(self):
        return {"label": self.label, "flags": self.flags, "notes": self.notes,
                "rows": [r.__dict__.copy() for r in self.rows]}


def _check_sizes(sizes):
    sizes = [int(s) for s in sizes]
    if any(s < 1 for s in sizes):
        raise ValueError("sizes must be positive")
    if any(b <= a for a, b in zip(sizes, sizes[1:])):
        raise ValueError("sizes must be strictly increasing")
    return sizes


# ---------------------------------------------------------------------------
# independent sums

def _summand_moments(Y: LatticePmf):
    x = Y.points.astype(float)
    mu = Y.probs @ x
    dev = x - mu
    return mu, (dev * Y.probs[:, None]).T @ dev


def tv_curve_indep_sum(summand: LatticePmf, sizes, tail_tol: float = 1e-10,
                       threads: int = 1) -> ConvergenceCurve:
    """Exact d_TV(L(Y_1 + .. + Y_m), DN(m mu, m S)) for iid summands."""
    if summand.dim > 2:
        raise ValueError("exact curves need d <= 2")
    sizes = _check_sizes(sizes)
    if max(sizes) > 1024:
        raise ValueError("sizes above 1024 are out of range")
    mu, S = _summand_moments(summand)
    S = check_spd(S, "summand covariance")

    def row(m):
        t0 = time.perf_counter()
        W = convolve_power(summand, m)
        dn = dn_build(m, mu, S, tail_tol=tail_tol)
        tv, err, slack = tv_to_dn(W, dn)
        return CurveRow(m, tv, err, slack, time.perf_counter() - t0)

    rows = parallel_map(row, sizes, threads)
    return ConvergenceCurve(f"independent sum d={summand.dim}", rows)


# ---------------------------------------------------------------------------
# colourings

def colouring_law_W(graph, m: int, p) -> LatticePmf:
    """Exact L(W) by enumeration of all m^n colourings (no pair needed)."""
    n = graph.n
    total = m**n
    if total > ENUMERATION_CAP:
        raise ValueError(f"{m}^{n} colourings exceed the enumeration cap")
    p = np.asarray(p, dtype=float)
    pts, prs = [], []
    for start in range(0, total, 1 << 16):
        C = enumerate_colourings(n, m, start, min(total, start + (1 << 16)))
        W = colouring_stats(C, graph, m)
        u, inv = np.unique(W, axis=0, return_inverse=True)
        pr = np.zeros(len(u))
        np.add.at(pr, inv.ravel(), np.prod(p[C.astype(np.int64)], axis=1))
        pts.append(u)
        prs.append(pr)
    return LatticePmf(np.concatenate(pts), np.concatenate(prs))


def _mc_partition_tv(samples: np.ndarray, g: GaussianParams, coarse: int):
    """Half-l1 distance over the cells hit by the samples plus their
    complement; cells are cubes of side ``coarse``.  Lower-bounds the TV up
    to sampling noise."""
    cells = np.floor_divide(samples, coarse)
    u, counts = np.unique(cells, axis=0, return_counts=True)
    phat = counts / len(samples)
    # cell c covers integers [k c, k c + k - 1], i.e. the box [k c - 1/2, k c + k - 1/2]
    gk = GaussianParams((g.mean + 0.5) / coarse - 0.5, g.cov / coarse**2)
    q = box_probabilities(u, gk)
    return 0.5 * np.abs(phat - q).sum() + 0.5 * max(0.0, 1.0 - q.sum())


def tv_curve_colouring(r: int, m: int, sizes, p=None, mode: str = "auto", reduced: bool = False,
                       ridge: float = 1.0, seed=0, samples: int = MC_SAMPLES, coarse: int = 1,
                       threads: int = 1) -> ConvergenceCurve:
    """d_TV(L(W), DN_{2m-1}(n nu, n Sigma)) on circulant r-regular graphs.

    ``reduced`` keeps only (M_1, N_1) (m = 2).  For m = 2 the full
    covariance is singular, so the full-dimensional DN uses Cov(W) + ridge I
    and the curve is flagged.
    """
    sizes = _check_sizes(sizes)
    p = np.full(m, 1.0 / m) if p is None else np.asarray(p, dtype=float)
    curve_flags = []
    axes = None
    if reduced:
        if m != 2:
            raise ValueError("the reduced pair (M_1, N_1) is defined for m = 2")
        axes = [0, 2]
    elif m == 2:
        curve_flags.append(f"m = 2: Cov(W) is singular (M_1 - M_2 = r(N_1 - n/2)); "
                           f"DN built from Cov(W) + {ridge:g} I")

    def row(item):
        i, n = item
        t0 = time.perf_counter()
        graph = regular_graph(n, r, "circulant")
        mean = colouring_mean(n, r, p)
        cov = colouring_covariance(n, r, p)
        if axes is not None:
            mean, cov = mean[axes], cov[np.ix_(axes, axes)]
        elif m == 2:
            cov = cov + ridge * np.eye(len(cov))
        g = GaussianParams(mean, cov)
        use_exact = mode == "exact" or (mode == "auto" and m**n <= ENUMERATION_CAP)
        if use_exact:
            law = colouring_law_W(graph, m, p)
            if axes is not None:
                law = law.marginal(axes)
            est = tv_to_gaussian_boxes(law, g)
            return CurveRow(n, est.value, est.err, 0.0, time.perf_counter() - t0, "exact")
        if mode not in ("auto", "mc"):
            raise ValueError(f"unknown mode {mode!r}")
        model = ColouringModel(graph, m, p, "mc", seed)

        def draw(rng, count):
            W = colouring_stats(model.sample_colourings(rng, count), graph, m)
            return W[:, axes] if axes is not None else W

        W = run_streams(draw, [seed, i], samples, streams=8)
        tv = _mc_partition_tv(W, g, coarse)
        # spread of the eight stream estimates gives the error bar
        parts = np.array_split(W, 8)
        per = np.array([_mc_partition_tv(x, g, coarse) for x in parts])
        err = float(stats.t.ppf(0.975, 7) * per.std(ddof=1) / np.sqrt(8))
        return CurveRow(n, float(tv), err, 0.0, time.perf_counter() - t0, "mc")

    rows = parallel_map(row, list(enumerate(sizes)), threads)
    notes = []
    if any(r_.kind == "mc" for r_ in rows):
        notes.append("mc rows are partition TV estimates (lower bounds up to noise)")
    label = f"colouring circulant r={r} m={m}" + (" reduced (M1,N1)" if reduced else "")
    return ConvergenceCurve(label, rows, curve_flags, notes)


# ---------------------------------------------------------------------------
# bound brackets

@dataclass
class Term:
    name: str
    value: float
    provenance: str = "exact"

    def __post_init__(self):
        self.value = float(self.value)

    def as_dict(self):
        return {"name": self.name, "value": self.value, "provenance": self.provenance}


def _total(terms):
    return float(sum(t.value for t in terms))


@dataclass
class BoundReport:
    model: str
    diagnostics: dict
    thm12_terms: list
    thm32_terms: list
    corollary_terms: list
    v: float
    flags: list = field(default_factory=list)

    @property
    def thm12_bracket(self):
        return _total(self.thm12_terms)

    @property
    def thm32_bracket(self):
        return _total(self.thm32_terms)

    @property
    def ok(self):
        terms = self.thm12_terms + self.thm32_terms + self.corollary_terms
        return not self.flags and all(np.isfinite(t.value) and t.value >= 0 for t in terms)

    def as_dict(self):
        return {
            "model": self.model,
            "thm12_bracket": self.thm12_bracket,
            "thm12_terms": [t.as_dict() for t in self.thm12_terms],
            "thm32_bracket": self.thm32_bracket,
            "thm32_terms": [t.as_dict() for t in self.thm32_terms],
            "corollary_terms": [t.as_dict() for t in self.corollary_terms],
            "v": self.v,
            "flags": self.flags,
            "ok": self.ok,
            "diagnostics": self.diagnostics,
        }

    def to_json(self, path=None, indent=2):
        text = json.dumps(_jsonable(self.as_dict()), indent=indent)
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text + "\n")
        return text


REQUIRED = ("L", "u_star", "u_tilde_star", "R1_mean_abs", "R2_l1_mean", "eps1", "E_xi3_eps1",
            "n_tilde", "sigma2", "Sigma")


def second_moment_ratio(law: LatticePmf, n: float, Sigma) -> float:
    """v = E||W - nc||^2_Sigma / (d n) with nc = E W."""
    x = law.points.astype(float)
    dev = x - law.probs @ x
    y = dev @ inv_sqrt(Sigma)
    return float(law.probs @ (y**2).sum(axis=1) / (law.dim * n))


def bound_report(d: DiagnosticsReport, law: LatticePmf | None = None, model_id: str = "") -> BoundReport:
    """Brackets of the approximation theorems, term by term, without the
    unknown constants."""
    missing = [k for k in REQUIRED if getattr(d, k, None) is None
               or (np.isscalar(getattr(d, k)) and not np.isfinite(getattr(d, k)))]
    if missing:
        raise ValueError(f"missing diagnostic terms: {missing}")
    prov = d.provenance
    dim = d.dim
    normA = spectral_norm(d.A)
    n_t = d.n_tilde
    thm12 = [
        Term("L", d.L, prov.get("L", "exact")),
        Term("L n_tilde^{1/2} u*", d.L * np.sqrt(n_t) * d.u_star, prov.get("u_star", "exact")),
        Term("E|R1(W)|", d.R1_mean_abs, prov.get("R1_mean_abs", "exact")),
    ]
    thm32 = [
        Term("d^3 (||A||/n)^{1/2}", dim**3 * np.sqrt(normA / d.n)),
        Term("d^4 eps1", dim**4 * d.eps1, prov.get("eps1", "exact")),
        Term("d^{1/4} E|R1(W)|", dim**0.25 * d.R1_mean_abs, prov.get("R1_mean_abs", "exact")),
        Term("d^{1/2} E||R2(W)||_1", dim**0.5 * d.R2_l1_mean, prov.get("R2_l1_mean", "exact")),
        Term("d^3 L", dim**3 * d.L, prov.get("L", "exact")),
        Term("d^2 E{|xi|^3 eps1(xi)}", dim**2 * d.E_xi3_eps1, prov.get("eps1_xi_max", "exact")),
    ]
    lam_bar = float(np.trace(d.sigma2)) / dim
    cor = [
        Term("Lambda_bar d^{5/2} u*", lam_bar * dim**2.5 * d.u_star, "bound"),
        Term("Lambda_bar^{3/2} d^{7/2} L n_tilde^{1/2} (u_tilde* + 2 u*)",
             lam_bar**1.5 * dim**3.5 * d.L * np.sqrt(n_t) * (d.u_tilde_star + 2 * d.u_star), "bound"),
    ]
    v = second_moment_ratio(law, d.n, d.Sigma) if law is not None else float("nan")
    return BoundReport(model_id or d.label, d.as_dict(), thm12, thm32, cor, v, list(d.flags))
