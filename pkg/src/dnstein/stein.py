"""The discrete Stein operator, forward differences, restricted sup-norms and
numerical checks of the integration-by-parts inequalities for DN."""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Callable, NamedTuple

import numpy as np

from . import constants
from .constants import paper_constants, psi_sigma
from .dnormal import CheckLine, CheckReport, DiscreteNormal
from .matrixcore import (
    SigmaNorm,
    check_spd,
    lyapunov_residual,
    lyapunov_solve,
    spectral_norm,
)

BALL_CAP = 2**24
BOUNDARY_RTOL = 1e-12


# ---------------------------------------------------------------------------
# triples

@dataclass(frozen=True, eq=False)
class SteinTriple:
    """(n, c, A, sigma2) with Sigma solving A Sigma + Sigma A^T + sigma2 = 0."""

    n: float
    c: np.ndarray
    A: np.ndarray
    sigma2: np.ndarray
    Sigma: np.ndarray
    Lambda_bar: float
    delta0: float
    eta0: float
    _norm: SigmaNorm = field(repr=False, compare=False, default=None)

    @classmethod
    def build(cls, n, c, A, sigma2, Sigma=None):
        A = np.atleast_2d(np.asarray(A, dtype=float))
        sigma2 = check_spd(sigma2, "sigma2")
        d = A.shape[0]
        c = np.broadcast_to(np.asarray(c, dtype=float), (d,)).copy()
        if Sigma is None:
            Sigma = lyapunov_solve(A, sigma2)
        else:
            Sigma = check_spd(Sigma, "Sigma")
            res = lyapunov_residual(A, Sigma, sigma2)
            if res > 1e-10 * np.linalg.norm(sigma2, 2):
                raise ValueError(f"Sigma does not solve the Lyapunov equation (residual {res:.3e})")
        s_eig = np.linalg.eigvalsh(Sigma)
        delta0 = min(3.0, np.linalg.eigvalsh(sigma2)[0] / (8 * spectral_norm(A) * np.sqrt(s_eig[-1])))
        eta0 = delta0 * np.sqrt(s_eig[0]) / 6.0
        return cls(float(n), c, A, sigma2, Sigma, float(np.trace(sigma2) / d),
                   float(delta0), float(eta0), SigmaNorm(Sigma))

    @property
    def dim(self):
        return self.A.shape[0]

    @property
    def lambda_min(self):
        return float(np.linalg.eigvalsh(self.Sigma)[0])

    def psi(self, x):
        """6 / (x sqrt(lambda_min(Sigma)))."""
        return psi_sigma(x, self.lambda_min)

    def norm(self, x):
        return self._norm(x)

    def scaled(self, a):
        """Same triple with (A, sigma2) multiplied by a > 0; Sigma is unchanged."""
        return SteinTriple.build(self.n, self.c, a * self.A, a * self.sigma2, self.Sigma)


# ---------------------------------------------------------------------------
# test functions

@dataclass(frozen=True, eq=False)
class TestFunction:
    """A real function on Z^d, evaluated on ``(N, d)`` integer arrays."""

    __test__ = False  # not a pytest class

    evaluator: Callable[[np.ndarray], np.ndarray]
    descriptor: tuple
    dim: int

    def __call__(self, X):
        X = np.asarray(X, dtype=np.int64)
        single = X.ndim == 1
        X2 = np.atleast_2d(X)
        if X2.shape[1] != self.dim:
            raise ValueError(f"expected {self.dim}-d points")
        out = np.asarray(self.evaluator(X2), dtype=float).reshape(len(X2))
        return float(out[0]) if single else out

    @property
    def kind(self):
        return self.descriptor[0]

    def __add__(self, other):
        return combine(1.0, self, 1.0, other)

    def __mul__(self, a):
        return combine(float(a), self, 0.0, self)

    __rmul__ = __mul__

    @classmethod
    def constant(cls, value, dim):
        return cls(lambda X: np.full(len(X), float(value)), ("constant", float(value)), dim)

    @classmethod
    def linear(cls, a, center=None):
        a = np.atleast_1d(np.asarray(a, dtype=float))
        ctr = np.zeros_like(a) if center is None else np.asarray(center, dtype=float)
        return cls(lambda X: (X - ctr) @ a, ("linear", a, ctr), len(a))

    @classmethod
    def quadratic(cls, M, center=None):
        """w -> (w - center)^T M (w - center)."""
        M = np.atleast_2d(np.asarray(M, dtype=float))
        ctr = np.zeros(M.shape[0]) if center is None else np.asarray(center, dtype=float)

        def ev(X):
            Y = X - ctr
            return np.einsum("ni,ij,nj->n", Y, M, Y)

        return cls(ev, ("quadratic", M, ctr), M.shape[0])

    @classmethod
    def indicator(cls, predicate, dim, tag="set"):
        return cls(lambda X: np.asarray(predicate(X), dtype=float), ("indicator", tag), dim)

    @classmethod
    def tabulated(cls, origin, table, fill=0.0):
        """Values from a dense array anchored at ``origin``; ``fill`` outside it."""
        origin = np.atleast_1d(np.asarray(origin, dtype=np.int64))
        table = np.asarray(table, dtype=float)
        shape = np.array(table.shape)

        def ev(X):
            idx = X - origin
            inside = np.all((idx >= 0) & (idx < shape), axis=1)
            out = np.full(len(X), float(fill))
            out[inside] = table[tuple(idx[inside].T)]
            return out

        return cls(ev, ("tabulated", tuple(origin), table.shape), len(origin))

    @classmethod
    def from_callable(cls, func, dim, tag="callable"):
        return cls(func, (tag,), dim)


def combine(a, f: TestFunction, b, g: TestFunction) -> TestFunction:
    if f.dim != g.dim:
        raise ValueError("dimension mismatch")
    return TestFunction(lambda X: a * f.evaluator(X) + b * g.evaluator(X),
                        ("combination", a, f.descriptor, b, g.descriptor), f.dim)


def random_tabulated(rng, origin, shape, bound=1.0):
    """Table of iid uniform values on [-bound, bound]."""
    return TestFunction.tabulated(origin, rng.uniform(-bound, bound, size=shape))


def _shift(d, j):
    e = np.zeros(d, dtype=np.int64)
    e[j] = 1
    return e


def diff1(h: TestFunction, j: int) -> TestFunction:
    """Forward difference h(w + e_j) - h(w)."""
    e = _shift(h.dim, j)
    if h.kind == "constant":
        return TestFunction.constant(0.0, h.dim)
    if h.kind == "linear":
        return TestFunction.constant(h.descriptor[1][j], h.dim)
    return TestFunction(lambda X: h.evaluator(X + e) - h.evaluator(X), ("diff1", j, h.descriptor), h.dim)


def diff2(h: TestFunction, j: int, k: int) -> TestFunction:
    """Second difference, symmetric in (j, k) by construction:
    h(w+e_j+e_k) - h(w+e_j) - h(w+e_k) + h(w)."""
    if h.kind in ("constant", "linear"):
        return TestFunction.constant(0.0, h.dim)
    ej, ek = _shift(h.dim, j), _shift(h.dim, k)

    def ev(X):
        return ((h.evaluator(X + ej + ek) - h.evaluator(X + ej)) -
                (h.evaluator(X + ek) - h.evaluator(X)))

    return TestFunction(ev, ("diff2", min(j, k), max(j, k), h.descriptor), h.dim)


def grad_table(h: TestFunction, X) -> np.ndarray:
    """(N, d) array of forward differences at the rows of X."""
    X = np.asarray(X, dtype=np.int64)
    base = h.evaluator(X)
    return np.stack([h.evaluator(X + _shift(h.dim, j)) - base for j in range(h.dim)], axis=1)


def stein_apply(h: TestFunction, w, t: SteinTriple):
    """(n/2) Tr(sigma2 Delta^2 h(w)) + Delta h(w)^T A (w - nc), vectorized over rows of w."""
    W = np.asarray(w, dtype=np.int64)
    single = W.ndim == 1
    W = np.atleast_2d(W)
    d = t.dim
    second = np.zeros(len(W))
    for j in range(d):
        for k in range(d):
            if t.sigma2[j, k] != 0:
                second += t.sigma2[j, k] * diff2(h, j, k).evaluator(W)
    drift = (W - t.n * t.c) @ t.A.T
    out = 0.5 * t.n * second + (grad_table(h, W) * drift).sum(axis=1)
    return float(out[0]) if single else out


# ---------------------------------------------------------------------------
# balls and restricted norms

class RestrictedNorm(NamedTuple):
    value: float
    empty: bool
    points: int


def ball_points(t: SteinTriple, radius: float) -> np.ndarray:
    """All integer X with ||X - nc||_Sigma <= radius (closed ball)."""
    center = t.n * t.c
    half = radius * np.sqrt(np.diag(t.Sigma))
    lo = np.ceil(center - half - 1e-9).astype(np.int64)
    hi = np.floor(center + half + 1e-9).astype(np.int64)
    if np.any(hi < lo):
        return np.zeros((0, t.dim), dtype=np.int64)
    cells = np.prod((hi - lo + 1).astype(float))
    if cells > BALL_CAP:
        raise ValueError(f"ball hull of {int(cells)} points exceeds cap {BALL_CAP}")
    axes = [np.arange(a, b + 1) for a, b in zip(lo, hi)]
    grid = np.stack([m.ravel() for m in np.meshgrid(*axes, indexing="ij")], axis=1)
    r = t.norm(grid - center)
    return grid[r <= radius * (1 + BOUNDARY_RTOL)]


def restricted_norm(f: TestFunction, eta: float, t: SteinTriple, variant: str = "value") -> RestrictedNorm:
    """max |f| (or max_j |Delta_j f|, max_{j,k} |Delta^2_jk f|) over the ball of
    Sigma-radius n*eta around nc."""
    if eta <= 0:
        raise ValueError("eta must be positive")
    pts = ball_points(t, t.n * eta)
    if len(pts) == 0:
        return RestrictedNorm(0.0, True, 0)
    if variant == "value":
        vals = np.abs(f.evaluator(pts))
    elif variant == "diff1":
        vals = np.abs(grad_table(f, pts))
    elif variant == "diff2":
        vals = np.abs(np.stack([diff2(f, j, k).evaluator(pts)
                                for j in range(t.dim) for k in range(j, t.dim)], axis=1))
    else:
        raise ValueError(f"unknown variant {variant!r}")
    return RestrictedNorm(float(vals.max()), False, len(pts))


def indicator_ball(w, delta: float, t: SteinTriple):
    """1 iff ||w - nc||_Sigma <= n delta / 3 (closed)."""
    if delta <= 0:
        raise ValueError("delta must be positive")
    W = np.asarray(w, dtype=float)
    r = t.norm(np.atleast_2d(W) - t.n * t.c)
    out = (r <= t.n * delta / 3.0 * (1 + BOUNDARY_RTOL)).astype(np.int64)
    return int(out[0]) if W.ndim == 1 else out


# ---------------------------------------------------------------------------
# integration-by-parts checks

@dataclass
class LemmaCheck:
    part: str
    lhs: float
    lhs_err: float
    rhs: float
    n_threshold: float
    threshold_met: bool
    warnings: list

    @property
    def margin(self):
        """rhs - (lhs + truncation error bar); nonnegative means verified."""
        return self.rhs - (self.lhs + self.lhs_err)

    def as_dict(self):
        return {"part": self.part, "lhs": self.lhs, "lhs_err": self.lhs_err, "rhs": self.rhs,
                "margin": self.margin, "n_threshold": self.n_threshold,
                "threshold_met": self.threshold_met, "warnings": list(self.warnings)}


def _consistent(dn: DiscreteNormal, t: SteinTriple):
    if (abs(dn.n - t.n) > 1e-12 * max(1.0, t.n) or not np.allclose(dn.c, t.c)
            or not np.allclose(dn.Sigma, t.Sigma, rtol=1e-10, atol=1e-12)):
        raise ValueError("DiscreteNormal and SteinTriple disagree on (n, c, Sigma)")


def lemma22_threshold(t: SteinTriple, delta: float):
    table = paper_constants(4, delta, t.Sigma)
    return max(table.lemma22_n, t.psi(delta)), table


def lemma22_check(dn: DiscreteNormal, t: SteinTriple, f: TestFunction, b_or_B,
                  delta: float, part: str) -> LemmaCheck:
    """Exact LHS and explicit RHS of the three integration-by-parts inequalities."""
    _consistent(dn, t)
    if part not in ("a", "b", "c"):
        raise ValueError("part must be 'a', 'b' or 'c'")
    n, d = t.n, t.dim
    X = dn.pmf.points
    w = dn.pmf.probs
    ind = indicator_ball(X, delta, t).astype(float)
    Y = X - n * t.c
    G = grad_table(f, X)
    fv = f.evaluator(X)
    Sinv = np.linalg.inv(t.Sigma)
    thresh, table = lemma22_threshold(t, delta)
    eta = delta / 2.0
    fnorm = restricted_norm(f, eta, t, "value").value
    if part == "a":
        b = np.atleast_1d(np.asarray(b_or_B, dtype=float))
        integrand = (G @ b) - fv * (Y @ Sinv @ b) / n
        rhs = np.sqrt(d) * table.lemma22_C1 / n * np.abs(b).sum() * fnorm
    else:
        B = np.atleast_2d(np.asarray(b_or_B, dtype=float))
        quad = np.einsum("ni,ij,nj->n", Y, Sinv @ B, Y) / n - np.trace(B)
        integrand = np.einsum("ni,ij,nj->n", G, B, Y) - fv * quad
        dnorm = restricted_norm(f, eta, t, "diff1").value
        tail = np.abs(np.diag(B)).sum() * dnorm
        if part == "b":
            rhs = np.sqrt(d) * table.lemma22_C2 / np.sqrt(n) * np.abs(B).sum() * fnorm + tail
        else:
            rows = np.sqrt((B**2).sum(axis=1)).sum()
            rhs = d * table.lemma22_C3 / np.sqrt(n) * rows * fnorm + tail
    vals = integrand * ind
    lhs = abs(float(w @ vals))
    sup = float(np.abs(vals).max(initial=0.0))
    lhs_err = 2.0 * dn.discarded_mass * sup
    notes = []
    if n < d**4:
        notes.append(f"n={n:g} below the blanket assumption n >= d^4 = {d**4}")
    return LemmaCheck(part, lhs, lhs_err, float(rhs), float(thresh), bool(n >= thresh), notes)


class Condition3(NamedTuple):
    lhs: float
    bracket: float
    lhs_err: float

    @property
    def ratio(self):
        return self.lhs / self.bracket if self.bracket > 0 else float("nan")


def thm21_condition3(dn: DiscreteNormal, t: SteinTriple, h: TestFunction, delta: float) -> Condition3:
    """|E{A_n h(W) I[||W - nc|| <= n delta / 3]}| and the norm bracket
    d^{5/2} n^{-1/2} Lambda_bar (||h|| + n^{1/2} ||Delta h||) on the n delta / 2 ball."""
    _consistent(dn, t)
    X = dn.pmf.points
    vals = stein_apply(h, X, t) * indicator_ball(X, delta, t)
    lhs = abs(float(dn.pmf.probs @ vals))
    err = 2.0 * dn.discarded_mass * float(np.abs(vals).max(initial=0.0))
    eta = delta / 2.0
    hn = restricted_norm(h, eta, t, "value").value
    dh = restricted_norm(h, eta, t, "diff1").value
    d, n = t.dim, t.n
    bracket = d**2.5 / np.sqrt(n) * t.Lambda_bar * (hn + np.sqrt(n) * dh)
    return Condition3(lhs, float(bracket), err)


def lemma21_report(dn: DiscreteNormal, l_max: int = 4) -> CheckReport:
    from .dnormal import dn_moment_check

    return dn_moment_check(dn, l_max)


def translate_bound(dn: DiscreteNormal) -> list[CheckLine]:
    """d_TV(W, W + e_j) against C^{(1)} n^{-1/2} per axis."""
    from .dnormal import dn_translate_tv

    table = constants.paper_constants(4, 1.0, dn.Sigma)
    pre = dn.n >= max(table.lemma22_n, psi_sigma(1.0, table.lambda_min))
    out = []
    for j in range(dn.dim):
        tv = dn_translate_tv(dn, j)
        out.append(CheckLine(f"translate[j={j}]", tv.value + tv.err,
                             table.thm21_C1_per_axis[j] / np.sqrt(dn.n), bool(pre)))
    return out


def warn_small_n(n, d):
    if n < d**4:
        warnings.warn(f"n={n:g} is below d^4={d**4}; checks remain informative but outside the stated regime",
                      stacklevel=2)


# ---------------------------------------------------------------------------
# suites over parameter grids

def default_sigmas(d):
    """I and diag(1, 4, 1, ..); in one dimension that is {1, 4}."""
    scaled = np.eye(d)
    scaled[-1, -1] = 4.0
    return [np.eye(d), scaled]


def standard_triple(n, Sigma, c=None) -> SteinTriple:
    """Triple with A = -I and sigma2 = 2 Sigma, so Sigma solves the Lyapunov equation."""
    Sigma = check_spd(Sigma, "Sigma")
    d = Sigma.shape[0]
    return SteinTriple.build(n, np.zeros(d) if c is None else c, -np.eye(d), 2.0 * Sigma, Sigma)


def lemma21_suite(dims=(1, 2), ns=(4, 16, 64), sigmas=None, l_max=4, tail_tol=1e-12) -> list:
    """Moment inequalities for DN over a grid; one (config, CheckReport) per DN."""
    out = []
    for d in dims:
        for S in (sigmas or default_sigmas(d)):
            S = np.atleast_2d(S)
            if S.shape[0] != d:
                continue
            for n in ns:
                from .dnormal import dn_build

                dn = dn_build(n, np.zeros(d), S, tail_tol=tail_tol)
                out.append(({"d": d, "n": n, "Sigma": np.diag(S).tolist()}, lemma21_report(dn, l_max)))
    return out


def lemma22_suite(dims=(1, 2), ns=(64, 256), deltas=(0.5, 1.0), sigmas=None, parts=("a", "b", "c"),
                  trials=20, seed=0, tail_tol=1e-12) -> list:
    """Integration-by-parts inequalities for random bounded tabulated test
    functions and random b, B; returns (config, LemmaCheck) pairs."""
    from .dnormal import dn_build

    rng = np.random.default_rng(seed)
    out = []
    for d in dims:
        for S in (sigmas or default_sigmas(d)):
            S = np.atleast_2d(S)
            if S.shape[0] != d:
                continue
            for n in ns:
                dn = dn_build(n, np.zeros(d), S, tail_tol=tail_tol)
                t = standard_triple(n, S)
                lo, shape = dn.pmf.bounding_box()
                shape = np.asarray(shape)
                for delta in deltas:
                    for k in range(trials):
                        f = random_tabulated(rng, lo - 1, shape + 2)
                        b = rng.uniform(-1, 1, size=d)
                        B = rng.uniform(-1, 1, size=(d, d))
                        for part in parts:
                            arg = b if part == "a" else B
                            chk = lemma22_check(dn, t, f, arg, delta, part)
                            cfg = {"d": d, "n": n, "Sigma": np.diag(S).tolist(), "delta": delta,
                                   "trial": k}
                            out.append((cfg, chk))
    return out


def condition3_suite(dims=(1, 2), ns=(16, 64, 256), delta=1.0, trials=5, seed=0, tail_tol=1e-12) -> list:
    """Ratios |E A_n h I[ball]| / bracket for random tabulated h under DN."""
    from .dnormal import dn_build

    rng = np.random.default_rng(seed)
    out = []
    for d in dims:
        S = np.eye(d)
        for n in ns:
            dn = dn_build(n, np.zeros(d), S, tail_tol=tail_tol)
            t = standard_triple(n, S)
            lo, shape = dn.pmf.bounding_box()
            shape = np.asarray(shape)
            for k in range(trials):
                h = random_tabulated(rng, lo - 2, shape + 4)
                out.append(({"d": d, "n": n, "delta": delta, "trial": k},
                            thm21_condition3(dn, t, h, delta)))
    return out
