"""Sums of independent integer vectors with the Stein resampling pair
W' = W - Y_K + Y'_K and the Mineka coupling of W with its unit translate."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..lattice import LatticePmf, convolve, convolve_all, convolve_power, translate_tv
from ..pairs import PairLaw


def _key(p: LatticePmf):
    return (p.points.tobytes(), p.probs.tobytes(), p.points.shape)


@dataclass(eq=False)
class IndependentSumModel:
    summands: list
    W: LatticePmf
    mu_i: np.ndarray
    S_i: np.ndarray
    gamma_i: np.ndarray
    u_i: np.ndarray
    eps1_tilde: float
    _loo: dict = field(default_factory=dict, repr=False)
    _pair: PairLaw | None = field(default=None, repr=False)

    @property
    def m(self):
        return len(self.summands)

    @property
    def dim(self):
        return self.W.dim

    @property
    def mu(self):
        return self.mu_i.sum(axis=0)

    @property
    def S(self):
        return self.S_i.sum(axis=0)

    @property
    def Gamma(self):
        return float(self.gamma_i.sum())

    @property
    def s_m(self):
        return float(self.u_i.sum())

    @property
    def s_tilde_m(self):
        return float(self.u_i.sum() - self.u_i.max())

    @property
    def A(self):
        """Regression matrix for n = m: A / n = -I / m."""
        return -np.eye(self.dim)

    @property
    def n(self):
        return float(self.m)

    @property
    def sigma2(self):
        return 2.0 * self.S / self.m

    def leave_one_out(self, i) -> LatticePmf:
        return self._loo[i]

    @property
    def pair(self) -> PairLaw:
        if self._pair is None:
            self._pair = _sum_pair(self)
        return self._pair

    def jump_law(self) -> LatticePmf:
        """L(xi) = m^{-1} sum_i L(Y_i' - Y_i)."""
        pts, prs = [], []
        for Y in self.summands:
            diff = (Y.points[None, :, :] - Y.points[:, None, :]).reshape(-1, self.dim)
            pts.append(diff)
            prs.append(np.outer(Y.probs, Y.probs).ravel() / self.m)
        return LatticePmf(np.concatenate(pts), np.concatenate(prs))


def _summand_stats(Y: LatticePmf):
    x = Y.points.astype(float)
    mu = Y.probs @ x
    dev = x - mu
    S = (dev * Y.probs[:, None]).T @ dev
    gamma = float(Y.probs @ np.sqrt((dev**2).sum(axis=1)) ** 3)
    u = min(1.0 - translate_tv(Y, j) for j in range(Y.dim))
    return mu, S, gamma, u


def build_sum_model(summands, with_pair: bool = True) -> IndependentSumModel:
    summands = list(summands)
    if not summands:
        raise ValueError("need at least one summand")
    d = summands[0].dim
    if any(Y.dim != d for Y in summands):
        raise ValueError("summands have different dimensions")
    stats = {}
    for Y in summands:
        stats.setdefault(_key(Y), _summand_stats(Y))
    rows = [stats[_key(Y)] for Y in summands]
    m = len(summands)
    # leave-one-out laws from prefix and suffix convolutions; identical
    # summands share one law
    point0 = LatticePmf.point_mass(np.zeros(d, dtype=np.int64))
    loo = {}
    if len({_key(Y) for Y in summands}) == 1:
        rest = convolve_power(summands[0], m - 1) if m > 1 else point0
        W = convolve(rest, summands[0])
        loo = {i: rest for i in range(m)}
    else:
        prefix = [point0]
        for Y in summands[:-1]:
            prefix.append(convolve(prefix[-1], Y))
        suffix = [point0] * m
        acc = point0
        for i in range(m - 1, 0, -1):
            acc = convolve(acc, summands[i])
            suffix[i - 1] = acc
        loo = {i: convolve(prefix[i], suffix[i]) for i in range(m)}
        W = convolve_all(summands)
    eps_t = 0.0
    seen = {}
    for i in range(m):
        k = id(loo[i])
        if k not in seen:
            seen[k] = max(translate_tv(loo[i], j) for j in range(d))
        eps_t = max(eps_t, seen[k])
    model = IndependentSumModel(
        summands, W,
        np.array([r[0] for r in rows]), np.array([r[1] for r in rows]),
        np.array([r[2] for r in rows]), np.array([r[3] for r in rows]), float(eps_t), loo,
    )
    if with_pair:
        model._pair = _sum_pair(model)
    return model


def _sum_pair(model: IndependentSumModel) -> PairLaw:
    """Joint law of (W, xi): P[W=w, xi=J] = m^{-1} sum_i sum_y P[W^(i) = w-y] p_i(y) p_i(y+J)."""
    m, d = model.m, model.dim
    ws, xs, ps = [], [], []
    groups = {}
    for i, Y in enumerate(model.summands):
        key = (_key(Y), id(model._loo[i]))
        groups[key] = groups.get(key, 0) + 1
    done = set()
    for i, Y in enumerate(model.summands):
        key = (_key(Y), id(model._loo[i]))
        if key in done:
            continue
        done.add(key)
        weight = groups[key] / m
        rest = model._loo[i]
        for a, pa in zip(Y.points, Y.probs):
            base = rest.points + a
            for b, pb in zip(Y.points, Y.probs):
                ws.append(base)
                xs.append(np.broadcast_to(b - a, base.shape))
                ps.append(rest.probs * (pa * pb * weight))
    return PairLaw.from_samples(np.concatenate(ws), np.concatenate(xs), np.concatenate(ps),
                                exchangeable=True, label=f"independent sum (m={m})")


# ---------------------------------------------------------------------------
# Mineka coupling

@dataclass
class MinekaTail:
    tail: np.ndarray  # tail[k] = P[tau > k], k = 0..horizon
    betas: np.ndarray
    never_moves: bool

    def at(self, k):
        return float(self.tail[k])


def mineka_beta(Y: LatticePmf, j: int) -> float:
    """P[Z = +e_j] = sum_X 1/2 min(p_X, p_{X + e_j}) for the lazy coupling step."""
    e = np.zeros(Y.dim, dtype=np.int64)
    e[j] = 1
    shifted = Y.prob_many(Y.points + e)
    return float(0.5 * np.minimum(Y.probs, shifted).sum())


def mineka_tail_from_betas(betas) -> MinekaTail:
    """Exact P[tau > k] for the lazy symmetric walk with step probabilities
    beta_i (up and down each), tau = first hitting time of +1."""
    betas = np.asarray(betas, dtype=float)
    m = len(betas)
    if np.any(betas < 0) or np.any(betas > 0.5):
        raise ValueError("step probabilities must lie in [0, 1/2]")
    # position x in {-m..0} stored at index x + m; +1 is absorbing and dropped
    prob = np.zeros(m + 1)
    prob[m] = 1.0
    tail = np.empty(m + 1)
    tail[0] = 1.0
    for k, b in enumerate(betas, start=1):
        new = (1 - 2 * b) * prob
        new[1:] += b * prob[:-1]  # up moves
        new[:-1] += b * prob[1:]  # down moves
        prob = new
        tail[k] = prob.sum()
    return MinekaTail(tail, betas, bool(np.all(betas == 0)))


def mineka_tau_tail(summands, j: int = 0, horizon: int | None = None) -> MinekaTail:
    """Tail of the coupling time for W and W + e_j built from the summands.

    ``summands`` is a list of pmfs or a ``(pmf, m)`` pair for iid summands.
    """
    if isinstance(summands, tuple):
        Y, m = summands
        betas = np.full(m, mineka_beta(Y, j))
    else:
        cache = {}
        betas = np.array([cache.setdefault(_key(Y), mineka_beta(Y, j)) for Y in summands])
    if horizon is not None:
        betas = betas[:horizon]
    return mineka_tail_from_betas(betas)
