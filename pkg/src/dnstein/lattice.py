"""Exact probability mass functions with finite support on the integer lattice Z^d.

A :class:`LatticePmf` stores its support sparsely as a lexicographically sorted
``(N, d)`` integer array together with a matching vector of positive masses.
Arithmetic that benefits from a dense layout (convolution) converts to a dense
bounding box when the box is small enough and converts back afterwards.
"""

from __future__ import annotations

import io
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

PRUNE_THRESHOLD = 1e-15
DENSE_CELL_CAP = 2**22
EXACT_TOLERANCE = 1e-12


class DimensionMismatch(ValueError):
    pass


def _sort_unique(points, probs):
    """Merge duplicate points (summing mass) and sort lexicographically."""
    points = np.asarray(points, dtype=np.int64)
    probs = np.asarray(probs, dtype=np.float64)
    if points.ndim == 1:
        points = points[:, None]
    if len(points) == 0:
        return points.reshape(0, points.shape[1]), probs.reshape(0)
    uniq, inverse = np.unique(points, axis=0, return_inverse=True)
    merged = np.bincount(inverse.ravel(), weights=probs, minlength=len(uniq))
    return uniq, merged


@dataclass(frozen=True, eq=False)
class LatticePmf:
    """Finite-support pmf on Z^d.

    ``tolerance`` records how far the total mass may legitimately sit from 1
    (pruned or truncated mass).  Zero-mass points are never stored.
    """

    points: np.ndarray
    probs: np.ndarray
    tolerance: float = EXACT_TOLERANCE
    _index: dict = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self):
        pts, prs = _sort_unique(self.points, self.probs)
        keep = prs > 0
        pts, prs = pts[keep], prs[keep]
        if np.any(prs < 0):
            raise ValueError("negative probability")
        pts.setflags(write=False)
        prs.setflags(write=False)
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "probs", prs)
        object.__setattr__(self, "tolerance", float(self.tolerance))

    # construction -------------------------------------------------------

    @classmethod
    def from_dict(cls, mapping, dim=None, tolerance=EXACT_TOLERANCE):
        items = list(mapping.items())
        if not items:
            if dim is None:
                raise ValueError("dim required for an empty pmf")
            return cls(np.zeros((0, dim), dtype=np.int64), np.zeros(0), tolerance)
        pts = [np.atleast_1d(np.asarray(k, dtype=np.int64)) for k, _ in items]
        return cls(np.array(pts), np.array([v for _, v in items], dtype=float), tolerance)

    @classmethod
    def point_mass(cls, x):
        x = np.atleast_1d(np.asarray(x, dtype=np.int64))
        return cls(x[None, :], np.array([1.0]))

    @classmethod
    def uniform(cls, values):
        """Uniform law on the given 1-d integer values (or rows of points)."""
        pts = np.asarray(values, dtype=np.int64)
        if pts.ndim == 1:
            pts = pts[:, None]
        return cls(pts, np.full(len(pts), 1.0 / len(pts)))

    @classmethod
    def from_dense(cls, origin, array, tolerance=EXACT_TOLERANCE):
        array = np.asarray(array, dtype=float)
        idx = np.argwhere(array > 0)
        pts = idx + np.asarray(origin, dtype=np.int64)[None, :]
        return cls(pts, array[tuple(idx.T)], tolerance)

    # basic accessors ----------------------------------------------------

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    @property
    def size(self) -> int:
        return len(self.probs)

    @property
    def mass(self) -> float:
        return float(self.probs.sum())

    def __len__(self):
        return self.size

    def _lookup(self):
        if self._index is None:
            object.__setattr__(
                self, "_index", {tuple(p): i for i, p in enumerate(self.points.tolist())}
            )
        return self._index

    def prob(self, x) -> float:
        i = self._lookup().get(tuple(np.atleast_1d(np.asarray(x)).tolist()))
        return 0.0 if i is None else float(self.probs[i])

    def prob_many(self, pts) -> np.ndarray:
        index = self._lookup()
        out = np.zeros(len(pts))
        for r, p in enumerate(np.asarray(pts, dtype=np.int64).tolist()):
            i = index.get(tuple(p))
            if i is not None:
                out[r] = self.probs[i]
        return out

    def as_dict(self):
        return {tuple(p): float(q) for p, q in zip(self.points.tolist(), self.probs)}

    def bounding_box(self):
        """(lower corner, shape) of the smallest integer box holding the support."""
        lo = self.points.min(axis=0)
        hi = self.points.max(axis=0)
        return lo, tuple(int(s) for s in hi - lo + 1)

    def to_dense(self):
        lo, shape = self.bounding_box()
        arr = np.zeros(shape)
        arr[tuple((self.points - lo).T)] = self.probs
        return lo, arr

    def marginal(self, axes) -> "LatticePmf":
        axes = list(np.atleast_1d(axes))
        return LatticePmf(self.points[:, axes], self.probs, self.tolerance)

    def map_points(self, func) -> "LatticePmf":
        """Push forward under an integer map applied to the ``(N, d)`` point array."""
        return LatticePmf(func(self.points), self.probs, self.tolerance)

    def expect(self, values) -> float:
        """Sum of ``values * probs`` where ``values`` is aligned with ``points``."""
        return float(np.dot(np.asarray(values, dtype=float), self.probs))

    def __repr__(self):
        return f"LatticePmf(dim={self.dim}, size={self.size}, mass={self.mass:.15g})"


def _check_dims(p: LatticePmf, q: LatticePmf):
    if p.dim != q.dim:
        raise DimensionMismatch(f"dimension mismatch: {p.dim} vs {q.dim}")


def _dense_convolve(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    # Direct (non-FFT) full convolution.  Loop order is fixed so results are
    # bit-reproducible.
    if a.ndim == 1:
        return np.convolve(a, b)
    out_shape = tuple(x + y - 1 for x, y in zip(a.shape, b.shape))
    out = np.zeros(out_shape)
    if a.ndim == 2:
        for i in range(a.shape[0]):
            row = a[i]
            if not row.any():
                continue
            for k in range(b.shape[0]):
                out[i + k] += np.convolve(row, b[k])
        return out
    # higher dimensions: shift-and-add over the nonzeros of the sparser operand
    if np.count_nonzero(a) > np.count_nonzero(b):
        a, b = b, a
    for idx in np.argwhere(a > 0):
        sl = tuple(slice(i, i + s) for i, s in zip(idx, b.shape))
        out[sl] += a[tuple(idx)] * b
    return out


def _prune(points, probs, threshold):
    small = probs < threshold
    return points[~small], probs[~small], float(probs[small].sum())


def convolve(p: LatticePmf, q: LatticePmf, prune: float = PRUNE_THRESHOLD) -> LatticePmf:
    """Law of X + Y for independent X ~ p, Y ~ q.

    Masses below ``prune`` are dropped and their total added to ``tolerance``.
    """
    _check_dims(p, q)
    if p.size == 0 or q.size == 0:
        return LatticePmf(np.zeros((0, p.dim), dtype=np.int64), np.zeros(0),
                          p.tolerance + q.tolerance)
    lo_p, shp_p = p.bounding_box()
    lo_q, shp_q = q.bounding_box()
    cells = int(np.prod([a + b - 1 for a, b in zip(shp_p, shp_q)], dtype=float))
    tol = p.tolerance + q.tolerance
    if cells <= DENSE_CELL_CAP:
        _, da = p.to_dense()
        _, db = q.to_dense()
        out = _dense_convolve(da, db)
        idx = np.argwhere(out > 0)
        pts = idx + (lo_p + lo_q)[None, :]
        prs = out[tuple(idx.T)]
    else:
        pts = (p.points[:, None, :] + q.points[None, :, :]).reshape(-1, p.dim)
        prs = np.outer(p.probs, q.probs).ravel()
        pts, prs = _sort_unique(pts, prs)
    pruned = 0.0
    if prune > 0:
        pts, prs, pruned = _prune(pts, prs, prune)
    return LatticePmf(pts, prs, tol + pruned)


def convolve_power(p: LatticePmf, m: int, prune: float = PRUNE_THRESHOLD) -> LatticePmf:
    """m-fold self-convolution by binary powering."""
    if m < 0:
        raise ValueError("m must be nonnegative")
    result = LatticePmf.point_mass(np.zeros(p.dim, dtype=np.int64))
    base = p
    first = True
    while m:
        if m & 1:
            result = base if first else convolve(result, base, prune)
            first = False
        m >>= 1
        if m:
            base = convolve(base, base, prune)
    return result


def convolve_all(pmfs, prune: float = PRUNE_THRESHOLD) -> LatticePmf:
    pmfs = list(pmfs)
    if not pmfs:
        raise ValueError("need at least one pmf")
    out = pmfs[0]
    for q in pmfs[1:]:
        out = convolve(out, q, prune)
    return out


def translate(p: LatticePmf, v) -> LatticePmf:
    v = np.atleast_1d(np.asarray(v, dtype=np.int64))
    if v.shape != (p.dim,):
        raise DimensionMismatch(f"shift of length {v.size} for a {p.dim}-d pmf")
    return LatticePmf(p.points + v[None, :], p.probs, p.tolerance)


def unit_vector(d: int, j: int) -> np.ndarray:
    e = np.zeros(d, dtype=np.int64)
    e[j] = 1
    return e


def aligned(p: LatticePmf, q: LatticePmf):
    """Union support of p and q with both mass vectors laid out on it."""
    _check_dims(p, q)
    pts = np.concatenate([p.points, q.points])
    uniq, inv = np.unique(pts, axis=0, return_inverse=True)
    inv = inv.ravel()
    a = np.zeros(len(uniq))
    b = np.zeros(len(uniq))
    np.add.at(a, inv[: p.size], p.probs)
    np.add.at(b, inv[p.size:], q.probs)
    return uniq, a, b


def tv_distance(p: LatticePmf, q: LatticePmf) -> float:
    """Half the l1 distance between p and q over their union support."""
    _, a, b = aligned(p, q)
    return float(0.5 * np.abs(a - b).sum())


def translate_tv(p: LatticePmf, j: int) -> float:
    """d_TV(p, p shifted by the j-th unit vector)."""
    if p.dim == 1 and p.size:
        lo, arr = p.to_dense()
        padded = np.concatenate([[0.0], arr, [0.0]])
        return float(0.5 * np.abs(np.diff(padded)).sum())
    return tv_distance(p, translate(p, unit_vector(p.dim, j)))


@dataclass(frozen=True)
class MomentTable:
    mean: np.ndarray
    cov: np.ndarray
    # abs_moments[l] = E|x - center|^l (Euclidean); sigma_moments[l] = E ||x - center||_Sigma^l
    abs_moments: dict
    sigma_moments: dict


def moments(p: LatticePmf, center=None, metric=None, max_order: int = 3) -> MomentTable:
    """Exact moment table of p, by summation over the support."""
    x = p.points.astype(float)
    w = p.probs
    mean = w @ x
    dev = x - mean
    cov = (dev * w[:, None]).T @ dev
    center = mean if center is None else np.broadcast_to(np.asarray(center, float), (p.dim,))
    y = x - center
    r = np.sqrt((y**2).sum(axis=1))
    abs_m = {l: float(w @ r**l) for l in range(max_order + 1)}
    sig_m = {}
    if metric is not None:
        from .matrixcore import SigmaNorm

        rs = SigmaNorm(metric)(y)
        sig_m = {l: float(w @ rs**l) for l in range(max_order + 1)}
    return MomentTable(mean, cov, abs_m, sig_m)


# serialization ----------------------------------------------------------

def write_csv(p: LatticePmf, path) -> None:
    """One ``i1,...,id,prob`` row per support point after a JSON header line."""
    header = json.dumps({"dim": p.dim, "tolerance": p.tolerance})
    buf = io.StringIO()
    buf.write("# " + header + "\n")
    buf.write(",".join([f"i{k + 1}" for k in range(p.dim)] + ["prob"]) + "\n")
    for pt, pr in zip(p.points.tolist(), p.probs.tolist()):
        buf.write(",".join(str(c) for c in pt) + f",{pr!r}\n")
    Path(path).write_text(buf.getvalue())


def read_csv(path) -> LatticePmf:
    lines = Path(path).read_text().splitlines()
    if not lines or not lines[0].startswith("#"):
        raise ValueError(f"{path}: missing JSON header line")
    header = json.loads(lines[0][1:].strip())
    dim = int(header["dim"])
    rows = [ln for ln in lines[1:] if ln.strip() and not ln.startswith("i1")]
    pts = np.zeros((len(rows), dim), dtype=np.int64)
    prs = np.zeros(len(rows))
    for r, ln in enumerate(rows):
        parts = ln.split(",")
        if len(parts) != dim + 1:
            raise ValueError(f"{path}: expected {dim + 1} fields, got {len(parts)}")
        pts[r] = [int(s) for s in parts[:dim]]
        prs[r] = float(parts[dim])
    return LatticePmf(pts, prs, float(header.get("tolerance", EXACT_TOLERANCE)))
