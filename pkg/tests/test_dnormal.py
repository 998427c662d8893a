import numpy as np
import pytest
from scipy.stats import norm

from dnstein.dnormal import (GaussianParams, TruncationError, box_probabilities, box_probability, dn_build,
                             dn_moment_check, dn_translate_tv, tv_to_dn, tv_to_gaussian_boxes)
from dnstein.lattice import LatticePmf, convolve_power
from dnstein.matrixcore import NotPositiveDefinite


def riemann_box(i, mean, cov, step=1e-3):
    """Midpoint rule on the unit box around i."""
    t = np.arange(-0.5 + step / 2, 0.5, step)
    X, Y = np.meshgrid(i[0] + t - mean[0], i[1] + t - mean[1], indexing="ij")
    P = np.linalg.inv(cov)
    q = P[0, 0] * X**2 + 2 * P[0, 1] * X * Y + P[1, 1] * Y**2
    dens = np.exp(-0.5 * q) / (2 * np.pi * np.sqrt(np.linalg.det(cov)))
    return dens.sum() * step**2


def test_box_examples():
    g1 = GaussianParams(np.zeros(1), np.eye(1))
    assert box_probability(np.array([0]), g1) == pytest.approx(norm.cdf(0.5) - norm.cdf(-0.5), abs=1e-15)
    g2 = GaussianParams(np.array([0.3, -1.0]), np.diag([2.0, 5.0]))
    a = box_probability(np.array([1, -2]), g2)
    b = (norm.cdf(1.5, 0.3, np.sqrt(2)) - norm.cdf(0.5, 0.3, np.sqrt(2))) * (
        norm.cdf(-1.5, -1, np.sqrt(5)) - norm.cdf(-2.5, -1, np.sqrt(5)))
    assert a == pytest.approx(b, abs=1e-15)


def test_correlated_box_against_riemann():
    cov = np.array([[2.0, 1.0], [1.0, 2.0]])
    g = GaussianParams(np.zeros(2), cov)
    for i in ([0, 0], [1, -1], [2, 1]):
        i = np.array(i)
        assert abs(box_probability(i, g) - riemann_box(i, np.zeros(2), cov)) <= 1e-8


def test_nondiagonal_box_matches_cdf_differences():
    from scipy.stats import multivariate_normal

    cov = np.array([[1.5, 0.4], [0.4, 1.0]])
    g = GaussianParams(np.zeros(2), cov)
    mvn = multivariate_normal(np.zeros(2), cov)
    for i in ([0, 0], [1, 1]):
        lo, hi = np.array(i) - 0.5, np.array(i) + 0.5
        ref = mvn.cdf(hi) - mvn.cdf([lo[0], hi[1]]) - mvn.cdf([hi[0], lo[1]]) + mvn.cdf(lo)
        assert box_probability(np.array(i), g) == pytest.approx(ref, abs=1e-6)


def test_bad_covariance():
    with pytest.raises(NotPositiveDefinite):
        GaussianParams(np.zeros(2), np.array([[1.0, 2.0], [2.0, 1.0]]))


def test_dn_build_examples():
    dn = dn_build(9, [0.0], [[1.0]])
    assert dn.pmf.prob([0]) == pytest.approx(norm.cdf(1 / 6) - norm.cdf(-1 / 6), abs=1e-15)
    assert dn.pmf.prob([0]) == pytest.approx(0.1324, abs=1e-4)
    assert 1 - 1e-9 <= dn.pmf.mass + dn.discarded_mass <= 1 + 1e-9
    assert dn.discarded_mass <= 1e-10


def test_symmetry_is_exact():
    dn = dn_build(16, [0.0, 0.0], [[1.0, 0.4], [0.4, 2.0]])
    pts = dn.pmf.points
    assert np.array_equal(dn.pmf.prob_many(pts), dn.pmf.prob_many(-pts))


def test_marginals_of_product_case():
    dn2 = dn_build(4, [0.0, 0.0], np.eye(2))
    dn1 = dn_build(4, [0.0], [[1.0]])
    for axis in (0, 1):
        m = dn2.pmf.marginal([axis])
        pts = dn1.pmf.points
        assert np.abs(m.prob_many(pts) - dn1.pmf.prob_many(pts)).max() <= 1e-10


def test_truncation_mass_and_support():
    dn = dn_build(16, [0.5, -0.25], [[1.0, 0.3], [0.3, 1.0]], tail_tol=1e-8)
    assert dn.pmf.mass >= 1 - 1e-8
    assert dn.pmf.mass + dn.discarded_mass >= 1 - 1e-9
    with pytest.raises(ValueError):
        dn_build(4, [0.0], [[1.0]], tail_tol=1e-3)
    with pytest.raises(TruncationError):
        dn_build(1e7, [0.0, 0.0, 0.0], np.eye(3))


def test_renormalize_flag():
    dn = dn_build(4, [0.0], [[1.0]], tail_tol=1e-6, renormalize=True)
    assert dn.pmf.mass == pytest.approx(1.0, abs=1e-14)


def test_translate_tv_oracle():
    dn = dn_build(9, [0.0], [[1.0]], tail_tol=1e-12)
    i = np.arange(-60, 61)
    boxes = norm.cdf((i + 0.5) / 3) - norm.cdf((i - 0.5) / 3)
    oracle = 0.5 * np.abs(np.diff(np.concatenate([[0], boxes, [0]]))).sum()
    tv = dn_translate_tv(dn, 0)
    assert abs(tv.value - oracle) <= tv.err + 1e-14
    assert dn_translate_tv(dn_build(256, [0.0], [[1.0]]), 0).value < dn_translate_tv(
        dn_build(16, [0.0], [[1.0]]), 0).value


def test_translate_tv_product_factorizes():
    dn2 = dn_build(16, [0.0, 0.0], np.diag([1.0, 3.0]))
    dn1 = dn_build(16, [0.0], [[3.0]])
    assert dn_translate_tv(dn2, 1).value == pytest.approx(dn_translate_tv(dn1, 0).value, abs=1e-10)


def test_moment_check_examples():
    dn = dn_build(16, [0.0], [[1.0]], tail_tol=1e-12)
    rep = dn_moment_check(dn)
    b = next(ln for ln in rep.lines if ln.name == "b[j=0]")
    assert b.rhs == pytest.approx(32.5)
    a2 = next(ln for ln in rep.lines if ln.name == "a[l=2]")
    assert a2.rhs == pytest.approx(4 * np.sqrt(3) * 16)
    rep = dn_moment_check(dn_build(64, [0.0, 0.0], np.eye(2), tail_tol=1e-12))
    assert rep.ok and all(ln.margin > 0 for ln in rep.lines)


def test_tv_routes_agree():
    """Dense DN subtraction and the sparse box route give the same TV."""
    W = convolve_power(LatticePmf.uniform([-1, 0, 1]), 20)
    S = np.array([[2 / 3]])
    dn = dn_build(20, [0.0], S, tail_tol=1e-12)
    tv1, err1, slack = tv_to_dn(W, dn)
    tv2 = tv_to_gaussian_boxes(W, dn.params)
    assert err1 >= slack
    assert abs(tv1 - tv2.value) <= err1 + tv2.err
    q = box_probabilities(W.points, dn.params)
    assert abs(tv2.value - (0.5 * np.abs(W.probs - q).sum() + 0.5 * (1 - q.sum()))) < 1e-15
