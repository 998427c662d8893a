import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dnstein.lattice import (DimensionMismatch, LatticePmf, convolve, convolve_power, moments, read_csv,
                             translate, translate_tv, tv_distance, unit_vector, write_csv)

U3 = LatticePmf.uniform([-1, 0, 1])


@st.composite
def pmfs(draw, dim=1):
    k = draw(st.integers(1, 5))
    pts = draw(st.lists(st.tuples(*[st.integers(-4, 4)] * dim), min_size=k, max_size=k, unique=True))
    w = np.array(draw(st.lists(st.floats(0.05, 1.0), min_size=k, max_size=k)))
    return LatticePmf(np.array(pts), w / w.sum())


def test_identity_element():
    delta = LatticePmf.point_mass([0])
    assert convolve(delta, U3).as_dict() == pytest.approx(U3.as_dict())


def test_bernoulli_convolution():
    b = LatticePmf.uniform([0, 1])
    out = convolve(b, b).as_dict()
    assert out == pytest.approx({(0,): 0.25, (1,): 0.5, (2,): 0.25}, abs=1e-15)


def test_eightfold_against_path_enumeration():
    oracle = {}
    for path in itertools.product([-1, 0, 1], repeat=8):
        s = sum(path)
        oracle[(s,)] = oracle.get((s,), 0) + 1
    oracle = {k: v / 3**8 for k, v in oracle.items()}
    got = convolve_power(U3, 8).as_dict()
    assert set(got) == set(oracle)
    for k, v in oracle.items():
        assert got[k] == pytest.approx(v, abs=1e-15)


def test_power_matches_repeated_convolution_2d():
    Y = LatticePmf.from_dict({(0, 0): 0.5, (1, 0): 0.2, (0, 1): 0.3})
    a = convolve_power(Y, 5)
    b = Y
    for _ in range(4):
        b = convolve(b, Y)
    assert tv_distance(a, b) < 1e-14


def test_dimension_mismatch():
    with pytest.raises(DimensionMismatch):
        convolve(U3, LatticePmf.point_mass([0, 0]))
    with pytest.raises(DimensionMismatch):
        tv_distance(U3, LatticePmf.point_mass([0, 0]))


def test_translate_examples():
    e1 = unit_vector(2, 0)
    assert translate(LatticePmf.point_mass([0, 0]), e1).as_dict() == {(1, 0): 1.0}
    assert translate(U3, [0]).as_dict() == U3.as_dict()
    p = LatticePmf.from_dict({(0, 1): 0.25, (2, -1): 0.75})
    assert translate(translate(p, [3, -2]), [-3, 2]).as_dict() == p.as_dict()


def test_tv_examples():
    assert tv_distance(U3, U3) == 0.0
    assert tv_distance(LatticePmf.point_mass([0, 0]), LatticePmf.point_mass([1, 0])) == 1.0
    binom = LatticePmf(np.arange(5)[:, None], np.array([1, 4, 6, 4, 1]) / 16)
    # half-l1 of (1,4,6,4,1,0) - (0,1,4,6,4,1) over 16 is 12/32
    assert tv_distance(binom, translate(binom, [1])) == pytest.approx(0.375, abs=1e-15)
    assert translate_tv(binom, 0) == pytest.approx(0.375, abs=1e-15)


def test_moments_examples():
    t = moments(LatticePmf.point_mass([0, 0]), np.zeros(2), np.eye(2), 3)
    assert all(t.abs_moments[l] == 0 for l in (1, 2, 3))
    assert all(t.sigma_moments[l] == 0 for l in (1, 2, 3))
    t = moments(U3, [0], None, 3)
    assert t.cov[0, 0] == pytest.approx(2 / 3)
    assert t.abs_moments[3] == pytest.approx(2 / 3)


def test_jump_chi_against_pair_enumeration():
    # resampling jump for two iid uniform{-1,0,1} summands: xi = Y' - Y of a
    # uniformly chosen summand, so L(xi) = L(Y' - Y)
    chi = 0.0
    for y, y2 in itertools.product([-1, 0, 1], repeat=2):
        chi += abs(y2 - y) ** 3 / 9
    from dnstein.models import build_sum_model

    model = build_sum_model([U3, U3])
    law = model.jump_law()
    assert moments(law, [0], None, 3).abs_moments[3] == pytest.approx(chi, abs=1e-14)


def test_moments_reject_bad_metric():
    with pytest.raises(ValueError):
        moments(U3, [0], np.array([[-1.0]]), 2)


def test_csv_roundtrip(tmp_path):
    p = LatticePmf.from_dict({(0, 1): 0.25, (2, -1): 0.75})
    write_csv(p, tmp_path / "p.csv")
    text = (tmp_path / "p.csv").read_text().splitlines()
    assert text[0].startswith("# {") and text[1] == "i1,i2,prob"
    q = read_csv(tmp_path / "p.csv")
    assert q.as_dict() == p.as_dict()
    assert q.tolerance == p.tolerance


def test_pruning_tracks_tolerance():
    p = LatticePmf.uniform(np.arange(-1, 2))
    big = convolve_power(p, 200)
    assert big.tolerance >= 1e-12
    assert abs(big.mass - 1) <= big.tolerance


@settings(max_examples=60, deadline=None)
@given(pmfs(), pmfs(), pmfs())
def test_algebraic_properties(p, q, r):
    pq, qp = convolve(p, q), convolve(q, p)
    assert tv_distance(pq, qp) <= 1e-14
    assert np.all(np.abs(pq.prob_many(pq.points) - qp.prob_many(pq.points)) <= 1e-14)
    left = convolve(convolve(p, q), r)
    right = convolve(p, convolve(q, r))
    assert np.abs(left.prob_many(left.points) - right.prob_many(left.points)).max() <= 1e-14
    assert tv_distance(p, q) == tv_distance(q, p)
    assert tv_distance(p, r) <= tv_distance(p, q) + tv_distance(q, r) + 1e-14
    assert tv_distance(convolve(p, r), convolve(q, r)) <= tv_distance(p, q) + 1e-14
    assert abs(pq.mass - 1) <= 1e-14
    assert abs(translate(p, [2]).mass - p.mass) <= 1e-14


@settings(max_examples=30, deadline=None)
@given(pmfs(dim=2), pmfs(dim=2))
def test_two_dimensional_commutativity(p, q):
    assert tv_distance(convolve(p, q), convolve(q, p)) <= 1e-14


def test_zero_mass_points_absent():
    p = LatticePmf(np.array([[0], [1]]), np.array([1.0, 0.0]))
    assert p.size == 1
