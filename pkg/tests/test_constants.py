from math import exp, sqrt

import numpy as np
import pytest

from dnstein.constants import C, C_prime, k, paper_constants, psi_sigma


def test_gaussian_moment_table():
    assert [k(l) for l in (1, 2, 3)] == [1, 3, 15]
    assert C(2) == pytest.approx(4 * sqrt(3))
    assert C_prime(2) == 24


def test_table_for_identity():
    t = paper_constants(4, 1.0, np.eye(2))
    assert t.xi_star == pytest.approx(1 / 3 + 1.5)
    assert t.C1 == pytest.approx(6**4 * C(4))
    assert t.C2 == pytest.approx(2 * exp(1 / 3 + 1.5))
    assert t.lemma22_C1 == pytest.approx(t.C1 + t.C2 * (1 + C_prime(1) * 2))
    assert t.lemma22_C2 == pytest.approx(t.C3 + t.C4)
    assert t.lemma22_C3 == pytest.approx(t.C3p + t.C4p)
    assert t.lemma22_n == 16
    assert len(t.thm21_C1_per_axis) == 2 and t.thm21_C1 == max(t.thm21_C1_per_axis)


def test_constants_decrease_with_delta():
    a = paper_constants(4, 0.5, np.eye(1))
    b = paper_constants(4, 1.0, np.eye(1))
    assert a.C1 > b.C1 and a.C3 > b.C3
    # the translate constant always uses delta = 1
    assert a.thm21_C1 == pytest.approx(b.thm21_C1)


def test_psi_sigma():
    assert psi_sigma(2.0, 4.0) == pytest.approx(1.5)
    with pytest.raises(ValueError):
        paper_constants(4, 0.0, np.eye(1))
