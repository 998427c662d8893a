import numpy as np
import pytest
from scipy import linalg

from dnstein.matrixcore import (NotHurwitz, NotPositiveDefinite, entrywise_l1, inv_sqrt, lyapunov_residual,
                                lyapunov_solve, sigma_norm, spectral_norm, spectral_summary,
                                sqrtm_spd, symmetric_part_flag)


def random_hurwitz(rng, d):
    M = rng.normal(size=(d, d))
    shift = np.real(np.linalg.eigvals(M)).max() + rng.uniform(0.1, 2.0)
    return M - shift * np.eye(d)


def random_spd(rng, d):
    B = rng.normal(size=(d, d))
    return B @ B.T + 0.1 * np.eye(d)


def test_summary_examples():
    s = spectral_summary(-np.eye(3))
    assert s.lambda_min == s.lambda_max == -1 and s.is_hurwitz
    assert not spectral_summary(np.eye(3)).is_hurwitz
    s = spectral_summary(np.array([[-1.0, 1.0], [0.0, -2.0]]))
    assert np.allclose(np.sort(s.eigenvalues.real), [-2, -1]) and s.is_hurwitz


def test_summary_spd_invariants(rng):
    for d in range(1, 7):
        S = random_spd(rng, d)
        s = spectral_summary(S)
        assert 0 < s.lambda_min <= s.lambda_max and s.rho >= 1
        assert s.trace >= d * s.lambda_min - 1e-12
        assert s.is_positive_definite
        M = rng.normal(size=(d, d))
        assert entrywise_l1(M) <= d**1.5 * spectral_norm(M) + 1e-10


def test_summary_rejects_nonfinite():
    with pytest.raises(ValueError):
        spectral_summary(np.array([[np.nan]]))


def test_lyapunov_examples():
    S2 = np.array([[2.0, 0.5], [0.5, 1.0]])
    assert np.allclose(lyapunov_solve(-np.eye(2), S2), 0.5 * S2, atol=1e-14)
    assert lyapunov_solve([[-3.0]], [[6.0]])[0, 0] == pytest.approx(1.0)
    A = np.array([[-1.0, 1.0], [0.0, -2.0]])
    s2 = np.diag([2.0, 4.0])
    # Kronecker oracle, written out independently
    K = np.kron(np.eye(2), A) + np.kron(A, np.eye(2))
    oracle = np.linalg.solve(K, -s2.flatten(order="F")).reshape(2, 2, order="F")
    S = lyapunov_solve(A, s2)
    assert np.allclose(S, oracle, atol=1e-14)
    assert lyapunov_residual(A, S, s2) <= 1e-12


def test_lyapunov_against_bartels_stewart(rng):
    for _ in range(50):
        d = int(rng.integers(1, 9))
        A, s2 = random_hurwitz(rng, d), random_spd(rng, d)
        S = lyapunov_solve(A, s2)
        ref = linalg.solve_continuous_lyapunov(A, -s2)
        assert np.allclose(S, ref, rtol=1e-8, atol=1e-10 * np.abs(ref).max())
        assert np.abs(S - S.T).max() <= 1e-12 * np.abs(S).max()


def test_lyapunov_scaling(rng):
    for _ in range(20):
        d = int(rng.integers(1, 6))
        A, s2 = random_hurwitz(rng, d), random_spd(rng, d)
        a = rng.uniform(0.1, 10)
        assert np.allclose(lyapunov_solve(a * A, a * s2), lyapunov_solve(A, s2), rtol=1e-10, atol=1e-10)


def test_lyapunov_errors():
    with pytest.raises(NotHurwitz):
        lyapunov_solve(np.eye(2), np.eye(2))
    with pytest.raises(NotPositiveDefinite):
        lyapunov_solve(-np.eye(2), np.diag([1.0, -1.0]))
    with pytest.raises(NotHurwitz):
        # marginally stable: eigenvalue exactly 0
        lyapunov_solve(np.diag([-1.0, 0.0]), np.eye(2))


def test_sigma_norm_examples(rng):
    x = rng.normal(size=3)
    assert sigma_norm(x, np.eye(3)) == pytest.approx(np.linalg.norm(x))
    assert sigma_norm(np.zeros(2), np.eye(2)) == 0
    assert sigma_norm(np.array([2.0, 0.0]), np.diag([4.0, 1.0])) == pytest.approx(1.0)
    with pytest.raises(NotPositiveDefinite):
        sigma_norm(x, -np.eye(3))


def test_sigma_norm_parallelogram(rng):
    for _ in range(100):
        S = random_spd(rng, 3)
        x, y = rng.normal(size=(2, 3))
        lhs = sigma_norm(x, S) ** 2 + sigma_norm(y, S) ** 2
        assert lhs >= 0.5 * sigma_norm(x + y, S) ** 2 - 1e-12


def test_inv_sqrt(rng):
    assert np.allclose(inv_sqrt(np.eye(2)), np.eye(2))
    assert np.allclose(inv_sqrt(np.diag([4.0, 9.0])), np.diag([0.5, 1 / 3]))
    S = random_spd(rng, 3)
    R = inv_sqrt(S)
    assert np.abs(R @ S @ R - np.eye(3)).max() <= 1e-10
    Q = sqrtm_spd(S)
    assert np.abs(Q @ Q - S).max() <= 1e-10
    with pytest.raises(NotPositiveDefinite):
        inv_sqrt(np.diag([1.0, 0.0]))


def test_symmetric_part_flag():
    assert not symmetric_part_flag(-np.eye(3))
    assert symmetric_part_flag(np.array([[-1.0, 10.0], [0.0, -1.0]]))
