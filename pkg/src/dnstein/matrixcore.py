"""Small dense matrix services: spectra, norms, Lyapunov solves, Sigma-norms."""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from scipy import linalg

log = logging.getLogger(__name__)

HURWITZ_TOL = -1e-12


class NotHurwitz(ValueError):
    pass


class NotPositiveDefinite(ValueError):
    pass


@dataclass(frozen=True)
class SpectralSummary:
    lambda_min: float
    lambda_max: float
    rho: float
    trace: float
    spectral_norm: float
    entrywise_l1: float
    is_hurwitz: bool
    is_positive_definite: bool
    eigenvalues: np.ndarray

    def sp_prime(self, d: int):
        """The triple {lambda_min, lambda_max, trace / d}."""
        return (self.lambda_min, self.lambda_max, self.trace / d)


def _as_square(M) -> np.ndarray:
    M = np.atleast_2d(np.asarray(M, dtype=float))
    if M.shape[0] != M.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {M.shape}")
    if not np.all(np.isfinite(M)):
        raise ValueError("matrix has non-finite entries")
    return M


def is_symmetric(M, tol=1e-12) -> bool:
    M = np.asarray(M)
    return bool(np.allclose(M, M.T, atol=tol * max(1.0, np.abs(M).max(initial=0.0)), rtol=0))


def entrywise_l1(M) -> float:
    return float(np.abs(np.asarray(M, dtype=float)).sum())


def spectral_norm(M) -> float:
    return float(np.linalg.norm(np.atleast_2d(M), 2))


def spectral_summary(M) -> SpectralSummary:
    """Eigen-quantities of M.

    Symmetric input is summarized directly.  For a general matrix the
    lambda/rho/pd fields describe the symmetric part (M + M^T)/2 while the
    Hurwitz flag uses the eigenvalues of M itself.
    """
    M = _as_square(M)
    sym = 0.5 * (M + M.T)
    try:
        sym_eigs = np.linalg.eigvalsh(sym)
        eigs = sym_eigs if is_symmetric(M) else np.linalg.eigvals(M)
    except np.linalg.LinAlgError as exc:  # pragma: no cover - LAPACK failure
        raise ValueError(f"eigen-solver failed: {exc}") from exc
    lmin, lmax = float(sym_eigs[0]), float(sym_eigs[-1])
    pd = lmin > 0
    rho = lmax / lmin if pd else float("inf")
    return SpectralSummary(
        lambda_min=lmin,
        lambda_max=lmax,
        rho=rho,
        trace=float(np.trace(M)),
        spectral_norm=spectral_norm(M),
        entrywise_l1=entrywise_l1(M),
        is_hurwitz=bool(np.all(np.real(eigs) < HURWITZ_TOL)),
        is_positive_definite=bool(pd),
        eigenvalues=np.sort_complex(np.asarray(eigs, dtype=complex)),
    )


def check_spd(M, name="matrix") -> np.ndarray:
    M = _as_square(M)
    if not is_symmetric(M, 1e-10):
        raise NotPositiveDefinite(f"{name} is not symmetric")
    M = 0.5 * (M + M.T)
    if np.linalg.eigvalsh(M)[0] <= 0:
        raise NotPositiveDefinite(f"{name} is not positive definite")
    return M


def check_hurwitz(A) -> np.ndarray:
    A = _as_square(A)
    if not np.all(np.real(np.linalg.eigvals(A)) < HURWITZ_TOL):
        raise NotHurwitz("A is not Hurwitz (some eigenvalue has real part >= -1e-12)")
    return A


def lyapunov_solve(A, sigma2) -> np.ndarray:
    """Solve A S + S A^T + sigma2 = 0 for symmetric positive definite S.

    Uses the d^2 x d^2 vectorized system (I kron A + A kron I) vec(S) = -vec(sigma2).
    """
    A = check_hurwitz(A)
    sigma2 = check_spd(sigma2, "sigma2")
    d = A.shape[0]
    if sigma2.shape != (d, d):
        raise ValueError("A and sigma2 must have the same shape")
    eye = np.eye(d)
    K = np.kron(eye, A) + np.kron(A, eye)
    try:
        vec = np.linalg.solve(K, -sigma2.reshape(-1, order="F"))
    except np.linalg.LinAlgError as exc:
        raise ValueError(f"singular Lyapunov system: {exc}") from exc
    S = vec.reshape(d, d, order="F")
    S = 0.5 * (S + S.T)
    resid = np.linalg.norm(A @ S + S @ A.T + sigma2, 2)
    if resid > 1e-10 * np.linalg.norm(sigma2, 2):
        raise ValueError(f"Lyapunov residual {resid:.3e} exceeds tolerance")
    if np.linalg.eigvalsh(S)[0] <= 0:
        raise NotPositiveDefinite("Lyapunov solution is not positive definite")
    return S


def lyapunov_residual(A, S, sigma2) -> float:
    A, S, sigma2 = (np.atleast_2d(np.asarray(M, float)) for M in (A, S, sigma2))
    return float(np.linalg.norm(A @ S + S @ A.T + sigma2, 2))


def inv_sqrt(S) -> np.ndarray:
    """Symmetric inverse square root of an SPD matrix."""
    S = check_spd(S)
    w, V = np.linalg.eigh(S)
    return (V / np.sqrt(w)) @ V.T


def sqrtm_spd(S) -> np.ndarray:
    S = check_spd(S)
    w, V = np.linalg.eigh(S)
    return (V * np.sqrt(w)) @ V.T


class SigmaNorm:
    """x -> sqrt(x^T Sigma^{-1} x), with the Cholesky factor of Sigma cached."""

    def __init__(self, Sigma):
        self.Sigma = check_spd(Sigma, "Sigma")
        self._chol = linalg.cho_factor(self.Sigma, lower=True)
        self.d = self.Sigma.shape[0]

    def __call__(self, x) -> np.ndarray | float:
        x = np.asarray(x, dtype=float)
        single = x.ndim == 1
        X = np.atleast_2d(x)
        if X.shape[-1] != self.d:
            raise ValueError(f"vector length {X.shape[-1]} does not match Sigma ({self.d})")
        # solve L y = x^T for each row; ||y||^2 = x^T Sigma^{-1} x
        Y = linalg.solve_triangular(self._chol[0], X.T, lower=True)
        r = np.sqrt((Y**2).sum(axis=0))
        return float(r[0]) if single else r


def sigma_norm(x, Sigma) -> float | np.ndarray:
    return SigmaNorm(Sigma)(x)


def symmetric_part_flag(A, rel_tol=0.05) -> bool:
    """True when ||A|| and the symmetric-part spectral radius differ by more than rel_tol."""
    A = _as_square(A)
    op = spectral_norm(A)
    sym = np.abs(np.linalg.eigvalsh(0.5 * (A + A.T))).max()
    return bool(abs(op - sym) > rel_tol * op)
