"""Explicit constants of the discrete-normal moment and integration-by-parts bounds.

All quantities are closed-form functions of the moment order ``l``, the
truncation parameter ``delta`` and the spectrum of Sigma.  Nothing here is
fitted.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from math import exp, factorial, sqrt

import numpy as np

from .matrixcore import check_spd


def k(l: int) -> int:
    """E N^{2l} for a standard normal N: (2l)! / (2^l l!)."""
    return factorial(2 * l) // (2**l * factorial(l))


def C(l: int) -> float:
    return 2.0**l * sqrt(k(l))


def C_prime(l: int) -> float:
    return 2.0 ** (2 * l - 1) * k(l)


@dataclass(frozen=True)
class ConstantsTable:
    delta: float
    d: int
    lambda_min: float
    lambda_max: float
    k: dict
    C: dict
    C_prime: dict
    xi_star: float
    C1: float
    C2: float
    C3: float
    C4: float
    C3p: float
    C4p: float
    lemma22_C1: float
    lemma22_C2: float
    lemma22_C3: float
    n1: float
    lemma22_n: float
    thm21_C1: float
    thm21_C1_per_axis: tuple = field(default=())

    def as_dict(self):
        out = {}
        for key, val in self.__dict__.items():
            if isinstance(val, dict):
                out[key] = {str(a): b for a, b in val.items()}
            elif isinstance(val, tuple):
                out[key] = list(val)
            else:
                out[key] = val
        return out


def psi_sigma(n: float, lambda_min: float) -> float:
    """6 / (n sqrt(lambda_min)); self-inverse in n."""
    return 6.0 / (n * sqrt(lambda_min))


def paper_constants(l_max: int, delta: float, Sigma) -> ConstantsTable:
    """Every explicit constant of the moment lemma, the integration-by-parts
    lemma and the translate bound, for a given delta and Sigma."""
    if delta <= 0:
        raise ValueError("delta must be positive")
    Sigma = check_spd(Sigma, "Sigma")
    d = Sigma.shape[0]
    eig = np.linalg.eigvalsh(Sigma)
    lmin, lmax = float(eig[0]), float(eig[-1])
    top = max(l_max, 6)
    ks = {l: k(l) for l in range(1, top + 1)}
    Cs = {l: C(l) for l in range(1, top + 1)}
    Cps = {l: C_prime(l) for l in range(1, top + 1)}

    # ||Sigma^{-1/2}|| = lambda_min^{-1/2}
    xi_star = (delta / 3.0) / sqrt(lmin) + 3.0 / (2.0 * lmin)
    C1 = (6.0 / delta) ** 4 * C(4)
    C2 = 2.0 * exp(xi_star) / lmin
    C3 = (6.0 / delta) ** 3 * sqrt(2.0 * (1.0 + lmax) * C(6))
    tail = 1.0 + sqrt(C_prime(2) * (1.0 + lmin**-2))
    C4 = C2 * sqrt(2.0 * (1.0 + lmax)) * tail
    C3p = (6.0 / delta) ** 3 * C(4) * sqrt(lmax)
    C4p = C2 * sqrt(C(2) * lmax) * tail

    l22_1 = C1 + C2 * (1.0 + C_prime(1) * (1.0 + 1.0 / lmin))
    l22_2 = C3 + C4
    l22_3 = C3p + C4p

    n1 = lmin ** (-8.0 / 7.0)
    n_l22 = max(float(d**4), n1, (4.0 * lmin**2) ** (-4.0 / 3.0))

    # translate-bound constant uses the delta = 1 version of C^{(1)}
    if delta == 1.0:
        l22_1_at1 = l22_1
    else:
        l22_1_at1 = paper_constants(l_max, 1.0, Sigma).lemma22_C1
    Sinv = np.linalg.inv(Sigma)
    per_axis = tuple(
        l22_1_at1 + sqrt(C_prime(1) * (1.0 + Sinv[j, j])) + 18.0 * C(2) for j in range(d)
    )
    return ConstantsTable(
        delta=delta, d=d, lambda_min=lmin, lambda_max=lmax,
        k=ks, C=Cs, C_prime=Cps, xi_star=xi_star,
        C1=C1, C2=C2, C3=C3, C4=C4, C3p=C3p, C4p=C4p,
        lemma22_C1=l22_1, lemma22_C2=l22_2, lemma22_C3=l22_3,
        n1=n1, lemma22_n=n_l22,
        thm21_C1=max(per_axis), thm21_C1_per_axis=per_axis,
    )
