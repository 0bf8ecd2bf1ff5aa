"""Reference computations that share no code with the package under test."""

from __future__ import annotations

import itertools
import math

import numpy as np
from numpy.polynomial import hermite_e
from scipy.special import roots_hermitenorm


def c_value(nu: tuple[int, ...], M: int, k_rho: list[float]) -> float:
    """``prod_{nu_j > 0} max(1, K rho_j)**2 * nu_j**M`` from the dense exponent vector."""
    out = 1.0
    for k, kr in zip(nu, k_rho):
        if k:
            out *= max(1.0, kr) ** 2 * k**M
    return out


def sort_key(nu: tuple[int, ...], M: int, k_rho: list[float]):
    return (c_value(nu, M, k_rho), sum(nu), tuple(-k for k in nu))


def brute_force_enumeration(N: int, M: int, k_rho: list[float], L: int = 8) -> list[tuple[int, ...]]:
    """First ``N`` exponent vectors (``D = len(k_rho)`` dimensions, ``|nu|_1 <= L``) in sorted order.

    Asserts that no vector with ``|nu|_1 = L + 1`` would sort before the
    ``N``-th one; vectors of larger order are dominated by one of those.
    """
    D = len(k_rho)
    pool = [nu for nu in itertools.product(range(L + 1), repeat=D) if sum(nu) <= L]
    pool.sort(key=lambda nu: sort_key(nu, M, k_rho))
    assert N <= len(pool)
    head = pool[:N]
    boundary = [nu for nu in itertools.product(range(L + 2), repeat=D) if sum(nu) == L + 1]
    assert min(sort_key(nu, M, k_rho) for nu in boundary) > sort_key(head[-1], M, k_rho)
    return head


def hermite_orthonormal(k: int, y) -> np.ndarray:
    """``He_k(y) / sqrt(k!)`` via numpy's probabilists' Hermite series."""
    coef = np.zeros(k + 1)
    coef[k] = 1.0
    return hermite_e.hermeval(np.asarray(y, dtype=float), coef) / math.sqrt(math.factorial(k))


def gauss_rule(n: int) -> tuple[np.ndarray, np.ndarray]:
    """Gauss rule for the standard normal density from scipy."""
    x, w = roots_hermitenorm(n)
    return x, w / math.sqrt(2 * math.pi)


def dft_hnorm(values: np.ndarray, s: float) -> float:
    """Homogeneous Sobolev norm of 1-D samples by an explicit DFT matrix."""
    n = values.size
    j = np.arange(n)
    ks = np.arange(-n // 2, n // 2)
    coeffs = np.exp(-2j * np.pi * np.outer(ks, j) / n) @ values / n
    mask = ks != 0
    return float(np.sqrt(np.sum((2 * np.pi * np.abs(ks[mask])) ** (2 * s) * np.abs(coeffs[mask]) ** 2)))


def brute_force_adaptive(N: int, M: int, k_rho: list[float], L: int = 4, L_max: int = 64) -> list[tuple[int, ...]]:
    """:func:`brute_force_enumeration` with the smallest valid order cap ``>= L``."""
    while True:
        try:
            return brute_force_enumeration(N, M, k_rho, L)
        except AssertionError:
            if L >= L_max:
                raise
            L += 2
