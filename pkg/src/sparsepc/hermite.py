"""Normalized probabilists' Hermite polynomials and Gauss-Hermite rules.

All polynomials are orthonormal in ``L^2`` of the standard Gaussian measure,
and every quadrature rule integrates against that measure (weights sum to 1).
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.linalg import LinAlgError, eigh_tridiagonal

from .errors import DomainError, ResourceError
from .indices import MultiIndex

MAX_RULE_SIZE = 64
DEFAULT_TENSOR_BUDGET = 2_000_000


def hermite_table(kmax: int, y) -> np.ndarray:
    """Values ``h_0(y), ..., h_kmax(y)`` stacked along a new leading axis.

    Uses ``h_{k+1} = (y h_k - sqrt(k) h_{k-1}) / sqrt(k+1)``.
    """
    if kmax < 0:
        raise DomainError("degree must be nonnegative")
    y = np.asarray(y, dtype=float)
    out = np.empty((kmax + 1,) + y.shape)
    out[0] = 1.0
    if kmax >= 1:
        out[1] = y
    for k in range(1, kmax):
        out[k + 1] = (y * out[k] - np.sqrt(k) * out[k - 1]) / np.sqrt(k + 1)
    return out


def hermite_eval(k: int, y):
    """Orthonormal Hermite polynomial ``h_k`` evaluated at ``y`` (scalar or array)."""
    val = hermite_table(k, y)[k]
    return float(val) if np.ndim(val) == 0 else val


def hermite_multi_eval(nu: MultiIndex, y) -> float:
    """Tensorized ``H_nu(y) = prod_{j in supp nu} h_{nu_j}(y_j)``."""
    y = np.asarray(y, dtype=float)
    if nu.max_dim > y.shape[-1]:
        raise DomainError(f"support reaches dimension {nu.max_dim} but y has {y.shape[-1]} entries")
    out = np.ones(y.shape[:-1])
    for j, k in nu.entries:
        out = out * hermite_table(k, y[..., j - 1])[k]
    return float(out) if out.ndim == 0 else out


def hermite_design(nus: np.ndarray, Y: np.ndarray) -> np.ndarray:
    """Matrix ``H[i, m] = H_{nu_m}(Y[i])`` for dense exponent rows ``nus`` of shape ``(m, J)``."""
    nus = np.asarray(nus, dtype=np.int64)
    Y = np.atleast_2d(np.asarray(Y, dtype=float))
    J = nus.shape[1]
    if Y.shape[1] < J:
        raise DomainError("points have fewer coordinates than the multi-indices")
    out = np.ones((Y.shape[0], nus.shape[0]))
    for j in range(J):
        kmax = int(nus[:, j].max()) if nus.size else 0
        if kmax == 0:
            continue
        table = hermite_table(kmax, Y[:, j])  # (kmax+1, B)
        out *= table[nus[:, j]].T
    return out


@dataclass(frozen=True)
class GaussHermiteRule:
    """``n``-point rule for the standard Gaussian: ``E f(y) ~ sum w_i f(x_i)``."""

    n: int
    nodes: np.ndarray
    weights: np.ndarray

    def integrate(self, values) -> float:
        return float(np.dot(self.weights, values))


@lru_cache(maxsize=None)
def _golub_welsch(n: int) -> tuple[np.ndarray, np.ndarray]:
    if n == 1:
        return np.zeros(1), np.ones(1)
    off = np.sqrt(np.arange(1, n, dtype=float))
    try:
        x = eigh_tridiagonal(np.zeros(n), off, eigvals_only=True)
    except LinAlgError as exc:  # pragma: no cover - does not happen for n <= 64
        raise RuntimeError(f"Golub-Welsch eigen-solve failed for n = {n}") from exc
    # polish the nodes with Newton steps on h_n, using h_n' = sqrt(n) h_{n-1}
    for _ in range(2):
        tab = hermite_table(n, x)
        x = x - tab[n] / (np.sqrt(n) * tab[n - 1])
    # Christoffel weights keep full relative accuracy in the tails, unlike
    # squared eigenvector components
    w = 1.0 / np.sum(hermite_table(n - 1, x) ** 2, axis=0)
    # enforce the exact symmetry of the rule
    x = 0.5 * (x - x[::-1])
    w = 0.5 * (w + w[::-1])
    if n % 2:
        x[n // 2] = 0.0
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


def gauss_hermite_rule(n: int) -> GaussHermiteRule:
    """Golub-Welsch rule: eigenvalues of the Jacobi matrix of ``h_k``.

    The Jacobi matrix is symmetric tridiagonal with zero diagonal and
    off-diagonal ``sqrt(1), ..., sqrt(n-1)``. Its eigenvalues are refined by
    Newton's method and the weights are ``1 / sum_{k<n} h_k(x_i)**2``, which
    equals the squared first eigenvector component in exact arithmetic.
    """
    if not 1 <= n <= MAX_RULE_SIZE:
        raise DomainError(f"node count must lie in [1, {MAX_RULE_SIZE}], got {n}")
    x, w = _golub_welsch(int(n))
    return GaussHermiteRule(int(n), x, w)


@dataclass(frozen=True)
class TensorQuadrature:
    """Tensor product of Gauss-Hermite rules, last dimension fastest."""

    orders: tuple[int, ...]

    @property
    def size(self) -> int:
        return int(np.prod(self.orders, dtype=np.int64)) if self.orders else 1

    def rules(self) -> list[GaussHermiteRule]:
        return [gauss_hermite_rule(q) for q in self.orders]

    def block(self, start: int, stop: int) -> tuple[np.ndarray, np.ndarray]:
        """Nodes ``(stop-start, J)`` and weights for odometer positions ``start:stop``."""
        stop = min(stop, self.size)
        idx = np.unravel_index(np.arange(start, stop), self.orders)
        rules = self.rules()
        nodes = np.empty((stop - start, len(self.orders)))
        weights = np.ones(stop - start)
        for j, (rule, i) in enumerate(zip(rules, idx)):
            nodes[:, j] = rule.nodes[i]
            weights *= rule.weights[i]
        return nodes, weights

    def nodes_and_weights(self) -> tuple[np.ndarray, np.ndarray]:
        return self.block(0, self.size)

    def __iter__(self):
        nodes, weights = self.nodes_and_weights()
        return iter(zip(nodes, weights))


def tensor_nodes(orders, budget: int = DEFAULT_TENSOR_BUDGET) -> TensorQuadrature:
    """Tensor rule with per-dimension node counts ``orders``.

    Raises
    ------
    ResourceError
        If ``prod(orders)`` exceeds ``budget``.
    """
    orders = tuple(int(q) for q in orders)
    if any(q < 1 for q in orders):
        raise DomainError("every order must be >= 1")
    for q in orders:
        gauss_hermite_rule(q)
    total = 1
    for q in orders:
        total *= q
    if total > budget:
        raise ResourceError(f"tensor rule with orders {orders} has {total} nodes > budget {budget}")
    return TensorQuadrature(orders)
