"""Multi-indices, weight sequences and thresholded downward-closed index sets.

Dimensions are 1-based throughout: a multi-index stores pairs ``(j, nu_j)``
with ``j >= 1`` and ``nu_j >= 1``; zero exponents are never stored.

The weights implemented here are

* ``rho_j`` with ``rho_j**2 * b_j**2 = (b_j / |b|_p)**p * xi**2 / (8 e M!)``,
* ``beta_nu(M, rho) = prod_j sum_{l<=M} binom(nu_j, l) rho_j**(2l)``,
* ``c_nu = prod_{j in supp nu} max(1, K rho_j)**2 * nu_j**M``,

and ``Lambda_N`` is the set of the first ``N`` multi-indices of an
enumeration that is nondecreasing in ``c_nu``.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Iterator, Sequence

import numpy as np
from scipy.special import zeta

from .errors import DomainError, ResourceError

MAX_M = 20


# ---------------------------------------------------------------------------
# multi-indices
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MultiIndex:
    """Finitely supported sequence of nonnegative integers.

    ``entries`` holds ``(j, nu_j)`` pairs sorted by ``j`` with every
    exponent positive.
    """

    entries: tuple[tuple[int, int], ...] = ()

    def __post_init__(self):
        prev = 0
        for j, k in self.entries:
            if not isinstance(j, (int, np.integer)) or not isinstance(k, (int, np.integer)):
                raise DomainError(f"non-integer entry ({j!r}, {k!r})")
            if j <= prev:
                raise DomainError("dimension indices must be >= 1, unique and sorted")
            if k < 1:
                raise DomainError(f"stored exponent for dimension {j} must be >= 1")
            prev = j

    @classmethod
    def zero(cls) -> MultiIndex:
        return cls(())

    @classmethod
    def unit(cls, j: int) -> MultiIndex:
        return cls(((int(j), 1),))

    @classmethod
    def from_dense(cls, exponents: Sequence[int]) -> MultiIndex:
        """Build from ``(nu_1, nu_2, ...)``; zeros are dropped."""
        pairs = []
        for j, k in enumerate(exponents, start=1):
            k = int(k)
            if k < 0:
                raise DomainError("exponents must be nonnegative")
            if k:
                pairs.append((j, k))
        return cls(tuple(pairs))

    @classmethod
    def from_dict(cls, mapping: dict[int, int]) -> MultiIndex:
        return cls(tuple(sorted((int(j), int(k)) for j, k in mapping.items() if k)))

    @classmethod
    def parse(cls, text: str) -> MultiIndex:
        """Inverse of :meth:`__str__` (``"1:2;3:1"``, empty for zero)."""
        text = text.strip()
        if not text:
            return cls.zero()
        pairs = []
        for item in text.split(";"):
            j, k = item.split(":")
            pairs.append((int(j), int(k)))
        return cls(tuple(pairs))

    def __getitem__(self, j: int) -> int:
        for i, k in self.entries:
            if i == j:
                return k
        return 0

    def __str__(self) -> str:
        return ";".join(f"{j}:{k}" for j, k in self.entries)

    def __repr__(self) -> str:
        return f"MultiIndex({dict(self.entries)!r})"

    def __len__(self) -> int:
        return len(self.entries)

    @property
    def support(self) -> tuple[int, ...]:
        return tuple(j for j, _ in self.entries)

    @property
    def l1(self) -> int:
        return sum(k for _, k in self.entries)

    @property
    def l0(self) -> int:
        return len(self.entries)

    @property
    def max_dim(self) -> int:
        return self.entries[-1][0] if self.entries else 0

    def is_zero(self) -> bool:
        return not self.entries

    def dense(self, length: int | None = None) -> tuple[int, ...]:
        """Exponent vector; trimmed after the last nonzero unless ``length`` is given."""
        n = self.max_dim if length is None else length
        if n < self.max_dim:
            raise DomainError(f"support reaches dimension {self.max_dim} > {n}")
        out = [0] * n
        for j, k in self.entries:
            out[j - 1] = k
        return tuple(out)

    def add_unit(self, j: int) -> MultiIndex:
        d = dict(self.entries)
        d[j] = d.get(j, 0) + 1
        return MultiIndex(tuple(sorted(d.items())))

    def sub_unit(self, j: int) -> MultiIndex:
        d = dict(self.entries)
        if j not in d:
            raise DomainError(f"dimension {j} not in support")
        d[j] -= 1
        return MultiIndex.from_dict(d)

    def backward_neighbors(self) -> Iterator[MultiIndex]:
        for j in self.support:
            yield self.sub_unit(j)

    def __add__(self, other: MultiIndex) -> MultiIndex:
        d = dict(self.entries)
        for j, k in other.entries:
            d[j] = d.get(j, 0) + k
        return MultiIndex(tuple(sorted(d.items())))

    def factorial(self) -> int:
        return math.prod(math.factorial(k) for _, k in self.entries)


# ---------------------------------------------------------------------------
# weight models
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class WeightModel:
    """Input data ``(b, p, xi, M)``.

    ``b`` is either an explicit finite tuple (zero beyond its length) or the
    power law ``b_j = c0 * j**(-theta)``.
    """

    p: float
    xi: float
    M: int
    b: tuple[float, ...] | None = None
    c0: float | None = None
    theta: float | None = None

    def __post_init__(self):
        if not 0 < self.p < 2:
            raise DomainError(f"p must lie in (0, 2), got {self.p}")
        if self.xi < 0:
            raise DomainError("xi must be nonnegative")
        if int(self.M) != self.M or self.M < 1:
            raise DomainError("M must be a positive integer")
        if self.M > MAX_M:
            raise DomainError(f"M > {MAX_M} is not supported")
        if self.M < math.ceil(2.0 / self.p - 1e-12):
            raise DomainError(f"M = {self.M} violates M >= 2/p = {2 / self.p:.6g}")
        if self.b is None:
            if self.c0 is None or self.theta is None:
                raise DomainError("give either an explicit b list or (c0, theta)")
            if self.c0 <= 0:
                raise DomainError("c0 must be positive")
            if self.theta <= 0.5:
                raise DomainError("theta must exceed 1/2")
            if self.p * self.theta <= 1:
                raise DomainError(f"power law not in l^p: p*theta = {self.p * self.theta:.6g} <= 1")
        else:
            if any(v < 0 for v in self.b):
                raise DomainError("explicit b entries must be nonnegative")
            if not any(v > 0 for v in self.b):
                raise DomainError("explicit b has no positive entry")

    @classmethod
    def power_law(cls, c0: float, theta: float, p: float, xi: float, M: int) -> WeightModel:
        return cls(p=float(p), xi=float(xi), M=int(M), c0=float(c0), theta=float(theta))

    @classmethod
    def explicit(cls, b: Sequence[float], p: float, xi: float, M: int) -> WeightModel:
        return cls(p=float(p), xi=float(xi), M=int(M), b=tuple(float(v) for v in b))

    @property
    def is_power_law(self) -> bool:
        return self.b is None

    @property
    def length(self) -> int | None:
        """Number of stored entries (``None`` for the infinite power law)."""
        return None if self.b is None else len(self.b)

    def b_j(self, j: int) -> float:
        if j < 1:
            raise DomainError("dimension index must be >= 1")
        if self.b is None:
            return self.c0 * float(j) ** (-self.theta)
        if j > len(self.b):
            return 0.0
        return self.b[j - 1]

    @cached_property
    def b_norm(self) -> float:
        """``|b|_{l^p}`` (closed form via the Riemann zeta function for the power law)."""
        if self.b is None:
            return self.c0 * float(zeta(self.p * self.theta)) ** (1.0 / self.p)
        return float(sum(v**self.p for v in self.b)) ** (1.0 / self.p)

    def sorted(self) -> WeightModel:
        """Same model with an explicit ``b`` sorted in decreasing order."""
        if self.b is None:
            return self
        return WeightModel.explicit(sorted(self.b, reverse=True), self.p, self.xi, self.M)


def rho_from_b(model: WeightModel, j: int) -> float:
    """Admissible weight ``rho_j`` for dimension ``j``.

    Raises
    ------
    DomainError
        If ``b_j = 0`` (including ``j`` beyond an explicit list).
    """
    bj = model.b_j(j)
    if bj <= 0:
        raise DomainError(f"b_{j} = 0: rho_{j} undefined")
    scale = model.xi**2 / (8.0 * math.e * math.factorial(model.M))
    return math.sqrt((bj / model.b_norm) ** model.p * scale) / bj


class AdmissibleWeights:
    """Sequence ``rho_1, rho_2, ...``, either derived from a model or given explicitly."""

    def __init__(self, model: WeightModel | None = None, values: Sequence[float] | None = None):
        if (model is None) == (values is None):
            raise DomainError("give exactly one of model or values")
        self.model = model
        self._values = None if values is None else tuple(float(v) for v in values)
        if self._values is not None and any(v < 0 for v in self._values):
            raise DomainError("rho must be nonnegative")

    @classmethod
    def from_model(cls, model: WeightModel) -> AdmissibleWeights:
        return cls(model=model)

    @classmethod
    def explicit(cls, values: Sequence[float]) -> AdmissibleWeights:
        return cls(values=values)

    @property
    def is_power_law(self) -> bool:
        return self.model is not None and self.model.is_power_law

    @cached_property
    def n_dims(self) -> int | None:
        """Number of leading dimensions where ``rho`` is defined (``None``: unbounded)."""
        if self._values is not None:
            return len(self._values)
        if self.model.b is None:
            return None
        n = 0
        for v in self.model.b:
            if v <= 0:
                break
            n += 1
        return n

    def rho(self, j: int) -> float:
        if self._values is not None:
            if not 1 <= j <= len(self._values):
                raise DomainError(f"dimension {j} beyond explicit rho list")
            return self._values[j - 1]
        return rho_from_b(self.model, j)

    def rho_array(self, n: int) -> np.ndarray:
        """``(rho_1, ..., rho_n)`` as an array."""
        return np.array([self.rho(j) for j in range(1, n + 1)])

    def __call__(self, j: int) -> float:
        return self.rho(j)

    def __repr__(self) -> str:
        if self._values is not None:
            return f"AdmissibleWeights.explicit({list(self._values)!r})"
        return f"AdmissibleWeights.from_model({self.model!r})"


def _as_rho(rho) -> AdmissibleWeights:
    if isinstance(rho, AdmissibleWeights):
        return rho
    return AdmissibleWeights.explicit(rho)


def beta_weight(nu: MultiIndex, M: int, rho) -> float:
    """``beta_nu(M, rho)``; ``rho`` is :class:`AdmissibleWeights` or a sequence ``(rho_1, ...)``."""
    if M < 1:
        raise DomainError("M must be >= 1")
    rho = _as_rho(rho)
    out = 1.0
    for j, k in nu.entries:
        r2 = rho(j) ** 2
        out *= sum(math.comb(k, ell) * r2**ell for ell in range(min(M, k) + 1))
    return out


def log_beta_weight(nu: MultiIndex, M: int, rho) -> float:
    rho = _as_rho(rho)
    out = 0.0
    for j, k in nu.entries:
        r2 = rho(j) ** 2
        out += math.log(sum(math.comb(k, ell) * r2**ell for ell in range(min(M, k) + 1)))
    return out


def c_weight(nu: MultiIndex, M: int, K: float, rho) -> float:
    """Surrogate weight ``prod_{j in supp} max(1, K rho_j)**2 * nu_j**M``."""
    rho = _as_rho(rho)
    out = 1.0
    for j, k in nu.entries:
        out *= max(1.0, K * rho(j)) ** 2 * float(k) ** M
    return out


# ---------------------------------------------------------------------------
# surrogate constants
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SurrogateWeights:
    """``K`` and ``C_beta`` such that ``C_beta * c_nu <= beta_nu(M, rho)``.

    ``C_beta`` is a product of many factors below one and routinely
    underflows; ``log_C_beta`` is always finite and is what the checks use.
    """

    K: float
    C_beta: float
    M: int
    rho: AdmissibleWeights
    log_C_beta: float = 0.0
    scan_limit: int | None = None
    warning: str | None = None

    def khat(self, j: int) -> float:
        return max(1.0, self.K * self.rho(j))

    def c(self, nu: MultiIndex) -> float:
        return c_weight(nu, self.M, self.K, self.rho)

    def log_c(self, nu: MultiIndex) -> float:
        return sum(2.0 * math.log(self.khat(j)) + self.M * math.log(k) for j, k in nu.entries)


def surrogate_constants(M: int, rho, scan_limit: int) -> SurrogateWeights:
    """Compute ``K`` and ``C_beta`` from a finite scan of ``rho``.

    ``rho_0 = min(1, min_{j <= scan_limit} rho_j)``,
    ``K = (rho_0**(2M) / (M! M**(2M)))**(1/2)`` and
    ``C_beta = prod_{j <= scan_limit, K rho_j < 1} (K rho_j)**2``.
    """
    if M < 1 or M > MAX_M:
        raise DomainError(f"M must lie in [1, {MAX_M}]")
    if scan_limit < 1:
        raise DomainError("scan_limit must be >= 1")
    rho = _as_rho(rho)
    n = scan_limit if rho.n_dims is None else min(scan_limit, rho.n_dims)
    if n < 1:
        raise DomainError("no dimension with positive weight")
    values = rho.rho_array(n)
    rho0 = min(1.0, float(values.min()))
    if rho0 <= 0:
        raise DomainError("rho_0 = 0: K would vanish")
    log_K = M * math.log(rho0) - 0.5 * (math.lgamma(M + 1) + 2 * M * math.log(M))
    K = math.exp(log_K)
    kr = K * values
    small = kr[kr < 1.0]
    log_C = float(2.0 * np.sum(np.log(small))) if small.size else 0.0
    warning = None
    truncated = rho.n_dims is None or rho.n_dims > scan_limit
    if truncated and not rho.is_power_law and np.any(np.diff(values) < 0):
        warning = (
            f"rho is not monotone within the first {n} dimensions; "
            "minima beyond scan_limit are not excluded"
        )
    return SurrogateWeights(
        K=K,
        C_beta=math.exp(log_C),
        M=M,
        rho=rho,
        log_C_beta=log_C,
        scan_limit=n,
        warning=warning,
    )


# ---------------------------------------------------------------------------
# index sets
# ---------------------------------------------------------------------------


def order_key(c: float, nu: MultiIndex) -> tuple:
    """Total order on multi-indices used by the enumeration.

    Ascending ``c``, then ascending ``|nu|_1``, then descending lexicographic
    order of the exponent vector (so lower dimensions come first at ties).
    """
    return (c, nu.l1, tuple(-k for k in nu.dense()))


@dataclass(frozen=True)
class IndexSet:
    """Ordered multi-index set with its ``c``-values along the enumeration."""

    members: tuple[MultiIndex, ...]
    weights: tuple[float, ...] = ()
    surrogate: SurrogateWeights | None = field(default=None, compare=False)

    def __post_init__(self):
        if self.weights and len(self.weights) != len(self.members):
            raise DomainError("weights must parallel members")

    def __len__(self) -> int:
        return len(self.members)

    def __iter__(self) -> Iterator[MultiIndex]:
        return iter(self.members)

    def __getitem__(self, i):
        return self.members[i]

    @cached_property
    def _lookup(self) -> dict[MultiIndex, int]:
        return {nu: i for i, nu in enumerate(self.members)}

    def __contains__(self, nu) -> bool:
        return nu in self._lookup

    def position(self, nu: MultiIndex) -> int:
        return self._lookup[nu]

    def prefix(self, n: int) -> IndexSet:
        if not 0 <= n <= len(self):
            raise DomainError(f"prefix length {n} outside [0, {len(self)}]")
        return IndexSet(self.members[:n], self.weights[:n], self.surrogate)

    @property
    def metrics(self) -> tuple[int, int]:
        return index_set_metrics(self)

    @property
    def n_dims(self) -> int:
        return max((nu.max_dim for nu in self.members), default=0)

    def dense_array(self, n_dims: int | None = None) -> np.ndarray:
        """Members as an integer array of shape ``(len, n_dims)``."""
        n = self.n_dims if n_dims is None else n_dims
        out = np.zeros((len(self), n), dtype=np.int64)
        for i, nu in enumerate(self.members):
            for j, k in nu.entries:
                if j > n:
                    raise DomainError(f"member {nu} exceeds {n} dimensions")
                out[i, j - 1] = k
        return out

    def max_exponents(self, n_dims: int) -> np.ndarray:
        if not len(self):
            return np.zeros(n_dims, dtype=np.int64)
        return self.dense_array(n_dims).max(axis=0)


def build_index_set(N: int, weights: SurrogateWeights, dim_cap: int) -> IndexSet:
    """First ``N`` multi-indices of the enumeration nondecreasing in ``c_nu``.

    Best-first frontier expansion: the cheapest admissible candidate is
    popped from a heap, inserted, and each forward neighbor ``nu + e_j`` whose
    backward neighbors are all inserted is pushed. Dimension ``j + 1``
    becomes available once ``e_j`` is inserted, which is valid because
    ``rho`` is required to be nondecreasing.

    Parameters
    ----------
    N : int
        Number of multi-indices.
    weights : SurrogateWeights
        Supplies ``K``, ``M`` and ``rho``.
    dim_cap : int
        Largest dimension index that may ever be activated.

    Raises
    ------
    DomainError
        ``N < 1`` or ``rho`` decreasing somewhere within the active dimensions.
    ResourceError
        The active dimensions cannot supply ``N`` multi-indices.
    """
    if N < 1:
        raise DomainError("N must be >= 1")
    if dim_cap < 0:
        raise DomainError("dim_cap must be >= 0")
    rho = weights.rho
    max_dim = dim_cap if rho.n_dims is None else min(dim_cap, rho.n_dims)
    if max_dim > 0:
        vals = rho.rho_array(max_dim)
        bad = np.nonzero(np.diff(vals) < 0)[0]
        if bad.size:
            j = int(bad[0]) + 1
            raise DomainError(
                f"rho is not nondecreasing (rho_{j} = {vals[j - 1]:.6g} > "
                f"rho_{j + 1} = {vals[j]:.6g}); sort b in decreasing order"
            )
        khat2 = [None] + [max(1.0, weights.K * float(v)) ** 2 for v in vals]
    M = weights.M

    # The loop works on raw sorted (j, k) entry tuples; MultiIndex objects are built once at the end.
    def cost(entries) -> float:
        out = 1.0
        for j, k in entries:
            out *= khat2[j] * float(k) ** M
        return out

    def key(entries) -> tuple:
        dense = [0] * (entries[-1][0] if entries else 0)
        for j, k in entries:
            dense[j - 1] = -k
        return (cost(entries), sum(k for _, k in entries), tuple(dense))

    def add_unit(entries, j: int):
        for i, (jj, k) in enumerate(entries):
            if jj == j:
                return entries[:i] + ((j, k + 1),) + entries[i + 1 :]
            if jj > j:
                return entries[:i] + ((j, 1),) + entries[i:]
        return entries + ((j, 1),)

    def backward(entries):
        for i, (j, k) in enumerate(entries):
            yield entries[:i] + ((j, k - 1),) + entries[i + 1 :] if k > 1 else entries[:i] + entries[i + 1 :]

    zero = ()
    heap = [(key(zero), zero)]
    queued = {zero}
    inserted: set = set()
    members: list = []
    costs: list[float] = []
    available = 1 if max_dim >= 1 else 0

    while len(members) < N:
        if not heap:
            raise ResourceError(
                f"only {len(members)} multi-indices available with dim_cap = {dim_cap}; N = {N}"
            )
        k_, nu = heapq.heappop(heap)
        members.append(nu)
        costs.append(k_[0])
        inserted.add(nu)
        if len(nu) == 1 and nu[0] == (available, 1) and available < max_dim:
            available += 1
            unit = ((available, 1),)
            queued.add(unit)
            heapq.heappush(heap, (key(unit), unit))
        for j in range(1, available + 1):
            cand = add_unit(nu, j)
            if cand in queued:
                continue
            if all(b in inserted for b in backward(cand)):
                queued.add(cand)
                heapq.heappush(heap, (key(cand), cand))
    members = [MultiIndex(e) for e in members]
    return IndexSet(tuple(members), tuple(costs), weights)


def index_set_metrics(index_set: Iterable[MultiIndex]) -> tuple[int, int]:
    """``(m, d)`` = (max ``|nu|_1``, max ``|nu|_0``) over a nonempty set."""
    members = list(index_set)
    if not members:
        raise DomainError("metrics of an empty index set")
    return max(nu.l1 for nu in members), max(nu.l0 for nu in members)


def check_downward_closed(index_set: Iterable[MultiIndex]) -> bool:
    members = set(index_set)
    return all(b in members for nu in members for b in nu.backward_neighbors())


@dataclass(frozen=True)
class StechkinReport:
    applicable: bool
    N: int
    q: float
    left: float = float("nan")
    right: float = float("nan")
    holds: bool | None = None
    summable: bool = True
    note: str = ""


def stechkin_check(values: Sequence[float], q: float, N: int) -> StechkinReport:
    """Check ``max_{i > N} c_i**-1 <= N**(-1/q) * |(c_i**-1)|_q`` on a finite list.

    ``values`` are the ``c``-weights in enumeration order. The finite list
    is the universe for the ``l^q`` norm. Summability of the premise is
    judged heuristically: a list whose last-quartile terms ``c**-q`` are on
    average at least half the first-quartile ones is flagged non-summable.
    """
    if q <= 0:
        raise DomainError("q must be positive")
    c = np.asarray(values, dtype=float)
    if N <= 0 or N >= c.size:
        return StechkinReport(False, N, q, note="not applicable")
    if np.any(c <= 0):
        raise DomainError("values must be positive")
    inv = 1.0 / c
    left = float(inv[N:].max())
    norm = float(np.sum(inv**q)) ** (1.0 / q)
    right = N ** (-1.0 / q) * norm
    quart = max(1, c.size // 4)
    head = float(np.mean(inv[:quart] ** q))
    tail = float(np.mean(inv[-quart:] ** q))
    summable = tail < 0.5 * head
    note = "" if summable else "terms c**-q do not decay: non-summable premise"
    return StechkinReport(True, N, q, left, right, left <= right, summable, note)


def power_law_exponent(model: WeightModel) -> float:
    """Exponent ``r`` with ``rho_j = rho_1 * j**r`` for a power-law model."""
    if not model.is_power_law:
        raise DomainError("exponent only defined for power-law b")
    return model.theta * (2.0 - model.p) / 2.0


@dataclass(frozen=True)
class GrowthConstants:
    """Constants ``C, r0, r1, d0`` entering the sparsity-growth bounds."""

    C: float
    r0: float
    r1: float
    d0: float


def growth_constants(weights: SurrogateWeights, n_dims: int, r1: float | None = None) -> GrowthConstants:
    """Smallest ``C`` with ``C**-1 j**r0 <= rho_j <= C j**r1`` over ``j <= n_dims``, and ``d0``.

    ``d0`` is the first ``j`` with ``K rho_j >= 2**M`` (``inf`` if none exists);
    for power-law ``rho`` it is found in closed form.
    """
    rho = weights.rho
    if r1 is None:
        if not rho.is_power_law:
            raise DomainError("r1 must be supplied for non-power-law rho")
        r1 = power_law_exponent(rho.model)
    r0 = r1
    n = n_dims if rho.n_dims is None else min(n_dims, rho.n_dims)
    j = np.arange(1, n + 1, dtype=float)
    vals = rho.rho_array(n)
    C = float(max(np.max(vals / j**r1), np.max(j**r0 / vals)))
    target = 2.0**weights.M
    d0 = math.inf
    if rho.is_power_law and r1 > 0:
        rho1 = rho(1)
        est = max(1, math.floor((target / (weights.K * rho1)) ** (1.0 / r1)) - 2)
        # float rounding in the closed form; walk forward to the exact index
        while weights.K * rho_from_b(rho.model, est) < target:
            est += 1
        while est > 1 and weights.K * rho_from_b(rho.model, est - 1) >= target:
            est -= 1
        d0 = float(est)
    else:
        hits = np.nonzero(weights.K * vals >= target)[0]
        if hits.size:
            d0 = float(hits[0] + 1)
    return GrowthConstants(C=C, r0=r0, r1=r1, d0=d0)
