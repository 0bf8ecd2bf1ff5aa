"""Wiener-Hermite coefficients of parametric maps and their diagnostics.

The parametric map of interest is ``y -> u(y)``, the solution of
``-div(exp(a(y)) grad u) = f`` with ``a(y) = sum_{j<=J} y_j b_j psi_j``.
Coefficients ``u_nu = E[u(y) H_nu(y)]`` are approximated by a tensor
Gauss-Hermite rule or by Monte Carlo. Evaluation is node-major: each node
costs one solve and updates every coefficient at once.

Partial sums are formed per fixed-size chunk of nodes and reduced in chunk
order, so results do not depend on how many worker processes are used.
"""

from __future__ import annotations

import io
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from typing import Callable, Sequence

import numpy as np

from .errors import (
    CoefficientDegeneracyError,
    DomainError,
    NonConvergenceError,
)
from .hermite import DEFAULT_TENSOR_BUDGET, TensorQuadrature, hermite_design, tensor_nodes
from .indices import (
    AdmissibleWeights,
    IndexSet,
    MultiIndex,
    WeightModel,
    beta_weight,
    check_downward_closed,
)
from .sampling import gaussian_chunk
from .torus import PeriodicField, PeriodicGrid, SolverConfig, TrigBasis, solve_spectral

# ---------------------------------------------------------------------------
# parametric maps
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class ParametricProblem:
    """Lognormal diffusion on the torus driven by ``J`` Gaussian coordinates.

    Parameters
    ----------
    basis : TrigBasis
        Expansion functions ``psi_j``; requires ``basis.t > d / 2``.
    model : WeightModel
        Supplies the scales ``b_j``.
    f : PeriodicField
        Zero-mean right-hand side; its grid is the discretization grid.
    J : int
        Number of active coordinates.
    s_out : float
        Coefficients are measured in ``H^{s_out}``.
    cfg : SolverConfig
    """

    basis: TrigBasis
    model: WeightModel
    f: PeriodicField
    J: int
    s_out: float = 1.0
    cfg: SolverConfig = field(default_factory=SolverConfig)

    def __post_init__(self):
        if self.J < 1:
            raise DomainError("J must be >= 1")
        grid = self.f.grid
        if self.basis.d != grid.d:
            raise DomainError(f"basis is {self.basis.d}-D, grid is {grid.d}-D")
        if not self.basis.t > grid.d / 2:
            raise DomainError(f"basis smoothness t = {self.basis.t} must exceed d/2 = {grid.d / 2}")
        mean = abs(self.f.spectrum.flat[0])
        if mean > 1e-12 * max(self.f.l2_norm(), 1e-300) and mean > 0:
            raise DomainError(f"right-hand side has nonzero mean {mean:.3e}")

    @property
    def grid(self) -> PeriodicGrid:
        return self.f.grid

    @property
    def output_shape(self) -> tuple[int, ...]:
        return self.grid.shape

    @cached_property
    def scales(self) -> np.ndarray:
        return np.array([self.model.b_j(j) for j in range(1, self.J + 1)])

    @cached_property
    def modes(self) -> np.ndarray:
        """``b_j psi_j`` on the grid, shape ``(J, *grid.shape)``."""
        return self.scales.reshape((-1,) + (1,) * self.grid.d) * self.basis.matrix(self.J, self.grid)

    def log_coefficient(self, Y) -> np.ndarray:
        """Values of ``a(y)`` for each row of ``Y`` (shape ``(B, J)``), possibly complex."""
        Y = np.atleast_2d(np.asarray(Y))
        if Y.shape[1] != self.J:
            raise DomainError(f"points must have {self.J} coordinates, got {Y.shape[1]}")
        return np.tensordot(Y, self.modes, axes=(1, 0))

    def field(self, y) -> PeriodicField:
        return PeriodicField(self.grid, self.log_coefficient(y)[0])

    def evaluate_batch(self, Y) -> np.ndarray:
        """Solution spectra for each row of ``Y``.

        Raises the solver's error, naming the offending parameter point.
        """
        Y = np.atleast_2d(np.asarray(Y))
        coef = np.exp(self.log_coefficient(Y))
        try:
            u_hat, _, _ = solve_spectral(coef, self.f.spectrum, self.grid, self.cfg)
        except (NonConvergenceError, CoefficientDegeneracyError) as exc:
            where = "" if exc.sample is None else f" at node y = {np.array2string(Y[exc.sample], precision=6)}"
            if isinstance(exc, NonConvergenceError):
                raise NonConvergenceError(
                    str(exc) + where, residual=exc.residual, iterations=exc.iterations, sample=exc.sample
                ) from exc
            raise CoefficientDegeneracyError(str(exc) + where, sample=exc.sample) from exc
        return u_hat

    def norms(self, values: np.ndarray) -> np.ndarray:
        """``H^{s_out}`` norms of spectra along the leading axis."""
        return self.grid.hnorm_spectrum(values, self.s_out)

    def to_output(self, value: np.ndarray):
        return PeriodicField.from_spectrum(self.grid, value)


def evaluate_solution(problem: ParametricProblem, y) -> PeriodicField:
    """Solution field at the parameter point ``y``."""
    y = np.asarray(y, dtype=float)
    if not np.all(np.isfinite(y)):
        raise DomainError("parameter point must be finite")
    return problem.to_output(problem.evaluate_batch(y[None])[0])


class FunctionMap:
    """Parametric map given by a vectorized callable; used to exercise the estimators.

    ``func(Y)`` receives points of shape ``(B, J)`` and returns either ``B``
    scalars or ``B`` real-space fields on ``grid``. Field outputs are measured
    in ``H^{s_out}``, scalars by absolute value.
    """

    def __init__(self, func: Callable, J: int, grid: PeriodicGrid | None = None, s_out: float = 1.0):
        if J < 1:
            raise DomainError("J must be >= 1")
        self.func = func
        self.J = J
        self.grid = grid
        self.s_out = s_out

    @property
    def output_shape(self) -> tuple[int, ...]:
        return () if self.grid is None else self.grid.shape

    def evaluate_batch(self, Y) -> np.ndarray:
        Y = np.atleast_2d(np.asarray(Y, dtype=float))
        vals = np.asarray(self.func(Y), dtype=complex)
        vals = vals.reshape((Y.shape[0],) + self.output_shape)
        if self.grid is None:
            return vals
        return self.grid.to_spectrum(vals)

    def norms(self, values: np.ndarray) -> np.ndarray:
        if self.grid is None:
            return np.abs(values)
        return self.grid.hnorm_spectrum(values, self.s_out)

    def to_output(self, value: np.ndarray):
        if self.grid is None:
            return complex(value) if np.iscomplexobj(value) and value.imag != 0 else float(np.real(value))
        return PeriodicField.from_spectrum(self.grid, value)


# ---------------------------------------------------------------------------
# estimators
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TensorEstimator:
    """Tensor Gauss-Hermite projection.

    Unless ``orders`` is given, dimension ``j`` uses ``max_nu nu_j + pad`` nodes
    when some multi-index is active in it and a single node otherwise.
    """

    pad: int = 2
    orders: tuple[int, ...] | None = None
    budget: int = DEFAULT_TENSOR_BUDGET
    chunk: int = 512

    def __post_init__(self):
        if self.pad < 0:
            raise DomainError("pad must be nonnegative")
        if self.chunk < 1:
            raise DomainError("chunk must be >= 1")

    def quadrature(self, nus: np.ndarray) -> TensorQuadrature:
        J = nus.shape[1]
        if self.orders is not None:
            if len(self.orders) != J:
                raise DomainError(f"{len(self.orders)} orders given for {J} dimensions")
            return tensor_nodes(self.orders, self.budget)
        nubar = nus.max(axis=0) if nus.size else np.zeros(J, dtype=np.int64)
        orders = [int(k) + self.pad if k > 0 else 1 for k in nubar]
        return tensor_nodes(orders, self.budget)

    def describe(self, nus: np.ndarray) -> dict:
        return {"estimator": "tensor", "orders": self.quadrature(nus).orders, "pad": self.pad}


@dataclass(frozen=True)
class MonteCarloEstimator:
    """Plain Monte Carlo with the reproducible Gaussian stream of ``seed``."""

    samples: int
    seed: int = 0
    chunk: int = 4096

    def __post_init__(self):
        if self.samples < 2:
            raise DomainError("Monte Carlo needs at least 2 samples")
        if self.chunk < 1:
            raise DomainError("chunk must be >= 1")

    def describe(self, nus: np.ndarray) -> dict:
        return {"estimator": "mc", "samples": self.samples, "seed": self.seed}


def _n_chunks(estimator, nus: np.ndarray) -> int:
    total = estimator.quadrature(nus).size if isinstance(estimator, TensorEstimator) else estimator.samples
    return -(-total // estimator.chunk)


def _chunk_partial(problem, nus: np.ndarray, estimator, c: int):
    """Weighted sums of ``u(y) H_nu(y)`` over chunk ``c`` (and second moments for Monte Carlo)."""
    start = c * estimator.chunk
    if isinstance(estimator, TensorEstimator):
        quad = estimator.quadrature(nus)
        Y, w = quad.block(start, start + estimator.chunk)
    else:
        count = min(estimator.chunk, estimator.samples - start)
        Y = gaussian_chunk(estimator.seed, c, count, nus.shape[1])
        w = np.full(count, 1.0 / estimator.samples)
    V = problem.evaluate_batch(Y)
    H = hermite_design(nus, Y)
    acc = np.tensordot(H * w[:, None], V, axes=(0, 0))
    if isinstance(estimator, TensorEstimator):
        return acc, None
    sq = problem.norms(V) ** 2
    return acc, (H**2).T @ sq


_WORKER: dict = {}


def _worker_init(problem, nus, estimator):
    _WORKER.update(problem=problem, nus=nus, estimator=estimator)


def _worker_run(c: int):
    return _chunk_partial(_WORKER["problem"], _WORKER["nus"], _WORKER["estimator"], c)


def _project(problem, nus: np.ndarray, estimator, jobs: int = 1):
    """Coefficient arrays for the dense exponent rows ``nus``; Monte Carlo also returns standard errors."""
    n = _n_chunks(estimator, nus)
    if jobs > 1 and n > 1:
        with ProcessPoolExecutor(max_workers=jobs, initializer=_worker_init, initargs=(problem, nus, estimator)) as ex:
            parts = list(ex.map(_worker_run, range(n)))
    else:
        parts = [_chunk_partial(problem, nus, estimator, c) for c in range(n)]
    acc = parts[0][0]
    for p in parts[1:]:
        acc = acc + p[0]
    stderr = None
    if isinstance(estimator, MonteCarloEstimator):
        s2 = parts[0][1]
        for p in parts[1:]:
            s2 = s2 + p[1]
        ns = estimator.samples
        mean_sq = problem.norms(acc) ** 2
        var = np.maximum(s2 - ns * mean_sq, 0.0) / (ns - 1)
        stderr = np.sqrt(var / ns)
    return acc, stderr


def _check_support(nus_list: Sequence[MultiIndex], J: int):
    for nu in nus_list:
        if nu.max_dim > J:
            raise DomainError(f"multi-index {nu} is active beyond the J = {J} coordinates")


def compute_coefficient(problem, nu: MultiIndex, estimator, ref_set: IndexSet | None = None):
    """Approximation of ``E[u(y) H_nu(y)]`` and its norm.

    With a tensor estimator the per-dimension orders follow ``ref_set`` (or
    ``nu`` alone when no reference set is given).

    Returns
    -------
    (value, norm) or (value, norm, stderr)
        Monte Carlo estimators add the standard error of the norm-squared
        contributions.
    """
    _check_support([nu], problem.J)
    rows = ref_set.dense_array(problem.J) if ref_set is not None else np.array([nu.dense(problem.J)], dtype=np.int64)
    if isinstance(estimator, TensorEstimator) and ref_set is not None:
        orders = estimator.quadrature(rows).orders
        estimator = TensorEstimator(estimator.pad, orders, estimator.budget, estimator.chunk)
    nus = np.array([nu.dense(problem.J)], dtype=np.int64)
    acc, stderr = _project(problem, nus, estimator)
    value = problem.to_output(acc[0])
    norm = float(problem.norms(acc[:1])[0])
    if stderr is None:
        return value, norm
    return value, norm, float(stderr[0])


@dataclass(frozen=True, eq=False)
class PCExpansion:
    """Coefficients of a parametric map over a reference index set."""

    problem: object
    ref_set: IndexSet
    values: np.ndarray
    norms: np.ndarray
    stderr: np.ndarray | None
    meta: dict

    def __len__(self) -> int:
        return len(self.ref_set)

    def coefficient(self, nu: MultiIndex):
        return self.problem.to_output(self.values[self.ref_set.position(nu)])

    def norm(self, nu: MultiIndex) -> float:
        return float(self.norms[self.ref_set.position(nu)])

    def items(self):
        for i, nu in enumerate(self.ref_set):
            yield nu, self.problem.to_output(self.values[i]), float(self.norms[i])


def compute_expansion(problem, ref_set: IndexSet, estimator, jobs: int = 1) -> PCExpansion:
    """Coefficients for every member of ``ref_set`` from one shared pass over the nodes."""
    if not len(ref_set):
        raise DomainError("reference set is empty")
    if not check_downward_closed(ref_set):
        raise DomainError("reference set is not downward closed")
    _check_support(ref_set.members, problem.J)
    nus = ref_set.dense_array(problem.J)
    acc, stderr = _project(problem, nus, estimator, jobs)
    norms = np.asarray(problem.norms(acc), dtype=float)
    return PCExpansion(problem, ref_set, acc, norms, stderr, estimator.describe(nus))


# ---------------------------------------------------------------------------
# error curves and summability
# ---------------------------------------------------------------------------


def tail_errors(norms: np.ndarray) -> np.ndarray:
    """``E[N] = (sum_{i >= N} norms_i**2)**(1/2)`` for ``N = 0..len``; the last entry is 0."""
    sq = np.asarray(norms, dtype=float) ** 2
    tail = np.zeros(sq.size + 1)
    tail[:-1] = np.cumsum(sq[::-1])[::-1]
    return np.sqrt(tail)


def error_curve(exp: PCExpansion, Ns: Sequence[int]) -> list[tuple[int, float]]:
    """``(N, E(N))`` with ``E(N)`` the coefficient mass outside the first ``N`` members."""
    Ns = [int(n) for n in Ns]
    if any(b <= a for a, b in zip(Ns, Ns[1:])):
        raise DomainError("Ns must be strictly ascending")
    size = len(exp.ref_set)
    for n in Ns:
        if not 0 <= n <= size:
            raise DomainError(f"N = {n} outside [0, {size}]")
    tail = tail_errors(exp.norms)
    return [(n, float(tail[n])) for n in Ns]


def fit_slope(points: Sequence[tuple[float, float]]) -> float:
    """Least-squares slope of ``log E`` against ``log N`` over the points with ``E > 0``."""
    pts = [(float(n), float(e)) for n, e in points if e > 0 and n > 0]
    if len(pts) < 3:
        raise DomainError(f"slope fit needs >= 3 positive points, got {len(pts)}")
    x = np.log([p[0] for p in pts])
    y = np.log([p[1] for p in pts])
    if np.ptp(x) == 0:
        raise DomainError("slope fit needs distinct N")
    return float(np.polyfit(x, y, 1)[0])


@dataclass(frozen=True)
class SummabilityReport:
    """Prefix sums over the reference enumeration and a tail-decay fit."""

    weighted_prefix: np.ndarray
    lp_prefix: np.ndarray
    sorted_norms: np.ndarray
    tail_exponent: float
    weighted_increment: float
    lp_increment: float
    tolerance: float = 0.05

    @property
    def weighted_sum(self) -> float:
        return float(self.weighted_prefix[-1])

    @property
    def lp_sum(self) -> float:
        return float(self.lp_prefix[-1])

    @property
    def stable(self) -> bool:
        return self.weighted_increment <= self.tolerance and self.lp_increment <= self.tolerance

    def checkpoints(self, count: int = 8) -> list[tuple[int, float, float]]:
        """``(n, weighted, lp)`` at ``count`` evenly spaced prefix lengths."""
        size = self.weighted_prefix.size
        ns = sorted({max(1, round(size * (i + 1) / count)) for i in range(count)})
        return [(n, float(self.weighted_prefix[n - 1]), float(self.lp_prefix[n - 1])) for n in ns]


def _last_quartile_increment(prefix: np.ndarray) -> float:
    total = float(prefix[-1])
    if total == 0.0:
        return 0.0
    start = (3 * prefix.size) // 4
    before = float(prefix[start - 1]) if start > 0 else 0.0
    return (total - before) / total


def summability_report(exp: PCExpansion, p: float, M: int, rho) -> SummabilityReport:
    """Weighted and ``l^p`` prefix sums of the coefficient norms, plus the decay of their rearrangement.

    The tail exponent ``s`` fits ``norm_(n) ~ n**-s`` on the upper three
    quarters (by rank) of the positive decreasing rearrangement; it is ``nan``
    when fewer than three positive norms remain.
    """
    if not 0 < p < 2:
        raise DomainError("p must lie in (0, 2)")
    norms = np.asarray(exp.norms, dtype=float)
    beta = np.array([beta_weight(nu, M, rho) for nu in exp.ref_set])
    weighted = np.cumsum(beta * norms**2)
    lp = np.cumsum(norms**p)
    ordered = np.sort(norms)[::-1]
    positive = ordered[ordered > 0]
    exponent = float("nan")
    lo = positive.size // 4
    if positive.size - lo >= 3:
        ranks = np.arange(lo + 1, positive.size + 1)
        exponent = -float(np.polyfit(np.log(ranks), np.log(positive[lo:]), 1)[0])
    return SummabilityReport(
        weighted_prefix=weighted,
        lp_prefix=lp,
        sorted_norms=ordered,
        tail_exponent=exponent,
        weighted_increment=_last_quartile_increment(weighted),
        lp_increment=_last_quartile_increment(lp),
    )


# ---------------------------------------------------------------------------
# CSV export
# ---------------------------------------------------------------------------


def coefficients_csv(exp: PCExpansion, M: int, rho) -> str:
    """Columns ``nu, c_weight, beta_weight, norm_X``; ``c_weight`` is blank when unknown."""
    buf = io.StringIO()
    buf.write("nu,c_weight,beta_weight,norm_X\n")
    cw = exp.ref_set.weights
    for i, nu in enumerate(exp.ref_set):
        c = f"{cw[i]:.17g}" if cw else ""
        buf.write(f"{nu},{c},{beta_weight(nu, M, rho):.17g},{exp.norms[i]:.17g}\n")
    return buf.getvalue()


def errors_csv(exp: PCExpansion, curve: Sequence[tuple[int, float]]) -> str:
    """Columns ``N, error, m_lambda, d_lambda``."""
    buf = io.StringIO()
    buf.write("N,error,m_lambda,d_lambda\n")
    for n, e in curve:
        m, d = exp.ref_set.prefix(n).metrics if n > 0 else (0, 0)
        buf.write(f"{n},{e:.17g},{m},{d}\n")
    return buf.getvalue()


# ---------------------------------------------------------------------------
# exact weighted identity for polynomial maps
# ---------------------------------------------------------------------------

MAX_POLY_DIM = 4
MAX_POLY_DEGREE = 10


@dataclass(frozen=True)
class PolySpec:
    """Polynomial ``u(y) = sum_alpha coeff_alpha y**alpha`` on ``R^N``."""

    terms: tuple[tuple[MultiIndex, float], ...]
    N: int

    def __post_init__(self):
        if not 1 <= self.N <= MAX_POLY_DIM:
            raise DomainError(f"polynomial dimension must lie in [1, {MAX_POLY_DIM}], got {self.N}")
        for alpha, _ in self.terms:
            if alpha.max_dim > self.N:
                raise DomainError(f"monomial {alpha} uses a dimension beyond N = {self.N}")
            if alpha.l1 > MAX_POLY_DEGREE:
                raise DomainError(f"monomial {alpha} exceeds degree {MAX_POLY_DEGREE}")

    @classmethod
    def from_dict(cls, terms: dict, N: int) -> PolySpec:
        items = []
        for alpha, c in terms.items():
            if not isinstance(alpha, MultiIndex):
                alpha = MultiIndex.from_dense(alpha)
            items.append((alpha, float(c)))
        return cls(tuple(items), N)

    @property
    def degree(self) -> int:
        return max((a.l1 for a, _ in self.terms), default=0)

    def __call__(self, y) -> float:
        y = np.asarray(y, dtype=float)
        return float(sum(c * np.prod([y[j - 1] ** k for j, k in a.entries]) for a, c in self.terms))


def _double_factorial(k: int) -> int:
    return math.prod(range(k, 0, -2)) if k > 0 else 1


def _gaussian_moment(k: int) -> int:
    """``E[y**k]`` for a standard Gaussian: ``(k-1)!!`` for even ``k``, else 0."""
    return 0 if k % 2 else _double_factorial(k - 1)


def _monomial_to_he(k: int) -> dict[int, Fraction]:
    """Coefficients of ``y**k`` in the monic Hermite polynomials ``He_m``."""
    out = {}
    for m in range(k % 2, k + 1, 2):
        h = (k - m) // 2
        out[m] = Fraction(math.factorial(k), math.factorial(m) * math.factorial(h) * 2**h)
    return out


def _dense_poly(poly: PolySpec) -> dict[tuple[int, ...], Fraction]:
    out: dict[tuple[int, ...], Fraction] = {}
    for alpha, c in poly.terms:
        key = alpha.dense(poly.N)
        out[key] = out.get(key, Fraction(0)) + Fraction(c)
    return {k: v for k, v in out.items() if v != 0}


def _hermite_sq_coefficients(poly: dict[tuple[int, ...], Fraction], N: int) -> dict[tuple[int, ...], Fraction]:
    """``|u_nu|**2`` for the orthonormal basis; ``u_nu = sqrt(nu!) * R_nu`` with rational ``R_nu``."""
    R: dict[tuple[int, ...], Fraction] = {}
    for alpha, c in poly.items():
        partial = {(): c}
        for j in range(N):
            conv = _monomial_to_he(alpha[j])
            partial = {key + (m,): v * a for key, v in partial.items() for m, a in conv.items()}
        for key, v in partial.items():
            R[key] = R.get(key, Fraction(0)) + v
    return {nu: r * r * math.prod(math.factorial(k) for k in nu) for nu, r in R.items() if r != 0}


def _derivative(poly: dict[tuple[int, ...], Fraction], mu: tuple[int, ...]) -> dict[tuple[int, ...], Fraction]:
    out: dict[tuple[int, ...], Fraction] = {}
    for alpha, c in poly.items():
        if any(a < m for a, m in zip(alpha, mu)):
            continue
        factor = math.prod(math.factorial(a) // math.factorial(a - m) for a, m in zip(alpha, mu))
        key = tuple(a - m for a, m in zip(alpha, mu))
        out[key] = out.get(key, Fraction(0)) + c * factor
    return out


def _gaussian_l2_sq(poly: dict[tuple[int, ...], Fraction]) -> Fraction:
    total = Fraction(0)
    items = list(poly.items())
    for a, ca in items:
        for b, cb in items:
            total += ca * cb * math.prod(_gaussian_moment(x + y) for x, y in zip(a, b))
    return total


def weighted_identity_check(poly: PolySpec, M: int, rho: Sequence[float], exact: bool = False):
    """Both sides of the weighted Parseval identity for a polynomial map.

    ``lhs = sum_nu beta_nu(M, rho) |u_nu|**2`` from the exact Hermite
    coefficients; ``rhs = sum_{max(mu) <= M} rho**(2 mu) / mu! * E[(d^mu u)**2]``
    from exact derivatives and Gaussian moments. Arithmetic is rational in the
    exact binary values of the inputs.

    Returns
    -------
    (lhs, rhs)
        Floats, or :class:`fractions.Fraction` when ``exact`` is true.
    """
    if M < 1:
        raise DomainError("M must be >= 1")
    if len(rho) != poly.N:
        raise DomainError(f"{len(rho)} weights for a polynomial in {poly.N} variables")
    if any(not r > 0 for r in rho):
        raise DomainError("weights must be positive")
    if poly.degree > MAX_POLY_DEGREE:
        raise DomainError(f"degree exceeds {MAX_POLY_DEGREE}")
    r2 = [Fraction(float(r)) ** 2 for r in rho]
    dense = _dense_poly(poly)

    lhs = Fraction(0)
    for nu, sq in _hermite_sq_coefficients(dense, poly.N).items():
        beta = Fraction(1)
        for k, w in zip(nu, r2):
            beta *= sum(math.comb(k, l) * w**l for l in range(min(k, M) + 1))
        lhs += beta * sq

    degs = [max((a[j] for a in dense), default=0) for j in range(poly.N)]
    rhs = Fraction(0)
    for mu in np.ndindex(*[min(M, d) + 1 for d in degs]):
        mu = tuple(int(m) for m in mu)
        weight = Fraction(1)
        for m, w in zip(mu, r2):
            weight *= w**m / math.factorial(m)
        rhs += weight * _gaussian_l2_sq(_derivative(dense, mu))
    if exact:
        return lhs, rhs
    return float(lhs), float(rhs)
