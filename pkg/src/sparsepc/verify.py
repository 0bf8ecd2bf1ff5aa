"""Numerical checks of constant-free bounds.

* closed form and Monte Carlo estimates of Gaussian exponential moments,
* the solver perturbation bound
  ``|u - u_d|_{H^1} <= (|f - f_d|_{H^-1} + |f|_{H^-1} |e^a - e^{a_d}|_inf / b_min) / b_{d,min}``,
* algebraic growth of ``c`` and of ``m(Lambda_N)`` along the enumeration,
* sampled bounds ``|u|_X <= C exp(alpha |a|^tau)`` along complex shifts.

Every check returns a small dataclass; :class:`Report` turns a collection of
them into ``key: value`` text with a process exit code.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import CoefficientDegeneracyError, DivergenceError, DomainError, NonConvergenceError
from .indices import IndexSet, index_set_metrics
from .sampling import gaussian_chunk
from .torus import PeriodicField, SolverConfig, hnorm, solve_diffusion

EXIT_PASS = 0
EXIT_VIOLATION = 2
EXIT_PRECONDITION = 3


@dataclass
class Report:
    """Ordered ``key: value`` lines plus an overall status."""

    title: str
    lines: list[tuple[str, object]] = field(default_factory=list)
    violations: int = 0
    precondition_failures: int = 0

    def add(self, key: str, value) -> None:
        self.lines.append((key, value))

    def check(self, key: str, holds: bool) -> None:
        self.add(key, "pass" if holds else "FAIL")
        if not holds:
            self.violations += 1

    def precondition(self, key: str, message: str) -> None:
        self.add(key, f"precondition failed: {message}")
        self.precondition_failures += 1

    @property
    def exit_code(self) -> int:
        if self.precondition_failures:
            return EXIT_PRECONDITION
        if self.violations:
            return EXIT_VIOLATION
        return EXIT_PASS

    @property
    def status(self) -> str:
        return {EXIT_PASS: "pass", EXIT_VIOLATION: "violation", EXIT_PRECONDITION: "precondition"}[self.exit_code]

    def to_text(self) -> str:
        out = [f"report: {self.title}", f"status: {self.status}"]
        for key, value in self.lines:
            if isinstance(value, float):
                value = f"{value:.17g}"
            out.append(f"{key}: {value}")
        return "\n".join(out) + "\n"


@dataclass(frozen=True)
class HolomorphyParams:
    """Candidate constants for ``|G(a)| <= C exp(alpha |a|**tau)`` on the strip ``|Im a| < theta``."""

    C: float
    alpha: float
    tau: float
    theta: float

    def __post_init__(self):
        if not self.C > 0 or not self.alpha > 0:
            raise DomainError("C and alpha must be positive")
        if not 0 <= self.tau < 2:
            raise DomainError("tau must lie in [0, 2)")
        if not self.theta > 0:
            raise DomainError("strip width must be positive")


# ---------------------------------------------------------------------------
# Gaussian exponential moments
# ---------------------------------------------------------------------------


def exp_moment_closed(b: Sequence[float], alpha_tilde: float) -> float:
    """``E exp(alpha_tilde sum_j b_j**2 y_j**2) = prod_j (1 - 2 alpha_tilde b_j**2)**(-1/2)``.

    Raises
    ------
    DivergenceError
        If ``2 alpha_tilde b_j**2 >= 1`` for some ``j`` (reported 1-based).
    """
    logs = 0.0
    for j, bj in enumerate(b, start=1):
        s = 2.0 * alpha_tilde * float(bj) ** 2
        if s >= 1.0:
            raise DivergenceError(f"integral diverges: 2 * alpha * b_{j}**2 = {s:.6g} >= 1")
        logs += -0.5 * math.log1p(-s)
    return math.exp(logs)


class MomentEstimate(tuple):
    """``(estimate, stderr)`` pair with a divergence flag."""

    def __new__(cls, estimate: float, stderr: float):
        return super().__new__(cls, (float(estimate), float(stderr)))

    @property
    def estimate(self) -> float:
        return self[0]

    @property
    def stderr(self) -> float:
        return self[1]

    @property
    def suspect(self) -> bool:
        """True when the standard error exceeds the estimate (likely divergent integrand)."""
        return self.stderr > abs(self.estimate)


MC_CHUNK = 1 << 16


def exp_moment_mc(b: Sequence[float], alpha: float, tau: float, n: int, seed: int = 0) -> MomentEstimate:
    """Monte Carlo estimate of ``E exp(alpha (sum_j b_j**2 y_j**2)**(tau/2))``."""
    if n < 1000:
        raise DomainError(f"at least 1000 samples required, got {n}")
    if not 0 < tau <= 2:
        raise DomainError("tau must lie in (0, 2]")
    b2 = np.asarray(b, dtype=float) ** 2
    total = 0.0
    total_sq = 0.0
    for c, start in enumerate(range(0, n, MC_CHUNK)):
        Y = gaussian_chunk(seed, c, min(MC_CHUNK, n - start), b2.size)
        vals = np.exp(alpha * (Y**2 @ b2) ** (tau / 2.0))
        total += float(np.sum(vals))
        total_sq += float(np.sum(vals**2))
    mean = total / n
    var = max(total_sq / n - mean * mean, 0.0) * n / (n - 1)
    return MomentEstimate(mean, math.sqrt(var / n))


# ---------------------------------------------------------------------------
# perturbation bound
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PerturbationReport:
    lhs: float
    rhs: float
    b_min: float
    b_delta_min: float
    rel_slack: float = 1e-8

    @property
    def holds(self) -> bool:
        return self.lhs <= self.rhs * (1.0 + self.rel_slack)


def perturbation_check(
    a: PeriodicField,
    a_delta: PeriodicField,
    f: PeriodicField,
    f_delta: PeriodicField,
    cfg: SolverConfig = SolverConfig(),
) -> PerturbationReport:
    """Compare the solution difference with the constant-free perturbation bound.

    ``b_min`` and ``b_delta_min`` are minima of ``Re e^a`` and ``Re e^{a_delta}``
    over the grid points.
    """
    coef = a.exp()
    coef_d = a_delta.exp()
    b_min = float(np.min(coef.real))
    b_dmin = float(np.min(coef_d.real))
    u = solve_diffusion(a, f, cfg)
    u_d = solve_diffusion(a_delta, f_delta, cfg)
    lhs = hnorm(u - u_d, 1.0)
    sup = (coef - coef_d).sup_norm()
    rhs = (hnorm(f - f_delta, -1.0) + hnorm(f, -1.0) * sup / b_min) / b_dmin
    return PerturbationReport(lhs, rhs, b_min, b_dmin)


# ---------------------------------------------------------------------------
# growth along the enumeration
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class GrowthReport:
    holds: bool
    first_violation: int | None
    worst_ratio: float
    checked: int


def growth_bound_check(index_set: IndexSet, C: float, K: float, r1: float, rho=None) -> GrowthReport:
    """Check ``c_{nu_N} <= max(1, C K)**2 N**(2 r1)`` for every prefix length ``N``.

    ``rho`` (defaulting to the set's surrogate weights) must satisfy
    ``rho_j <= C j**r1`` on every activated dimension.
    """
    if not index_set.weights:
        raise DomainError("index set carries no c-values")
    if rho is None and index_set.surrogate is not None:
        rho = index_set.surrogate.rho
    if rho is not None:
        for j in range(1, index_set.n_dims + 1):
            if rho(j) > C * j**r1 * (1 + 1e-12):
                raise DomainError(f"rho_{j} = {rho(j):.6g} exceeds C j^r1 = {C * j**r1:.6g}")
    c = np.asarray(index_set.weights, dtype=float)
    N = np.arange(1, c.size + 1, dtype=float)
    bound = max(1.0, C * K) ** 2 * N ** (2 * r1)
    ratio = c / bound
    bad = np.nonzero(ratio > 1.0 + 1e-12)[0]
    first = int(bad[0]) + 1 if bad.size else None
    return GrowthReport(first is None, first, float(ratio.max()), int(c.size))


@dataclass(frozen=True)
class SparsityReport:
    Ns: tuple[int, ...]
    m_values: tuple[int, ...]
    d_values: tuple[int, ...]
    m_bounds: tuple[float, ...]
    d_ratios: tuple[float, ...]

    @property
    def m_holds(self) -> bool:
        return all(m <= b for m, b in zip(self.m_values, self.m_bounds))

    @property
    def d_nonincreasing(self) -> bool:
        return all(b <= a * (1 + 1e-12) for a, b in zip(self.d_ratios, self.d_ratios[1:]))

    @property
    def holds(self) -> bool:
        return self.m_holds and self.d_nonincreasing


def sparsity_check(index_set: IndexSet, Ns: Sequence[int], C: float, K: float, r1: float, M: int, d0: float) -> SparsityReport:
    """``m(Lambda_N) <= max(1, C K)**(2/M) N**(2 r1 / M) + d0`` and the trend of ``d(Lambda_N) / log2 N``."""
    ms, ds, bounds, ratios = [], [], [], []
    for n in Ns:
        if not 2 <= n <= len(index_set):
            raise DomainError(f"N = {n} outside [2, {len(index_set)}]")
        m, d = index_set_metrics(index_set.members[:n])
        ms.append(m)
        ds.append(d)
        bounds.append(max(1.0, C * K) ** (2.0 / M) * n ** (2.0 * r1 / M) + d0)
        ratios.append(d / math.log2(n))
    return SparsityReport(tuple(Ns), tuple(ms), tuple(ds), tuple(bounds), tuple(ratios))


# ---------------------------------------------------------------------------
# strip probes
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class StripReport:
    probes: int
    evaluated: int
    violations: int
    out_of_strip: int
    max_ratio: float

    @property
    def violation_fraction(self) -> float:
        return self.violations / self.evaluated if self.evaluated else 0.0


def strip_bound_probe(problem, params: HolomorphyParams, n_probes: int, seed: int = 0, xi: float | None = None) -> StripReport:
    """Sample ``|u(y + z)|_X <= C exp(alpha |a(y + z)|_{H^t}**tau)`` at complex shifted points.

    For each probe, ``y`` is a standard Gaussian point; random positive
    weights ``rho`` are scaled so that ``sum rho_j**2 b_j**2`` is a uniform
    fraction of ``xi**2`` (``xi`` defaults to the model's), and ``z_j`` is
    drawn uniformly from the disc of radius ``rho_j``. Probes whose field
    leaves the strip ``|Im a|_{H^t} < theta`` or makes the coefficient
    degenerate are counted as out of strip and not evaluated.
    """
    if n_probes < 1:
        raise DomainError("need at least one probe")
    xi = problem.model.xi if xi is None else float(xi)
    J = problem.J
    b = problem.scales
    t = problem.basis.t
    violations = out = evaluated = 0
    worst = 0.0
    for i in range(n_probes):
        y = gaussian_chunk(seed, 2 * i, 1, J)[0]
        rng = np.random.Generator(np.random.Philox(key=int(seed) + ((2 * i + 1) << 64)))
        w = rng.uniform(0.05, 1.0, size=J)
        scale2 = float(np.sum(w**2 * b**2))
        rho = w * math.sqrt(rng.uniform() * xi**2 / scale2) if scale2 > 0 else w
        z = rho * np.sqrt(rng.uniform(size=J)) * np.exp(2j * np.pi * rng.uniform(size=J))
        a = problem.field(y + z)
        if hnorm(PeriodicField(a.grid, a.imag), t) >= params.theta:
            out += 1
            continue
        try:
            u = solve_diffusion(a, problem.f, problem.cfg)
        except (CoefficientDegeneracyError, NonConvergenceError):
            out += 1
            continue
        evaluated += 1
        ratio = hnorm(u, problem.s_out) / (params.C * math.exp(params.alpha * hnorm(a, t) ** params.tau))
        worst = max(worst, ratio)
        if ratio > 1.0:
            violations += 1
    return StripReport(n_probes, evaluated, violations, out, worst)


def random_smooth_field(grid, rng: np.random.Generator, max_freq: int = 4, sup: float = 1.0, zero_mean: bool = False) -> PeriodicField:
    """Random real trigonometric polynomial with frequencies ``<= max_freq`` and ``sup``-norm exactly ``sup``.

    Amplitudes decay like ``|k|**-2``; a nonzero mean is kept unless ``zero_mean``.
    """
    values = np.zeros(grid.shape)
    ks = range(-max_freq, max_freq + 1)
    for k in np.ndindex(*([len(ks)] * grid.d)):
        kv = [ks[i] for i in k]
        norm2 = sum(c * c for c in kv)
        if norm2 == 0 and zero_mean:
            continue
        phase = 2 * np.pi * sum(c * x for c, x in zip(kv, grid.coords))
        amp = rng.normal() / (1.0 + norm2)
        values = values + amp * np.cos(phase + rng.uniform(0, 2 * np.pi))
    if zero_mean:
        values = values - values.mean()
    peak = np.max(np.abs(values))
    return PeriodicField(grid, values * (sup / peak if peak > 0 else 0.0))


def perturbation_sweep(grid, n_cases: int, seed: int = 0, cfg: SolverConfig = SolverConfig()) -> list[PerturbationReport]:
    """Perturbation check on ``n_cases`` random smooth instances with ``|a|_inf, |a_delta|_inf <= 1``."""
    out = []
    for i in range(n_cases):
        rng = np.random.Generator(np.random.Philox(key=int(seed) + (i << 64)))
        a = random_smooth_field(grid, rng, sup=rng.uniform(0.1, 1.0))
        a_d = random_smooth_field(grid, rng, sup=rng.uniform(0.1, 1.0)) if i % 2 else a + random_smooth_field(grid, rng, sup=1e-3)
        a_d = PeriodicField(grid, np.clip(a_d.real, -1.0, 1.0))
        f = random_smooth_field(grid, rng, zero_mean=True)
        f_d = f + random_smooth_field(grid, rng, sup=rng.uniform(0.0, 0.5), zero_mean=True)
        out.append(perturbation_check(a, a_d, f, f_d, cfg))
    return out
