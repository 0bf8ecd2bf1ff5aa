"""Pseudo-spectral fields on the unit torus and the lognormal diffusion solver.

Fields live on the uniform grid ``x_i = i / n`` of ``T^d = R^d / Z^d`` with
``d`` in {1, 2}. Fourier coefficients are taken with respect to
``exp(2 pi i k.x)``, ``k`` in ``{-n/2, ..., n/2 - 1}^d`` (stored in FFT order),
and homogeneous Sobolev norms use the angular frequency ``2 pi |k|`` so that
``|v|_{H^1} = |grad v|_{L^2}``.

Spectral derivatives drop the Nyquist frequency, so modes whose every
wavenumber component is 0 or ``-n/2`` form the kernel of the discrete
operator; the solver works on their orthogonal complement.
"""

from __future__ import annotations

import io
import math
import struct
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import (
    CoefficientDegeneracyError,
    DomainError,
    NonConvergenceError,
    ResolutionError,
)

_HEADER = struct.Struct("<qqq")


@dataclass(frozen=True)
class PeriodicGrid:
    d: int
    n: int

    def __post_init__(self):
        if self.d not in (1, 2):
            raise DomainError(f"spatial dimension must be 1 or 2, got {self.d}")
        if self.n < 8 or self.n % 2:
            raise DomainError(f"mode count must be even and >= 8, got {self.n}")

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.n,) * self.d

    @property
    def size(self) -> int:
        return self.n**self.d

    @property
    def axes(self) -> tuple[int, ...]:
        return tuple(range(-self.d, 0))

    @cached_property
    def coords(self) -> tuple[np.ndarray, ...]:
        x = np.arange(self.n) / self.n
        return tuple(np.meshgrid(*([x] * self.d), indexing="ij"))

    @cached_property
    def wavenumbers(self) -> tuple[np.ndarray, ...]:
        """Integer wavenumber of every mode, one array per direction."""
        k = np.fft.fftfreq(self.n, 1.0 / self.n)
        return tuple(np.meshgrid(*([k] * self.d), indexing="ij"))

    @cached_property
    def deriv_wavenumbers(self) -> tuple[np.ndarray, ...]:
        """Wavenumbers used for differentiation (Nyquist set to zero)."""
        out = []
        for k in self.wavenumbers:
            k = k.copy()
            k[k == -self.n // 2] = 0.0
            out.append(k)
        return tuple(out)

    @cached_property
    def omega(self) -> np.ndarray:
        """Angular frequency ``2 pi |k|`` of every mode."""
        return 2 * np.pi * np.sqrt(sum(k**2 for k in self.wavenumbers))

    @cached_property
    def laplace_symbol(self) -> np.ndarray:
        """Symbol of ``-Delta`` consistent with the spectral derivative."""
        return (2 * np.pi) ** 2 * sum(k**2 for k in self.deriv_wavenumbers)

    @cached_property
    def range_mask(self) -> np.ndarray:
        """Modes reachable by the discrete operator (nonzero Laplace symbol)."""
        return self.laplace_symbol > 0

    @cached_property
    def inv_laplace_symbol(self) -> np.ndarray:
        sym = self.laplace_symbol
        out = np.zeros_like(sym)
        out[self.range_mask] = 1.0 / sym[self.range_mask]
        return out

    def to_spectrum(self, values: np.ndarray) -> np.ndarray:
        return np.fft.fftn(values, axes=self.axes) / self.size

    def to_values(self, spectrum: np.ndarray) -> np.ndarray:
        return np.fft.ifftn(spectrum, axes=self.axes) * self.size

    def hnorm_spectrum(self, spectrum: np.ndarray, s: float) -> np.ndarray:
        """``H^s`` seminorm of spectra (zero mode excluded), vectorized over leading axes."""
        w = self.omega
        mask = w > 0
        weight = np.zeros_like(w)
        weight[mask] = w[mask] ** (2 * s)
        tot = np.sum(weight * np.abs(spectrum) ** 2, axis=self.axes)
        return np.sqrt(tot)


@dataclass(frozen=True, eq=False)
class PeriodicField:
    """Samples of a (possibly complex) function on a :class:`PeriodicGrid`."""

    grid: PeriodicGrid
    values: np.ndarray

    def __post_init__(self):
        vals = np.array(self.values, dtype=complex)
        if vals.shape != self.grid.shape:
            raise DomainError(f"values have shape {vals.shape}, grid expects {self.grid.shape}")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    @classmethod
    def zeros(cls, grid: PeriodicGrid) -> PeriodicField:
        return cls(grid, np.zeros(grid.shape))

    @classmethod
    def from_function(cls, grid: PeriodicGrid, func) -> PeriodicField:
        """Sample ``func(x)`` (1-D) or ``func(x, y)`` (2-D) on the grid."""
        return cls(grid, func(*grid.coords))

    @classmethod
    def from_spectrum(cls, grid: PeriodicGrid, spectrum: np.ndarray) -> PeriodicField:
        field = cls(grid, grid.to_values(np.asarray(spectrum)))
        object.__setattr__(field, "_spectrum_cache", np.array(spectrum, dtype=complex))
        return field

    @property
    def spectrum(self) -> np.ndarray:
        cached = getattr(self, "_spectrum_cache", None)
        if cached is None:
            cached = self.grid.to_spectrum(self.values)
            object.__setattr__(self, "_spectrum_cache", cached)
        return cached

    def centered_spectrum(self) -> np.ndarray:
        """Coefficients ordered by ``k = -n/2, ..., n/2 - 1`` along every axis."""
        return np.fft.fftshift(self.spectrum, axes=self.grid.axes)

    @property
    def real(self) -> np.ndarray:
        return self.values.real

    @property
    def imag(self) -> np.ndarray:
        return self.values.imag

    def is_real(self, rtol: float = 1e-11) -> bool:
        scale = float(np.max(np.abs(self.values))) or 1.0
        return float(np.max(np.abs(self.values.imag))) <= rtol * scale

    def mean(self) -> complex:
        return complex(np.mean(self.values))

    def sup_norm(self) -> float:
        return float(np.max(np.abs(self.values)))

    def l2_norm(self) -> float:
        return float(np.sqrt(np.mean(np.abs(self.values) ** 2)))

    def _check(self, other: PeriodicField):
        if other.grid != self.grid:
            raise DomainError(f"grid mismatch: {self.grid} vs {other.grid}")

    def __add__(self, other):
        if isinstance(other, PeriodicField):
            self._check(other)
            return PeriodicField(self.grid, self.values + other.values)
        return PeriodicField(self.grid, self.values + other)

    def __sub__(self, other):
        if isinstance(other, PeriodicField):
            self._check(other)
            return PeriodicField(self.grid, self.values - other.values)
        return PeriodicField(self.grid, self.values - other)

    def __mul__(self, scalar):
        return PeriodicField(self.grid, self.values * scalar)

    __rmul__ = __mul__

    def __neg__(self):
        return PeriodicField(self.grid, -self.values)

    def exp(self) -> PeriodicField:
        return PeriodicField(self.grid, np.exp(self.values))

    # -- serialization --------------------------------------------------

    def to_bytes(self) -> bytes:
        """Header ``(d, n, real_flag)`` as little-endian int64, then row-major complex128 samples."""
        head = _HEADER.pack(self.grid.d, self.grid.n, int(self.is_real()))
        return head + self.values.astype("<c16").tobytes(order="C")

    @classmethod
    def from_bytes(cls, data: bytes) -> PeriodicField:
        if len(data) < _HEADER.size:
            raise DomainError("truncated field header")
        d, n, flag = _HEADER.unpack_from(data)
        grid = PeriodicGrid(int(d), int(n))
        payload = data[_HEADER.size :]
        if len(payload) != 16 * grid.size:
            raise DomainError(f"payload has {len(payload)} bytes, expected {16 * grid.size}")
        vals = np.frombuffer(payload, dtype="<c16").reshape(grid.shape)
        if flag:
            vals = vals.real
        return cls(grid, vals)

    def to_csv(self) -> str:
        """Columns ``x[, y], re, im`` with 17 significant digits."""
        buf = io.StringIO()
        names = ["x", "y"][: self.grid.d]
        buf.write(",".join(names + ["re", "im"]) + "\n")
        coords = [c.ravel() for c in self.grid.coords]
        vals = self.values.ravel()
        for i in range(vals.size):
            row = [c[i] for c in coords] + [vals[i].real, vals[i].imag]
            buf.write(",".join(f"{v:.17g}" for v in row) + "\n")
        return buf.getvalue()


def hnorm(v: PeriodicField, s: float) -> float:
    """Homogeneous Sobolev norm ``(sum_{k != 0} (2 pi |k|)**(2s) |v_k|**2)**(1/2)``.

    Raises
    ------
    DomainError
        For ``s < 0`` when the mean of ``v`` does not vanish.
    """
    coeffs = v.spectrum
    if s < 0:
        zero = abs(coeffs.flat[0])
        if zero > 1e-12 * max(v.l2_norm(), 1e-300) and zero > 0:
            raise DomainError(f"negative-order norm of a field with nonzero mean {zero:.3e}")
    return float(v.grid.hnorm_spectrum(coeffs, s))


# ---------------------------------------------------------------------------
# trigonometric basis
# ---------------------------------------------------------------------------


def _half_lattice(d: int, count: int) -> list[tuple[int, ...]]:
    """First ``count`` representatives of ``(Z^d \\ {0}) / +-``, ordered by ``|k|^2``."""
    if d == 1:
        return [(m,) for m in range(1, count + 1)]
    radius = 1
    while True:
        reps = []
        for k1 in range(0, radius + 1):
            for k2 in range(-radius, radius + 1):
                if k1 > 0 or k2 > 0:
                    reps.append((k1, k2))
        reps.sort(key=lambda k: (k[0] ** 2 + k[1] ** 2, k[0], k[1]))
        # everything with |k| <= radius is present, so this prefix is final
        complete = [k for k in reps if k[0] ** 2 + k[1] ** 2 <= radius**2]
        if len(complete) >= count:
            return complete[:count]
        radius *= 2


@dataclass(frozen=True)
class TrigBasis:
    """Real trigonometric basis normalized in ``H^t``.

    Index ``j >= 1`` maps to the frequency ``k`` = ``ceil(j/2)``-th half-lattice
    vector, with ``cos`` for even ``j`` and ``sin`` for odd ``j``:
    ``psi_j = sqrt(2) cos|sin(2 pi k.x) / (2 pi |k|)**t``. In 1-D the frequency is
    simply ``ceil(j/2)``. Constants are excluded.
    """

    t: float
    d: int = 1

    def frequency(self, j: int) -> tuple[int, ...]:
        if j < 1:
            raise DomainError("basis index must be >= 1")
        m = (j + 1) // 2
        return _half_lattice(self.d, m)[m - 1]

    def parity(self, j: int) -> str:
        return "cos" if j % 2 == 0 else "sin"

    def scale(self, j: int) -> float:
        k = self.frequency(j)
        return 1.0 / (2 * np.pi * math.sqrt(sum(c * c for c in k))) ** self.t

    def values(self, j: int, grid: PeriodicGrid) -> np.ndarray:
        if grid.d != self.d:
            raise DomainError(f"basis is {self.d}-D, grid is {grid.d}-D")
        k = self.frequency(j)
        need = max(abs(c) for c in k)
        if need >= grid.n // 2:
            required = max(8, 2 * (need + 1))
            raise ResolutionError(
                f"psi_{j} has frequency {k}; needs n >= {required}, grid has n = {grid.n}",
                required_n=required,
            )
        phase = 2 * np.pi * sum(c * x for c, x in zip(k, grid.coords))
        wave = np.cos(phase) if j % 2 == 0 else np.sin(phase)
        return math.sqrt(2.0) * self.scale(j) * wave

    def matrix(self, J: int, grid: PeriodicGrid) -> np.ndarray:
        """Array of shape ``(J, *grid.shape)`` with ``psi_1, ..., psi_J``."""
        return np.stack([self.values(j, grid) for j in range(1, J + 1)]) if J else np.zeros((0,) + grid.shape)


def synthesize(coeffs: dict[int, float], basis: TrigBasis, grid: PeriodicGrid) -> PeriodicField:
    """Real field ``sum_j coeffs[j] * psi_j``."""
    out = np.zeros(grid.shape)
    for j, c in sorted(coeffs.items()):
        out = out + float(c) * basis.values(j, grid)
    return PeriodicField(grid, out)


# ---------------------------------------------------------------------------
# operator and solver
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SolverConfig:
    rel_tol: float = 1e-10
    max_iter: int = 10000
    omega: float | None = None
    dealias: bool = False

    def __post_init__(self):
        if not self.rel_tol > 0:
            raise DomainError("rel_tol must be positive")
        if self.max_iter < 1:
            raise DomainError("max_iter must be >= 1")
        if self.omega is not None and not self.omega > 0:
            raise DomainError("explicit relaxation must be positive")


def _dealias_mask(grid: PeriodicGrid) -> np.ndarray:
    cut = grid.n / 3.0
    mask = np.ones(grid.shape, dtype=bool)
    for k in grid.wavenumbers:
        mask &= np.abs(k) <= cut
    return mask


def _apply_spectral(coef: np.ndarray, u_hat: np.ndarray, grid: PeriodicGrid, dealias: bool = False) -> np.ndarray:
    """Spectrum of ``-div(coef grad u)``; ``coef`` holds real-space values of ``e^a``."""
    axes = grid.axes
    acc = np.zeros(np.broadcast_shapes(coef.shape, u_hat.shape), dtype=complex)
    mask = _dealias_mask(grid) if dealias else None
    for kd in grid.deriv_wavenumbers:
        ik = 2j * np.pi * kd
        grad = grid.to_values(ik * u_hat)
        flux_hat = grid.to_spectrum(coef * grad)
        if mask is not None:
            flux_hat = flux_hat * mask
        acc += ik * flux_hat
    return -acc


def apply_operator(a: PeriodicField, u: PeriodicField, dealias: bool = False) -> PeriodicField:
    """``-div(e^a grad u)``: spectral gradient, pointwise product, spectral divergence."""
    if a.grid != u.grid:
        raise DomainError(f"grid mismatch: {a.grid} vs {u.grid}")
    out = _apply_spectral(np.exp(a.values), u.spectrum, a.grid, dealias)
    return PeriodicField.from_spectrum(a.grid, out)


def relaxation(coef: np.ndarray, axes) -> np.ndarray:
    """Automatic Richardson relaxation for each coefficient sample.

    ``omega = 2 / (min Re e^a + max |e^a|)``. If that choice is not a
    contraction (possible for strongly complex coefficients) the safe value
    ``min Re(z) / |z|**2`` over the grid values ``z`` is used instead.
    """
    re_min = np.min(coef.real, axis=axes)
    abs_max = np.max(np.abs(coef), axis=axes)
    omega = 2.0 / (re_min + abs_max)
    expand = omega.reshape(omega.shape + (1,) * len(axes))
    factor = np.max(np.abs(1.0 - expand * coef), axis=axes)
    safe = np.min(coef.real / np.abs(coef) ** 2, axis=axes)
    return np.where(factor < 1.0 - 1e-12, omega, safe)


def solve_spectral(
    coef: np.ndarray,
    f_hat: np.ndarray,
    grid: PeriodicGrid,
    cfg: SolverConfig = SolverConfig(),
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Batched preconditioned Richardson iteration in spectral space.

    Parameters
    ----------
    coef : ndarray
        ``e^a`` on the grid, shape ``(B, *grid.shape)``.
    f_hat : ndarray
        Right-hand side spectra, shape ``(B, *grid.shape)`` or ``grid.shape``.

    Returns
    -------
    u_hat, iterations, residuals
        Solution spectra and, per sample, the number of updates and the
        final relative ``H^{-1}`` residual. Each sample stops updating as soon
        as its own residual meets the tolerance.
    """
    axes = tuple(range(1, grid.d + 1))
    coef = np.asarray(coef, dtype=complex)
    if coef.ndim != grid.d + 1:
        raise DomainError("coef must carry a leading batch axis")
    B = coef.shape[0]
    bad = np.min(coef.real, axis=axes) <= 0
    if np.any(bad):
        i = int(np.argmax(bad))
        raise CoefficientDegeneracyError(
            f"Re(e^a) <= 0 at some grid point (sample {i}, min Re = {np.min(coef[i].real):.3e})",
            sample=i,
        )
    f_hat = np.broadcast_to(np.asarray(f_hat, dtype=complex), coef.shape) * grid.range_mask
    f_norm = grid.hnorm_spectrum(f_hat, -1.0)
    if cfg.omega is None:
        omega = relaxation(coef, axes)
    else:
        omega = np.full(B, float(cfg.omega))
    pinv = grid.inv_laplace_symbol

    u_hat = np.zeros(coef.shape, dtype=complex)
    iters = np.zeros(B, dtype=np.int64)
    resid = np.zeros(B)
    active = np.nonzero(f_norm > 0)[0]
    step = 0
    while active.size:
        r = f_hat[active] - _apply_spectral(coef[active], u_hat[active], grid, cfg.dealias)
        rel = grid.hnorm_spectrum(r, -1.0) / f_norm[active]
        resid[active] = rel
        done = rel <= cfg.rel_tol
        keep = ~done
        if not np.any(keep):
            break
        if step == cfg.max_iter:
            worst = int(active[np.argmax(rel)])
            raise NonConvergenceError(
                f"no convergence after {cfg.max_iter} iterations; relative residual {rel.max():.3e} "
                f"(sample {worst})",
                residual=float(rel.max()),
                iterations=cfg.max_iter,
                sample=worst,
            )
        idx = active[keep]
        w = omega[idx].reshape((-1,) + (1,) * grid.d)
        u_hat[idx] += w * r[keep] * pinv
        iters[idx] += 1
        active = idx
        step += 1
    return u_hat, iters, resid


def solve_diffusion(a: PeriodicField, f: PeriodicField, cfg: SolverConfig = SolverConfig()) -> PeriodicField:
    """Zero-mean solution of ``-div(e^a grad u) = f`` on the torus.

    Damped Richardson iteration preconditioned by ``(-Delta)^{-1}``, stopped
    when the ``H^{-1}`` residual drops below ``cfg.rel_tol`` relative to
    ``|f|_{H^{-1}}``. ``a`` may be complex as long as ``Re e^a > 0`` on the grid.

    Raises
    ------
    DomainError
        Grid mismatch or ``f`` with nonzero mean.
    CoefficientDegeneracyError
        ``Re e^a <= 0`` at a grid point.
    NonConvergenceError
        ``cfg.max_iter`` reached.
    """
    if a.grid != f.grid:
        raise DomainError(f"grid mismatch: {a.grid} vs {f.grid}")
    mean = abs(f.spectrum.flat[0])
    if mean > 1e-12 * max(f.l2_norm(), 1e-300) and mean > 0:
        raise DomainError(f"right-hand side has nonzero mean {mean:.3e}")
    coef = np.exp(a.values)[None]
    u_hat, _, _ = solve_spectral(coef, f.spectrum, a.grid, cfg)
    return PeriodicField.from_spectrum(a.grid, u_hat[0])
