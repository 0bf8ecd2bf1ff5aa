from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from oracles import dft_hnorm
from sparsepc.errors import CoefficientDegeneracyError, DomainError, NonConvergenceError, ResolutionError
from sparsepc.torus import (
    PeriodicField,
    PeriodicGrid,
    SolverConfig,
    TrigBasis,
    apply_operator,
    hnorm,
    relaxation,
    solve_diffusion,
    synthesize,
)

TWO_PI = 2 * np.pi


def field(grid, func):
    return PeriodicField.from_function(grid, func)


def grad_l2(v: PeriodicField) -> float:
    """``|grad v|_{L^2}`` from spectrally differentiated samples (not the Fourier-weighted sum)."""
    g = v.grid
    total = 0.0
    for k in g.wavenumbers:
        dv = np.fft.ifftn(2j * np.pi * k * np.fft.fftn(v.values))
        total += float(np.mean(np.abs(dv) ** 2))
    return math.sqrt(total)


class TestGrid:
    @pytest.mark.parametrize("d,n", [(0, 8), (3, 8), (1, 6), (1, 9), (2, 10 + 1)])
    def test_invalid(self, d, n):
        with pytest.raises(DomainError):
            PeriodicGrid(d, n)

    def test_shape(self):
        g = PeriodicGrid(2, 8)
        assert g.shape == (8, 8) and g.size == 64
        assert g.coords[0][3, 5] == 3 / 8 and g.coords[1][3, 5] == 5 / 8

    def test_nyquist_removed_from_derivatives(self):
        g = PeriodicGrid(1, 8)
        assert g.wavenumbers[0][4] == -4
        assert g.deriv_wavenumbers[0][4] == 0
        assert not g.range_mask[4] and not g.range_mask[0]


class TestField:
    @given(st.integers(0, 2**31 - 1))
    def test_spectrum_roundtrip(self, seed):
        rng = np.random.default_rng(seed)
        g = PeriodicGrid(1 + seed % 2, 8 * (1 + seed % 3))
        v = PeriodicField(g, rng.normal(size=g.shape) + 1j * rng.normal(size=g.shape))
        back = PeriodicField.from_spectrum(g, v.spectrum)
        assert np.max(np.abs(back.values - v.values)) <= 1e-13 * np.max(np.abs(v.values))

    def test_real_field_has_symmetric_spectrum(self):
        g = PeriodicGrid(1, 16)
        v = field(g, lambda x: np.sin(TWO_PI * x) + np.cos(6 * np.pi * x) ** 2)
        assert v.is_real()
        c = v.centered_spectrum()  # k = -8..7
        for k in range(1, 8):
            assert c[8 + k] == pytest.approx(np.conj(c[8 - k]), abs=1e-15)

    def test_sin_coefficients(self):
        g = PeriodicGrid(1, 16)
        s = field(g, lambda x: np.sin(TWO_PI * x)).spectrum
        assert s[1] == pytest.approx(-0.5j, abs=1e-15)
        assert s[-1] == pytest.approx(0.5j, abs=1e-15)

    @pytest.mark.parametrize("d", [1, 2])
    def test_bytes_roundtrip(self, d):
        g = PeriodicGrid(d, 8)
        rng = np.random.default_rng(1)
        for vals in (rng.normal(size=g.shape), rng.normal(size=g.shape) + 1j * rng.normal(size=g.shape)):
            v = PeriodicField(g, vals)
            data = v.to_bytes()
            assert len(data) == 24 + 16 * g.size
            assert np.frombuffer(data[:24], dtype="<i8").tolist() == [d, 8, int(np.isrealobj(vals))]
            w = PeriodicField.from_bytes(data)
            assert w.grid == g
            np.testing.assert_array_equal(w.values, v.values)

    def test_bytes_payload_layout(self):
        g = PeriodicGrid(2, 8)
        v = field(g, lambda x, y: x + 10 * y)
        payload = np.frombuffer(v.to_bytes()[24:], dtype="<f8")
        # row-major, interleaved (re, im): sample (0, 1) has value 10/8
        assert payload[2] == 10 / 8 and payload[3] == 0.0

    def test_bad_bytes(self):
        with pytest.raises(DomainError):
            PeriodicField.from_bytes(b"\x00" * 10)
        g = PeriodicGrid(1, 8)
        with pytest.raises(DomainError):
            PeriodicField.from_bytes(PeriodicField.zeros(g).to_bytes()[:-16])

    def test_csv(self):
        g = PeriodicGrid(1, 8)
        text = field(g, lambda x: np.cos(TWO_PI * x)).to_csv().splitlines()
        assert text[0] == "x,re,im"
        assert len(text) == 9
        x, re, im = map(float, text[3].split(","))
        assert (x, im) == (0.25, 0.0) and re == pytest.approx(0.0, abs=1e-15)

    def test_grid_mismatch(self):
        with pytest.raises(DomainError):
            PeriodicField.zeros(PeriodicGrid(1, 8)) + PeriodicField.zeros(PeriodicGrid(1, 16))


class TestNorms:
    def test_sin_norms(self):
        v = field(PeriodicGrid(1, 32), lambda x: np.sin(TWO_PI * x))
        assert hnorm(v, 0) == pytest.approx(math.sqrt(0.5), rel=1e-14)
        assert hnorm(v, 1) == pytest.approx(TWO_PI * math.sqrt(0.5), rel=1e-14)
        assert hnorm(v, 1) == pytest.approx(4.44288, abs=5e-6)

    def test_constant(self):
        v = PeriodicField(PeriodicGrid(1, 8), np.full(8, 3.0))
        assert hnorm(v, 0) == 0.0 and hnorm(v, 2.5) == 0.0

    def test_negative_order_requires_zero_mean(self):
        g = PeriodicGrid(1, 8)
        with pytest.raises(DomainError):
            hnorm(field(g, lambda x: 1 + np.sin(TWO_PI * x)), -1)
        assert hnorm(field(g, lambda x: np.sin(TWO_PI * x)), -1) == pytest.approx(math.sqrt(0.5) / TWO_PI)

    @given(st.integers(0, 10_000), st.floats(-1.0, 2.0))
    def test_matches_dft_matrix(self, seed, s):
        rng = np.random.default_rng(seed)
        vals = rng.normal(size=16)
        vals -= vals.mean()
        v = PeriodicField(PeriodicGrid(1, 16), vals)
        assert hnorm(v, s) == pytest.approx(dft_hnorm(vals, s), rel=1e-11)

    @pytest.mark.parametrize("d", [1, 2])
    def test_h1_equals_gradient_norm(self, d):
        g = PeriodicGrid(d, 16)
        rng = np.random.default_rng(d)
        if d == 1:
            v = field(g, lambda x: rng.normal() * np.sin(TWO_PI * x) + rng.normal() * np.cos(8 * np.pi * x))
        else:
            v = field(g, lambda x, y: np.sin(TWO_PI * (x + 2 * y)) + 0.3 * np.cos(TWO_PI * 3 * x))
        assert hnorm(v, 1) == pytest.approx(grad_l2(v), rel=1e-12)


class TestBasis:
    def test_frequency_map(self):
        b = TrigBasis(1.0)
        assert [b.frequency(j)[0] for j in range(1, 7)] == [1, 1, 2, 2, 3, 3]
        assert [b.parity(j) for j in (1, 2)] == ["sin", "cos"]

    def test_synthesize_examples(self):
        g = PeriodicGrid(1, 16)
        x = g.coords[0]
        assert np.all(synthesize({}, TrigBasis(0.0), g).values == 0)
        np.testing.assert_allclose(synthesize({2: 1.0}, TrigBasis(0.0), g).real, math.sqrt(2) * np.cos(TWO_PI * x), atol=1e-15)
        np.testing.assert_allclose(
            synthesize({2: 1.0}, TrigBasis(1.0), g).real, math.sqrt(2) * np.cos(TWO_PI * x) / TWO_PI, atol=1e-15
        )

    @pytest.mark.parametrize("d,t", [(1, 0.0), (1, 1.0), (1, 2.5), (2, 1.5)])
    def test_unit_norm_and_orthogonality(self, d, t):
        g = PeriodicGrid(d, 16)
        b = TrigBasis(t, d)
        P = b.matrix(12, g).reshape(12, -1)
        for j in range(1, 13):
            assert hnorm(PeriodicField(g, b.values(j, g)), t) == pytest.approx(1.0, rel=1e-13)
        gram = P @ P.T / g.size
        off = gram - np.diag(np.diag(gram))
        assert np.max(np.abs(off)) < 1e-14

    def test_two_dimensional_frequencies_distinct(self):
        b = TrigBasis(1.5, 2)
        ks = [b.frequency(j) for j in range(1, 41, 2)]
        assert len(set(ks)) == len(ks)
        norms = [k[0] ** 2 + k[1] ** 2 for k in ks]
        assert norms == sorted(norms)

    def test_resolution_error(self):
        g = PeriodicGrid(1, 8)
        with pytest.raises(ResolutionError) as info:
            synthesize({8: 1.0}, TrigBasis(1.0), g)
        assert info.value.required_n == 10
        assert "10" in str(info.value)


class TestOperator:
    def test_laplacian(self):
        g = PeriodicGrid(1, 32)
        u = field(g, lambda x: np.sin(TWO_PI * x))
        out = apply_operator(PeriodicField.zeros(g), u)
        np.testing.assert_allclose(out.real, 4 * np.pi**2 * u.real, atol=1e-11)

    def test_constant_coefficient(self):
        g = PeriodicGrid(1, 32)
        u = field(g, lambda x: np.cos(4 * np.pi * x) + 0.2 * np.sin(TWO_PI * x))
        c = 0.7
        scaled = apply_operator(PeriodicField(g, np.full(32, c)), u)
        base = apply_operator(PeriodicField.zeros(g), u)
        np.testing.assert_allclose(scaled.values, math.exp(c) * base.values, atol=1e-10)

    def test_constant_field(self):
        g = PeriodicGrid(2, 8)
        a = field(g, lambda x, y: np.sin(TWO_PI * x))
        out = apply_operator(a, PeriodicField(g, np.ones(g.shape)))
        assert np.max(np.abs(out.values)) == 0.0

    def test_grid_mismatch(self):
        with pytest.raises(DomainError):
            apply_operator(PeriodicField.zeros(PeriodicGrid(1, 8)), PeriodicField.zeros(PeriodicGrid(1, 16)))

    def test_dealiasing_flag_matches_for_band_limited_data(self):
        g = PeriodicGrid(1, 64)
        a = field(g, lambda x: 0.3 * np.sin(TWO_PI * x))
        u = field(g, lambda x: np.sin(TWO_PI * x))
        diff = apply_operator(a, u).values - apply_operator(a, u, dealias=True).values
        assert np.max(np.abs(diff)) < 1e-6 * np.max(np.abs(apply_operator(a, u).values))


class TestSolver:
    def test_poisson(self):
        g = PeriodicGrid(1, 64)
        f = field(g, lambda x: np.sin(TWO_PI * x))
        u = solve_diffusion(PeriodicField.zeros(g), f)
        np.testing.assert_allclose(u.real, np.sin(TWO_PI * g.coords[0]) / (4 * np.pi**2), atol=1e-13)
        assert u.sup_norm() == pytest.approx(0.0253303, abs=5e-8)

    @pytest.mark.parametrize("c", [-1.0, 0.4, 2.0])
    def test_constant_coefficient(self, c):
        g = PeriodicGrid(1, 64)
        f = field(g, lambda x: np.sin(TWO_PI * x))
        u = solve_diffusion(PeriodicField(g, np.full(64, c)), f)
        ref = math.exp(-c) * np.sin(TWO_PI * g.coords[0]) / (4 * np.pi**2)
        assert hnorm(PeriodicField(g, u.values - ref), 1) <= 1e-10 * hnorm(PeriodicField(g, ref), 1)

    def test_manufactured(self):
        g = PeriodicGrid(1, 128)
        a = field(g, lambda x: 0.5 * np.sin(TWO_PI * x))
        u_star = field(g, lambda x: np.sin(TWO_PI * x) + 0.3 * np.cos(4 * np.pi * x))
        u = solve_diffusion(a, apply_operator(a, u_star))
        assert hnorm(u - u_star, 1) <= 1e-8 * hnorm(u_star, 1)

    def test_manufactured_two_dimensional(self):
        g = PeriodicGrid(2, 32)
        a = field(g, lambda x, y: 0.4 * np.sin(TWO_PI * x) * np.cos(TWO_PI * y))
        u_star = field(g, lambda x, y: np.sin(TWO_PI * (x + y)) + 0.2 * np.cos(TWO_PI * 2 * y))
        u = solve_diffusion(a, apply_operator(a, u_star))
        assert hnorm(u - u_star, 1) <= 1e-8 * hnorm(u_star, 1)

    def test_real_data_gives_real_solution(self):
        g = PeriodicGrid(1, 64)
        a = field(g, lambda x: 0.8 * np.cos(TWO_PI * x) - 0.3 * np.sin(6 * np.pi * x))
        f = field(g, lambda x: np.sin(TWO_PI * x) + np.cos(10 * np.pi * x))
        u = solve_diffusion(a, f)
        assert np.max(np.abs(u.imag)) <= 1e-11 * np.max(np.abs(u.real))

    def test_zero_mean_solution(self):
        g = PeriodicGrid(1, 32)
        u = solve_diffusion(field(g, lambda x: np.cos(TWO_PI * x)), field(g, lambda x: np.sin(TWO_PI * x)))
        assert abs(u.mean()) < 1e-15

    def test_linearity(self):
        g = PeriodicGrid(1, 64)
        a = field(g, lambda x: 0.6 * np.sin(TWO_PI * x))
        f1 = field(g, lambda x: np.sin(TWO_PI * x))
        f2 = field(g, lambda x: np.cos(6 * np.pi * x))
        cfg = SolverConfig(rel_tol=1e-12)
        lhs = solve_diffusion(a, f1 * 2.0 + f2 * (-3.0), cfg)
        rhs = solve_diffusion(a, f1, cfg) * 2.0 + solve_diffusion(a, f2, cfg) * (-3.0)
        assert hnorm(lhs - rhs, 1) <= 1e-9 * hnorm(lhs, 1)

    def test_resolution_convergence(self):
        errs = []
        for n in (8, 16, 32):
            g = PeriodicGrid(1, n)
            a = field(g, lambda x: 0.5 * np.sin(TWO_PI * x))
            fine = PeriodicGrid(1, 256)
            a_fine = field(fine, lambda x: 0.5 * np.sin(TWO_PI * x))
            u_star = field(fine, lambda x: np.exp(np.sin(TWO_PI * x)) - np.i0(1.0))
            f_fine = apply_operator(a_fine, u_star)
            f = field(g, lambda x: np.interp(x, fine.coords[0], f_fine.real))
            f = PeriodicField(g, f.values - f.mean())
            u = solve_diffusion(a, f, SolverConfig(rel_tol=1e-13))
            ref = field(g, lambda x: np.exp(np.sin(TWO_PI * x)))
            ref = PeriodicField(g, ref.values - ref.mean())
            errs.append(hnorm(u - ref, 1) / hnorm(ref, 1))
        assert errs[1] < 0.2 * errs[0] and errs[2] < 0.2 * errs[1]

    def test_complex_coefficient(self):
        g = PeriodicGrid(1, 64)
        a = field(g, lambda x: 0.5 * np.sin(TWO_PI * x) + 0.4j * np.cos(TWO_PI * x))
        u_star = field(g, lambda x: np.sin(TWO_PI * x))
        u = solve_diffusion(a, apply_operator(a, u_star))
        assert hnorm(u - u_star, 1) <= 1e-8

    def test_strongly_complex_coefficient_uses_safe_relaxation(self):
        z = np.exp(np.array([[0.0, 1.4j, -1.4j, 0.3]]))
        omega = relaxation(z, (1,))
        assert np.max(np.abs(1 - omega[0] * z)) < 1
        g = PeriodicGrid(1, 32)
        a = field(g, lambda x: 1.4j * np.sin(TWO_PI * x))
        u_star = field(g, lambda x: np.cos(TWO_PI * x))
        u = solve_diffusion(a, apply_operator(a, u_star))
        assert hnorm(u - u_star, 1) <= 1e-8

    def test_degenerate_coefficient(self):
        g = PeriodicGrid(1, 32)
        a = field(g, lambda x: 2.0j * np.sin(TWO_PI * x))
        with pytest.raises(CoefficientDegeneracyError):
            solve_diffusion(a, field(g, lambda x: np.sin(TWO_PI * x)))

    def test_non_convergence_reports_residual(self):
        g = PeriodicGrid(1, 32)
        a = field(g, lambda x: 2.0 * np.sin(TWO_PI * x))
        with pytest.raises(NonConvergenceError) as info:
            solve_diffusion(a, field(g, lambda x: np.sin(TWO_PI * x)), SolverConfig(max_iter=3))
        assert info.value.residual > 1e-10 and info.value.iterations == 3

    def test_nonzero_mean_rhs(self):
        g = PeriodicGrid(1, 16)
        with pytest.raises(DomainError):
            solve_diffusion(PeriodicField.zeros(g), PeriodicField(g, np.ones(16)))

    def test_invalid_config(self):
        with pytest.raises(DomainError):
            SolverConfig(rel_tol=0.0)
        with pytest.raises(DomainError):
            SolverConfig(max_iter=0)
