import math

import numpy as np
import pytest

from stochnse import fields, nonlinearity as nl
from stochnse.fields import SpectralField
from stochnse.nonlinearity import NonlinearityParams
from stochnse.spectral_basis import E001, ModeIndex, SpectralParams, lattice_partial_sum, radial_tail_bounds

from conftest import random_field

CONVECT = NonlinearityParams(1.0, 0.0)


def test_params_validation():
    with pytest.raises(ValueError):
        NonlinearityParams(rho=0.5)
    with pytest.raises(ValueError):
        NonlinearityParams(rho=1.0)
    with pytest.raises(ValueError):
        NonlinearityParams(c1=math.nan)


class TestConvectiveTerm:
    def test_constant_field(self):
        assert not np.any(nl.convective_term(fields.basis_field(E001, 2)).values)

    def test_shear_flow_is_steady(self):
        v = fields.basis_field(ModeIndex.vec0(1, 0), 3, 2.5)
        assert np.max(np.abs(nl.convective_term(v).values)) < 1e-13

    def test_two_mode_field_matches_pointwise(self, two_mode_xi):
        v = fields.embed(two_mode_xi, 3)
        m = 12
        x = fields.grid_points(m)
        X, Y = np.meshgrid(x, x, indexing="ij")
        # v = 0.5 sqrt2 (cos 2 pi y, sin 2 pi x)
        s = 0.5 * math.sqrt(2)
        u1, u2 = s * np.cos(2 * np.pi * Y), s * np.sin(2 * np.pi * X)
        expected = np.stack(
            [-u2 * s * 2 * np.pi * np.sin(2 * np.pi * Y), u1 * s * 2 * np.pi * np.cos(2 * np.pi * X)], axis=-1
        )
        got = nl.convective_term(v).values
        assert np.max(np.abs(got)) > 1.0
        assert np.max(np.abs(got - expected)) < 1e-10


class TestF:
    def test_linear_part_only(self, rng):
        v = random_field(rng, 4)
        assert np.allclose(nl.F(v, NonlinearityParams(0.0, 1.7)).coeffs, 1.7 * v.coeffs, rtol=0, atol=1e-15)

    def test_constant_field(self):
        assert not np.any(nl.F(fields.basis_field(E001, 3), CONVECT).coeffs)

    def test_two_mode_field_is_a_gradient(self, two_mode_xi):
        # the convection of this field is a pure gradient, which the projection removes
        out = nl.F(two_mode_xi, CONVECT, 4)
        assert np.max(np.abs(out.coeffs)) < 1e-13
        assert np.max(np.abs(out.coeffs - nl.F_oracle(two_mode_xi, CONVECT, 4).coeffs)) < 1e-10

    @pytest.mark.parametrize("n", [2, 3, 4])
    def test_oracle_equivalence(self, rng, n):
        p = NonlinearityParams(1.3, -0.4)
        for _ in range(25):
            v = random_field(rng, n)
            assert np.max(np.abs(nl.F(v, p).coeffs - nl.F_oracle(v, p).coeffs)) <= 1e-10

    def test_oracle_on_larger_modes(self, rng):
        v = random_field(rng, 6)
        assert np.max(np.abs(nl.F(v, CONVECT).coeffs - nl.F_oracle(v, CONVECT).coeffs)) <= 1e-10

    def test_oracle_guard_and_trivial_cases(self, rng):
        with pytest.raises(ValueError):
            nl.F_oracle(random_field(rng, 7))
        assert not np.any(nl.F_oracle(SpectralField.zeros(3)).coeffs)
        v = random_field(rng, 3)
        a = nl.F_oracle(v, NonlinearityParams(0.0, 2.0)).coeffs
        b = nl.F_oracle(v, NonlinearityParams(0.0, 1.0)).coeffs
        assert np.allclose(a, 2 * b, atol=1e-15)

    def test_projection_onto_smaller_set(self, rng):
        v = random_field(rng, 3)
        full = nl.F(v, CONVECT, 5)
        assert np.allclose(fields.project(full, 3).coeffs, nl.F(v, CONVECT).coeffs, atol=1e-12)

    def test_energy_orthogonality(self, rng):
        for n in (2, 4, 7, 12):
            v = random_field(rng, n)
            Fv = nl.F(v, CONVECT)
            assert abs(fields.inner(v, Fv)) <= 1e-10 * fields.norm_Hr(v, 0) * fields.norm_Hr(Fv, 0)

    def test_quadratic_homogeneity(self, rng):
        v = random_field(rng, 4)
        for a in (-2.0, 0.3, 7.0):
            assert np.allclose(nl.F(a * v, CONVECT).coeffs, a * a * nl.F(v, CONVECT).coeffs, atol=1e-10 * a * a)


class TestLipschitz:
    def test_examples(self):
        assert nl.lipschitz_theta(NonlinearityParams(0.0, 1.0), SpectralParams(1.0, 0.0)) == pytest.approx(1.0)
        assert nl.lipschitz_theta(NonlinearityParams(0.0, 0.0)) == 0.0
        with pytest.raises(ValueError):
            nl.lipschitz_theta(tail_tol=0.0)

    def test_series_value(self):
        # brute-force head plus a rigorous annulus bracket for the remainder
        rho = 0.8
        N = 300
        head = 1.0 + lattice_partial_sum(lambda lam: lam ** (-2 * rho), SpectralParams(), 0, N)
        lo, hi = radial_tail_bounds(lambda r: (1 + 4 * math.pi**2 * r * r) ** (-2 * rho), N)
        theta = nl.lipschitz_theta(NonlinearityParams(1.0, 0.0, rho))
        assert 4 * math.sqrt(head + lo) <= theta <= 4 * math.sqrt(head + hi) + 1e-8

    def test_monotone_in_rho(self):
        vals = [nl.lipschitz_theta(NonlinearityParams(1.0, 0.0, r)) for r in (0.55, 0.6, 0.75, 0.9)]
        assert all(b < a for a, b in zip(vals, vals[1:]))

    def test_bound_on_random_pairs(self, rng):
        p = NonlinearityParams(1.0, 0.5, 0.6)
        theta = nl.lipschitz_theta(p)
        for _ in range(60):
            v = random_field(rng, 4) * 10 ** rng.uniform(-1, 1)
            w = random_field(rng, 4) * 10 ** rng.uniform(-1, 1)
            lhs = fields.norm_Hr(nl.F(v, p) - nl.F(w, p), 0)
            rhs = theta * (1 + fields.norm_Hr(v, 0.6) + fields.norm_Hr(w, 0.6)) * fields.norm_Hr(v - w, 0.6)
            assert lhs <= rhs + 1e-9


class TestCoercivity:
    def test_zero_offset_pure_convection(self, rng):
        v = random_field(rng, 4)
        lhs, rhs = nl.coercivity_check(v, SpectralField.zeros(4), 0.25, CONVECT)
        assert lhs <= 1e-10 * fields.norm_Hr(v, 0) ** 3
        assert lhs <= rhs

    def test_zero_state(self, rng):
        lhs, rhs = nl.coercivity_check(SpectralField.zeros(4), random_field(rng, 4), 1.0)
        assert lhs == 0.0 and rhs >= 0.0

    @pytest.mark.parametrize("eps", [0.25, 1.0])
    def test_random_pairs(self, rng, eps):
        p = NonlinearityParams(1.0, -0.8)
        for _ in range(40):
            v = random_field(rng, 4) * 10 ** rng.uniform(-1, 2)
            w = random_field(rng, 4) * 10 ** rng.uniform(-1, 1)
            lhs, rhs = nl.coercivity_check(v, w, eps, p)
            assert lhs <= rhs + 1e-9

    def test_coefficients(self, rng):
        c = nl.coercivity_coefficients(SpectralField.zeros(3), 4.0)
        assert (c.phi_value, c.Phi_value) == (4.0, 4.0)
        w = random_field(rng, 3)
        c1, c2 = nl.coercivity_coefficients(w, 4.0), nl.coercivity_coefficients(2.0 * w, 4.0)
        assert c1.phi_value == pytest.approx(4.0 * (1 + c1.sup_norm**2))
        assert c2.phi_value - 4.0 == pytest.approx(4.0 * (c1.phi_value - 4.0), rel=1e-12)
        assert c1.Phi_value == pytest.approx(4.0 * max(1.0, c1.sup_norm**4.0))
        with pytest.raises(ValueError):
            nl.coercivity_coefficients(w, 0.5)

    def test_default_zeta(self):
        assert nl.default_zeta(NonlinearityParams(1.0, 0.0)) == 4.0
        assert nl.default_zeta(NonlinearityParams(2.0, 1.0)) == 8.5
        assert nl.default_zeta(NonlinearityParams(0.0, 10.0)) == 15.0
