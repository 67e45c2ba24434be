import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from stochnse import fields
from stochnse.spectral_basis import (
    E001,
    ModeIndex,
    SpectralParams,
    Variant,
    build_mode_set,
    derivative_mode,
    eigenvalue,
    eval_basis,
    eval_basis_derivative,
    eval_phi,
    lattice_partial_sum,
    mode_count,
    projection_tail_bound,
    radial_tail_bounds,
    spectral_series,
)

PI2 = math.pi**2


def brute_count(n):
    return 1 + sum(1 for k in range(-n, n + 1) for l in range(-n, n + 1) if k * k + l * l < n * n)


class TestModeIndex:
    def test_e001_forces_zero_wavevector(self):
        with pytest.raises(ValueError):
            ModeIndex(Variant.E001, 1, 0)

    def test_ordering_puts_e001_first(self):
        modes = [ModeIndex.vec0(0, -1), E001, ModeIndex.vec0(-1, 0), ModeIndex.vec0(0, 0)]
        assert sorted(modes)[0] == E001
        assert sorted(modes)[1:] == [ModeIndex.vec0(-1, 0), ModeIndex.vec0(0, -1), ModeIndex.vec0(0, 0)]

    def test_variant_parse(self):
        assert Variant.parse("Vec0") is Variant.VEC0
        assert Variant.parse("e001") is Variant.E001
        with pytest.raises(ValueError):
            Variant.parse("Vec1")


class TestEigenvalue:
    def test_constant_modes(self):
        assert eigenvalue(E001, SpectralParams(1.0)) == 1.0
        assert eigenvalue(ModeIndex.vec0(0, 0), SpectralParams(0.3)) == 0.3

    def test_vec0(self):
        assert eigenvalue(ModeIndex.vec0(1, 0)) == pytest.approx(1 + 4 * PI2, rel=1e-15)
        assert eigenvalue(ModeIndex.vec0(3, 4), SpectralParams(0.5)) == pytest.approx(0.5 + 100 * PI2, rel=1e-15)

    def test_invalid_params(self):
        with pytest.raises(ValueError):
            SpectralParams(epsilon_shift=0.0)
        with pytest.raises(ValueError):
            SpectralParams(kappa=-1.0)


class TestModeSet:
    def test_small_sizes(self):
        assert build_mode_set(1).modes == (E001, ModeIndex.vec0(0, 0))
        assert len(build_mode_set(2)) == 10
        assert len(build_mode_set(4)) == brute_count(4)

    @pytest.mark.parametrize("n", [1, 2, 3, 5, 8, 13, 32])
    def test_count_formula(self, n):
        assert mode_count(n) == brute_count(n) == len(build_mode_set(n))

    def test_rejects_nonpositive(self):
        with pytest.raises(ValueError):
            build_mode_set(0)

    def test_canonical_and_strict(self):
        ms = build_mode_set(5)
        assert list(ms.modes) == sorted(ms.modes)
        assert len(set(ms.modes)) == len(ms)
        assert all(m.radius_sq < 25 for m in ms.modes)
        assert ModeIndex.vec0(3, 4) not in ms

    def test_positions_nested(self):
        small, big = build_mode_set(3), build_mode_set(6)
        pos = small.positions_in(big)
        assert [big.modes[i] for i in pos] == list(small.modes)


class TestPhiAndBasis:
    def test_phi_values(self):
        assert eval_phi(0, 0.37) == 1.0
        assert eval_phi(-1, 0.25) == pytest.approx(math.sqrt(2), abs=1e-15)
        assert eval_phi(1, 0.5) == pytest.approx(-math.sqrt(2), abs=1e-15)

    def test_constant_basis_fields(self):
        assert np.allclose(eval_basis(ModeIndex.vec0(0, 0), 0.3, 0.8), [1, 0])
        assert np.allclose(eval_basis(E001, 0.3, 0.8), [0, 1])

    def test_vec0_10(self):
        assert np.allclose(eval_basis(ModeIndex.vec0(1, 0), 0.25, 0.6), [0, math.sqrt(2)], atol=1e-15)

    def test_gram_identity(self):
        for n in range(1, 7):
            m = 4 * n
            x = (np.arange(m) + 0.5) / m
            X, Y = np.meshgrid(x, x, indexing="ij")
            vals = np.stack([eval_basis(h, X, Y).reshape(-1) for h in build_mode_set(n).modes])
            gram = vals @ vals.T / m**2
            assert np.max(np.abs(gram - np.eye(len(vals)))) < 1e-10

    def test_sup_norm_bound(self):
        x = (np.arange(256) + 0.5) / 256
        X, Y = np.meshgrid(x, x, indexing="ij")
        for h in build_mode_set(6).modes:
            assert np.max(np.linalg.norm(eval_basis(h, X, Y), axis=-1)) <= 2 + 1e-12


class TestDerivatives:
    def test_examples(self):
        c, t = derivative_mode(ModeIndex.vec0(2, 3), 1)
        assert c == pytest.approx(-4 * math.pi) and t == ModeIndex.vec0(-2, 3)
        assert derivative_mode(E001, 1) == (0.0, E001)
        assert derivative_mode(ModeIndex.vec0(1, 0), 2) == (0.0, ModeIndex.vec0(1, 0))

    def test_matches_pointwise_chain_rule(self, rng):
        x, y = rng.uniform(0, 1, 20), rng.uniform(0, 1, 20)
        for h in build_mode_set(5).modes:
            for j in (1, 2):
                c, t = derivative_mode(h, j)
                assert np.allclose(eval_basis_derivative(h, j, x, y), c * eval_basis(t, x, y), atol=1e-12)

    @staticmethod
    def _fd_divergence(h, m):
        dx = 1.0 / m
        x = (np.arange(m) + 0.5) / m
        X, Y = np.meshgrid(x, x, indexing="ij")
        u = eval_basis(h, X, Y)
        return (np.roll(u[..., 0], -1, 0) - np.roll(u[..., 0], 1, 0)) / (2 * dx) + (
            np.roll(u[..., 1], -1, 1) - np.roll(u[..., 1], 1, 1)
        ) / (2 * dx)

    def test_basis_is_divergence_free_by_finite_differences(self):
        m = 256
        for h in build_mode_set(4).modes:
            assert np.max(np.abs(self._fd_divergence(h, m))) <= 1e-6 * m**2

    def test_finite_difference_divergence_is_second_order(self):
        h = ModeIndex.vec0(3, 2)
        e1 = np.max(np.abs(self._fd_divergence(h, 128)))
        e2 = np.max(np.abs(self._fd_divergence(h, 256)))
        assert 3.8 < e1 / e2 < 4.2

    def test_coefficient_bounded_by_sqrt_eigenvalue(self):
        for h in build_mode_set(8).modes:
            for j in (1, 2):
                assert abs(derivative_mode(h, j)[0]) <= math.sqrt(eigenvalue(h))

    def test_derivative_orthogonality(self):
        m = 32
        x = (np.arange(m) + 0.5) / m
        X, Y = np.meshgrid(x, x, indexing="ij")
        modes = build_mode_set(6).modes
        for j in (1, 2):
            d = np.stack([eval_basis_derivative(h, j, X, Y).reshape(-1) for h in modes])
            g = d @ d.T / m**2
            off = g - np.diag(np.diag(g))
            assert np.max(np.abs(off)) <= 1e-10


class TestProjectionTailBound:
    def test_formula(self):
        assert projection_tail_bound(1, 1.0) == pytest.approx(1 / (1 + 4 * PI2))
        assert projection_tail_bound(3, 0.4) == pytest.approx((1 + 36 * PI2) ** -0.4)

    def test_decreasing(self):
        vals = [projection_tail_bound(n, 0.3) for n in range(1, 10)]
        assert all(b < a for a, b in zip(vals, vals[1:]))
        assert projection_tail_bound(2, 50.0) < 1e-100

    def test_rejects_nonpositive_exponent(self):
        with pytest.raises(ValueError):
            projection_tail_bound(2, 0.0)


class TestSpectralSeries:
    def test_partial_sums_monotone_cauchy(self):
        term = lambda lam: lam ** (-1.5)
        sums = [lattice_partial_sum(term, SpectralParams(), 0, n) for n in (4, 8, 16, 32, 64)]
        assert all(b > a for a, b in zip(sums, sums[1:]))
        diffs = np.diff(sums)
        assert all(b < a for a, b in zip(diffs, diffs[1:]))

    @pytest.mark.parametrize("a", [1.5, 2.0, 3.0])
    def test_full_series_against_rigorous_bracket(self, a):
        p = SpectralParams()
        N = 200
        # the E001 element is not part of the lattice
        head = 1.0 + lattice_partial_sum(lambda lam: lam ** (-a), p, 0, N)
        lo, hi = radial_tail_bounds(lambda r: (1 + 4 * PI2 * r * r) ** (-a), N)
        value = spectral_series(lambda lam: lam ** (-a), p)
        assert head + lo <= value <= head + hi

    def test_excluded_series_against_brute_force(self):
        p = SpectralParams(epsilon_shift=0.7, kappa=0.2)
        term = lambda lam: (p.kappa + lam) ** 1.5 * lam ** (-3.0)
        brute = lattice_partial_sum(term, p, 5, 400)
        lo, hi = radial_tail_bounds(lambda r: term(p.epsilon_shift + 4 * PI2 * r * r), 400)
        value = spectral_series(term, p, exclude_n=5)
        assert brute + lo - 1e-15 <= value <= brute + hi + 1e-15

    @settings(max_examples=15, deadline=None)
    @given(st.floats(0.3, 3.0))
    def test_series_positive_and_finite(self, eps):
        v = spectral_series(lambda lam: lam ** (-1.0 - eps), SpectralParams())
        assert math.isfinite(v) and v > 1.0


def test_sparse_field_helper_roundtrip():
    f = fields.basis_field(ModeIndex.vec0(2, -1))
    assert f.n == 3 and f.coefficient(ModeIndex.vec0(2, -1)) == 1.0
