"""Convective nonlinearity ``F(v) = c2 v - c1 (v . grad) v`` projected onto a mode set.

The fast path synthesizes ``v`` and its two spectral derivatives on the
``4n x 4n`` grid, multiplies pointwise and analyzes the product back.  Because
the product is band-limited below ``2n`` and analysis tests against modes below
``n``, the midpoint rule is exact and the result equals the Galerkin projection
up to roundoff.  :func:`F_oracle` recomputes the same coefficients from scratch
by dense quadrature and shares none of the transform tables.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import fields
from .fields import GridField, SpectralField
from .spectral_basis import (
    DEFAULT_SPECTRAL,
    SpectralParams,
    build_mode_set,
    eval_basis,
    eval_basis_derivative,
    spectral_series,
)

ORACLE_MAX_N = 6
# accuracy of the lattice series relative to its value (checked against brute force in the tests)
_SERIES_REL_ACCURACY = 1e-11


@dataclass(frozen=True)
class NonlinearityParams:
    c1: float = 1.0
    c2: float = 0.0
    rho: float = 0.6

    def __post_init__(self):
        for name in ("c1", "c2", "rho"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")
        if not 0.5 < self.rho < 1.0:
            raise ValueError(f"rho must lie strictly between 1/2 and 1, got {self.rho}")


DEFAULT_NONLINEARITY = NonlinearityParams()


@dataclass(frozen=True)
class CoercivityCoefficients:
    zeta: float
    phi_value: float
    Phi_value: float
    sup_norm: float


def default_zeta(params: NonlinearityParams = DEFAULT_NONLINEARITY) -> float:
    c1, c2 = params.c1, abs(params.c2)
    return max(1.5 * c2, 0.5 * c2 + 2.0 * c1 * c1, 4.0)


# ---------------------------------------------------------------------------
# fast path
# ---------------------------------------------------------------------------


def convective_values(c: np.ndarray, n: int, m: int | None = None, method: str = "auto") -> np.ndarray:
    """Grid samples of ``v_1 d_1 v + v_2 d_2 v`` for coefficient vector ``c``."""
    if m is None:
        m = 4 * n
    u = fields.synthesize_coeffs(c, n, m, method)
    d1 = fields.synthesize_coeffs(fields.derivative_coeffs(c, n, 1), n, m, method)
    d2 = fields.synthesize_coeffs(fields.derivative_coeffs(c, n, 2), n, m, method)
    return u[:, :, 0:1] * d1 + u[:, :, 1:2] * d2


def F_coeffs(c: np.ndarray, n: int, params: NonlinearityParams = DEFAULT_NONLINEARITY, method: str = "auto") -> np.ndarray:
    """Array-level ``F`` on the resolution-``n`` coefficients (hot path of the scheme)."""
    out = params.c2 * c if params.c2 != 0.0 else np.zeros_like(c)
    if params.c1 != 0.0:
        conv = convective_values(c, n, method=method)
        out = out - params.c1 * fields.analyze_values(conv, n, method)
    return out


def convective_term(v: SpectralField, m: int | None = None) -> GridField:
    return GridField(convective_values(v.coeffs, v.n, m))


def F(v: SpectralField, params: NonlinearityParams = DEFAULT_NONLINEARITY, n: int | None = None) -> SpectralField:
    """``P_n R (c2 v - c1 sum_j v_j d_j v)`` as a field on the resolution-``n`` modes."""
    if n is None:
        n = v.n
    v = fields.to_resolution(v, n)
    return SpectralField(v.mode_set, F_coeffs(v.coeffs, n, params))


# ---------------------------------------------------------------------------
# independent oracle
# ---------------------------------------------------------------------------


def F_oracle(
    v: SpectralField, params: NonlinearityParams = DEFAULT_NONLINEARITY, n: int | None = None, m: int | None = None
) -> SpectralField:
    """Dense-quadrature evaluation of ``F`` from pointwise basis formulas only."""
    if n is None:
        n = v.n
    if n > ORACLE_MAX_N or v.n > ORACLE_MAX_N:
        raise ValueError(f"F_oracle is limited to n <= {ORACLE_MAX_N}")
    if m is None:
        m = 8 * max(n, v.n)
    if m < 8 * max(n, v.n):
        raise ValueError("F_oracle needs m >= 8n")
    x = (np.arange(m) + 0.5) / m
    X, Y = np.meshgrid(x, x, indexing="ij")
    u = np.zeros((m, m, 2))
    du = [np.zeros((m, m, 2)), np.zeros((m, m, 2))]
    for mode, c in zip(v.mode_set.modes, v.coeffs):
        if c == 0.0:
            continue
        u += c * eval_basis(mode, X, Y)
        du[0] += c * eval_basis_derivative(mode, 1, X, Y)
        du[1] += c * eval_basis_derivative(mode, 2, X, Y)
    g = params.c2 * u - params.c1 * (u[:, :, 0:1] * du[0] + u[:, :, 1:2] * du[1])
    target = build_mode_set(n)
    out = np.array([np.sum(eval_basis(h, X, Y) * g) / (m * m) for h in target.modes])
    return SpectralField(target, out)


# ---------------------------------------------------------------------------
# executable estimates
# ---------------------------------------------------------------------------


def lipschitz_theta(
    params: NonlinearityParams = DEFAULT_NONLINEARITY,
    spectral: SpectralParams = DEFAULT_SPECTRAL,
    tail_tol: float = 1e-8,
) -> float:
    """Local Lipschitz constant of ``F`` from ``H_rho`` into ``H``.

    The series over all basis elements is summed with the lattice-sum routine;
    its error estimate is added on top so the returned value errs upward.
    """
    if not tail_tol > 0:
        raise ValueError("tail_tol must be positive")
    linear = abs(params.c2) * (spectral.kappa + spectral.epsilon_shift) ** (-params.rho)
    if params.c1 == 0.0:
        return linear
    two_rho = 2.0 * params.rho
    series = spectral_series(lambda lam: lam ** (-two_rho), spectral)
    margin = _SERIES_REL_ACCURACY * series
    if margin > tail_tol:
        raise ValueError(f"tail_tol={tail_tol:g} is below the attainable series accuracy {margin:.1e}")
    return max(linear, 4.0 * abs(params.c1) * math.sqrt(series + margin))


def coercivity_check(
    v: SpectralField,
    w: SpectralField,
    eps: float,
    params: NonlinearityParams = DEFAULT_NONLINEARITY,
    m: int | None = None,
    spectral: SpectralParams = DEFAULT_SPECTRAL,
) -> tuple[float, float]:
    """Return ``(|<v, F(v + w)>|, bound)`` for the generalized coercivity estimate."""
    if not eps > 0:
        raise ValueError("eps must be positive")
    n = max(v.n, w.n)
    v, w = fields.to_resolution(v, n), fields.to_resolution(w, n)
    lhs = abs(fields.inner(v, F(v + w, params)))
    s2 = fields.sup_norm(w, m) ** 2
    c1sq, c2 = params.c1**2, abs(params.c2)
    v_h = fields.norm_Hr(v, 0.0, spectral) ** 2
    v_half = fields.norm_Hr(v, 0.5, spectral) ** 2
    rhs = (1.5 * c2 + c1sq / (2 * eps) * s2) * v_h + 2 * eps * v_half + 0.5 * c2 * s2 + c1sq / (2 * eps) * s2 * s2
    return lhs, rhs


def coercivity_coefficients(w: SpectralField, zeta: float, m: int | None = None) -> CoercivityCoefficients:
    """``phi(w) = zeta (1 + s^2)`` and ``Phi(w) = zeta max(1, s^zeta)`` with ``s`` the grid sup-norm."""
    if not zeta >= 1:
        raise ValueError("zeta must be at least 1")
    s = fields.sup_norm(w, m)
    return CoercivityCoefficients(zeta, zeta * (1.0 + s * s), zeta * max(1.0, s**zeta), s)
