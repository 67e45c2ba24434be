"""Coefficient vectors over a mode set, Sobolev-type norms and grid transforms.

Grids are midpoint grids: sample ``(i, j)`` sits at ``((i + 1/2)/m, (j + 1/2)/m)``.
The m-point periodic rectangle rule integrates every trigonometric frequency
``f`` exactly unless ``f`` is a nonzero multiple of ``m``, so with ``m >= 4n``
inner products of triple products of resolution-``n`` fields are exact.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Mapping

import numpy as np

from . import _kernels
from . import spectral_basis
from .spectral_basis import (
    DEFAULT_SPECTRAL,
    ModeIndex,
    ModeSet,
    SpectralParams,
    Variant,
    build_mode_set,
)

# direct summation wins up to n = 4 (measured with benchmarks/bench_kernels.py), BLAS above
DIRECT_MAX_N = 4


@dataclass(frozen=True, eq=False)
class SpectralField:
    """``v = sum_h coeffs[h] * h`` over ``mode_set`` (canonical order)."""

    mode_set: ModeSet
    coeffs: np.ndarray

    def __post_init__(self):
        c = np.array(self.coeffs, dtype=np.float64, copy=True).reshape(-1)
        if c.shape[0] != len(self.mode_set):
            raise ValueError(f"expected {len(self.mode_set)} coefficients for n={self.mode_set.n}, got {c.shape[0]}")
        if not np.all(np.isfinite(c)):
            raise ValueError("spectral coefficients must be finite")
        c.flags.writeable = False
        object.__setattr__(self, "coeffs", c)

    @classmethod
    def zeros(cls, n: int) -> "SpectralField":
        ms = build_mode_set(n)
        return cls(ms, np.zeros(len(ms)))

    @classmethod
    def from_modes(cls, values: Mapping[ModeIndex, float], n: int | None = None) -> "SpectralField":
        """Build a field from ``{mode: coefficient}``; ``n`` defaults to the smallest fitting resolution."""
        if n is None:
            n = 1 + max((math.isqrt(m.radius_sq) for m in values), default=0)
            while any(m.radius_sq >= n * n for m in values):
                n += 1
        ms = build_mode_set(n)
        c = np.zeros(len(ms))
        for mode, val in values.items():
            c[ms.index_of(mode)] = val
        return cls(ms, c)

    @classmethod
    def random(cls, n: int, rng: np.random.Generator, scale: float = 1.0) -> "SpectralField":
        ms = build_mode_set(n)
        return cls(ms, scale * rng.standard_normal(len(ms)))

    @property
    def n(self) -> int:
        return self.mode_set.n

    def coefficient(self, mode: ModeIndex) -> float:
        if mode not in self.mode_set:
            return 0.0
        return float(self.coeffs[self.mode_set.index_of(mode)])

    def _check_same(self, other: "SpectralField") -> None:
        if other.mode_set.n != self.mode_set.n:
            raise ValueError(f"mode-set mismatch: n={self.mode_set.n} vs n={other.mode_set.n}")

    def __add__(self, other: "SpectralField") -> "SpectralField":
        self._check_same(other)
        return SpectralField(self.mode_set, self.coeffs + other.coeffs)

    def __sub__(self, other: "SpectralField") -> "SpectralField":
        self._check_same(other)
        return SpectralField(self.mode_set, self.coeffs - other.coeffs)

    def __mul__(self, alpha: float) -> "SpectralField":
        return SpectralField(self.mode_set, float(alpha) * self.coeffs)

    __rmul__ = __mul__

    def __neg__(self) -> "SpectralField":
        return SpectralField(self.mode_set, -self.coeffs)

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, SpectralField)
            and other.mode_set.n == self.mode_set.n
            and np.array_equal(other.coeffs, self.coeffs)
        )

    __hash__ = None


@dataclass(frozen=True, eq=False)
class GridField:
    """Samples of a vector field on the ``m x m`` midpoint grid, shape ``(m, m, 2)``."""

    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.ndim != 3 or v.shape[0] != v.shape[1] or v.shape[2] != 2:
            raise ValueError(f"grid values must have shape (m, m, 2), got {v.shape}")
        if v.shape[0] < 4:
            raise ValueError("grid resolution m must be at least 4")
        if not np.all(np.isfinite(v)):
            raise ValueError("grid values must be finite")
        object.__setattr__(self, "values", v)

    @property
    def m(self) -> int:
        return self.values.shape[0]


def grid_points(m: int) -> np.ndarray:
    return (np.arange(m) + 0.5) / m


# ---------------------------------------------------------------------------
# transform tables
# ---------------------------------------------------------------------------


class _Tables:
    """Per-(n, m) lookup tables shared by both transform paths."""

    def __init__(self, n: int, m: int):
        ms = build_mode_set(n)
        self.n, self.m, self.size = n, m, len(ms)
        x = grid_points(m)
        self.phi = np.stack([np.asarray(spectral_basis.eval_phi(k, x)) for k in range(-n + 1, n)])
        off = n - 1
        k, l = ms.k, ms.l
        r = np.sqrt((k * k + l * l).astype(float))
        r[0] = 1.0
        w1 = l / np.where(r == 0, 1.0, r)
        w2 = k / np.where(r == 0, 1.0, r)
        # E001 = (0, 1): w1 = 0, w2 = 1; Vec0(0, 0) = (1, 0): w1 = 1, w2 = 0
        w1[0], w2[0] = 0.0, 1.0
        origin = np.nonzero((k == 0) & (l == 0))[0]
        origin = origin[origin > 0][0]
        w1[origin], w2[origin] = 1.0, 0.0
        self.w1, self.w2 = w1, w2
        self.k_idx = (k + off).astype(np.int64)
        self.l_idx = (l + off).astype(np.int64)
        self.mk_idx = (-k + off).astype(np.int64)
        self.ml_idx = (-l + off).astype(np.int64)
        side = 2 * n - 1
        self.side = side
        # flat positions in the (2n-1)^2 coefficient grids, Vec0 modes only
        self.flat1 = self.k_idx[1:] * side + self.l_idx[1:]
        self.flat2 = self.mk_idx[1:] * side + self.ml_idx[1:]
        self.centre = off * side + off


@lru_cache(maxsize=128)
def tables(n: int, m: int) -> _Tables:
    return _Tables(n, m)


def _synth_separable(c: np.ndarray, t: _Tables) -> tuple[np.ndarray, np.ndarray]:
    side = t.side
    a1 = np.zeros(side * side)
    a2 = np.zeros(side * side)
    a1[t.flat1] = c[1:] * t.w1[1:]
    a2[t.flat2] = c[1:] * t.w2[1:]
    a2[t.centre] += c[0]
    return _kernels.separable_synth(a1.reshape(side, side), a2.reshape(side, side), t.phi)


def _analyze_separable(g1: np.ndarray, g2: np.ndarray, t: _Tables) -> np.ndarray:
    G1, G2 = _kernels.separable_analyze(g1, g2, t.phi)
    G1, G2 = G1.reshape(-1), G2.reshape(-1)
    out = np.empty(t.size)
    out[0] = G2[t.centre]
    out[1:] = t.w1[1:] * G1[t.flat1] + t.w2[1:] * G2[t.flat2]
    return out


def _resolve_method(method: str, n: int) -> str:
    if method == "auto":
        return "direct" if n <= DIRECT_MAX_N else "separable"
    if method not in ("direct", "separable"):
        raise ValueError(f"unknown transform method {method!r}")
    return method


def synthesize_coeffs(c: np.ndarray, n: int, m: int, method: str = "auto") -> np.ndarray:
    """Array-level synthesis; returns grid values of shape ``(m, m, 2)``."""
    t = tables(n, m)
    if _resolve_method(method, n) == "direct":
        out = np.empty((m, m, 2))
        _kernels.synth_direct(
            np.ascontiguousarray(c, dtype=np.float64), t.k_idx, t.l_idx, t.mk_idx, t.ml_idx, t.w1, t.w2, t.phi, out
        )
        return out
    u1, u2 = _synth_separable(c, t)
    return np.stack([u1, u2], axis=-1)


def analyze_values(values: np.ndarray, n: int, method: str = "auto") -> np.ndarray:
    """Array-level analysis of ``(m, m, 2)`` grid data against the resolution-``n`` modes."""
    m = values.shape[0]
    t = tables(n, m)
    if _resolve_method(method, n) == "direct":
        out = np.empty(t.size)
        _kernels.analyze_direct(
            np.ascontiguousarray(values), t.k_idx, t.l_idx, t.mk_idx, t.ml_idx, t.w1, t.w2, t.phi, out
        )
        return out
    return _analyze_separable(np.ascontiguousarray(values[:, :, 0]), np.ascontiguousarray(values[:, :, 1]), t)


# ---------------------------------------------------------------------------
# derivative tables
# ---------------------------------------------------------------------------


@lru_cache(maxsize=64)
def derivative_table(n: int, j: int) -> tuple[np.ndarray, np.ndarray]:
    """``(scale, target)`` arrays realising ``d_j`` on the resolution-``n`` coefficients."""
    ms = build_mode_set(n)
    scale = np.empty(len(ms))
    target = np.empty(len(ms), dtype=np.int64)
    for i, mode in enumerate(ms.modes):
        c, tgt = spectral_basis.derivative_mode(mode, j)
        scale[i] = c
        target[i] = ms.index_of(tgt)
    return scale, target


def clear_caches() -> None:
    """Drop cached tables (needed after monkeypatching basis functions)."""
    derivative_table.cache_clear()
    tables.cache_clear()


def derivative_coeffs(c: np.ndarray, n: int, j: int) -> np.ndarray:
    scale, target = derivative_table(n, j)
    return np.bincount(target, weights=scale * c, minlength=c.shape[0])


# ---------------------------------------------------------------------------
# public operations
# ---------------------------------------------------------------------------


def project(field: SpectralField, n: int) -> SpectralField:
    """Keep the modes of the resolution-``n`` set (``n`` no larger than the field's)."""
    if n > field.n:
        raise ValueError(f"cannot project resolution {field.n} onto larger n={n}; use embed")
    if n == field.n:
        return field
    small = build_mode_set(n)
    return SpectralField(small, field.coeffs[small.positions_in(field.mode_set)])


def embed(field: SpectralField, n: int) -> SpectralField:
    """Zero-pad into the resolution-``n`` mode set (``n`` at least the field's)."""
    if n < field.n:
        raise ValueError(f"cannot embed resolution {field.n} into smaller n={n}; use project")
    if n == field.n:
        return field
    big = build_mode_set(n)
    c = np.zeros(len(big))
    c[field.mode_set.positions_in(big)] = field.coeffs
    return SpectralField(big, c)


def to_resolution(field: SpectralField, n: int) -> SpectralField:
    return project(field, n) if n <= field.n else embed(field, n)


def norm_weights(mode_set: ModeSet, r: float, params: SpectralParams = DEFAULT_SPECTRAL) -> np.ndarray:
    """``(kappa + lambda_h)^r`` per mode."""
    return (params.kappa + mode_set.eigenvalues(params)) ** r


def norm_Hr(field: SpectralField, r: float, params: SpectralParams = DEFAULT_SPECTRAL) -> float:
    """``(sum_h (kappa + lambda_h)^(2r) c_h^2)^(1/2)``."""
    if r == 0:
        with np.errstate(over="ignore"):
            val = float(np.sqrt(np.sum(field.coeffs**2)))
        weighted = field.coeffs
    else:
        weighted = None
        with np.errstate(over="ignore"):
            val = float(_kernels.weighted_norm(field.coeffs, norm_weights(field.mode_set, r, params)))
    if math.isinf(val) and np.all(np.isfinite(field.coeffs)):
        # squares overflowed; rescale before summing
        if weighted is None:
            weighted = norm_weights(field.mode_set, r, params) * field.coeffs
        top = float(np.max(np.abs(weighted)))
        if math.isfinite(top) and top > 0:
            val = top * float(np.sqrt(np.sum((weighted / top) ** 2)))
    return val


def inner(f: SpectralField, g: SpectralField) -> float:
    f._check_same(g)
    return float(np.dot(f.coeffs, g.coeffs))


def partial_derivative(field: SpectralField, j: int) -> SpectralField:
    """Exact spectral ``d_j``; the result lives on the same mode set."""
    if j not in (1, 2):
        raise ValueError("direction j must be 1 or 2")
    return SpectralField(field.mode_set, derivative_coeffs(field.coeffs, field.n, j))


def synthesize(field: SpectralField, m: int | None = None, method: str = "auto") -> GridField:
    """Evaluate the field on the ``m x m`` midpoint grid (``m >= 4n``, default ``4n``)."""
    n = field.n
    if m is None:
        m = 4 * n
    if m < 4 * n:
        raise ValueError(f"grid size m={m} is below the exactness requirement m >= 4n = {4 * n}")
    return GridField(synthesize_coeffs(field.coeffs, n, m, method))


def analyze(grid: GridField, n: int, method: str = "auto") -> SpectralField:
    """Midpoint-rule inner products of ``grid`` with every resolution-``n`` mode."""
    return SpectralField(build_mode_set(n), analyze_values(grid.values, n, method))


def sup_norm(field: SpectralField, m: int | None = None) -> float:
    """Grid maximum of ``|v(x)|_2`` (a lower bound on the true supremum)."""
    if m is None:
        m = max(256, 8 * field.n)
    vals = synthesize(field, m).values
    return float(np.sqrt(np.max(np.sum(vals**2, axis=-1))))


def divergence_grid(field: SpectralField, m: int | None = None) -> np.ndarray:
    """``d_1 v_1 + d_2 v_2`` on the grid, assembled from the spectral derivatives."""
    d1 = synthesize(partial_derivative(field, 1), m).values
    d2 = synthesize(partial_derivative(field, 2), m).values
    return d1[:, :, 0] + d2[:, :, 1]


def basis_field(mode: ModeIndex, n: int | None = None, coefficient: float = 1.0) -> SpectralField:
    return SpectralField.from_modes({mode: coefficient}, n)


__all__ = [
    "DIRECT_MAX_N",
    "GridField",
    "SpectralField",
    "Variant",
    "analyze",
    "basis_field",
    "divergence_grid",
    "embed",
    "grid_points",
    "inner",
    "norm_Hr",
    "partial_derivative",
    "project",
    "sup_norm",
    "synthesize",
]
