"""Exact simulation of the diagonal stochastic convolution and its truncation error.

Every basis element ``h`` carries an independent scalar Ornstein-Uhlenbeck chain

    O_{t+h} = exp(-(lam + eta) h) O_t + lam^(-delta) sqrt((1 - exp(-2 (lam + eta) h)) / (2 (lam + eta))) g

which reproduces the exact Gaussian law at every grid time.  Each mode draws
its normals from its own Philox stream keyed by ``(seed, sample, mode)``, so a
coarser mode set reuses the very same streams: restricting a fine path is the
coupled coarse path, and results do not depend on thread scheduling.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .fields import SpectralField, to_resolution
from .spectral_basis import (
    DEFAULT_SPECTRAL,
    FOUR_PI_SQ,
    ModeIndex,
    ModeSet,
    SpectralParams,
    build_mode_set,
    spectral_series,
)

_KEY_OFFSET = 2**31
TIME_MATCH_RTOL = 1e-12


@dataclass(frozen=True)
class NoiseParams:
    delta: float = 1.0
    eta: float = 0.0
    seed: int = 0
    spectral: SpectralParams = DEFAULT_SPECTRAL

    def __post_init__(self):
        if not (math.isfinite(self.delta) and self.delta > 0):
            raise ValueError(f"delta must be positive, got {self.delta}")
        if not (math.isfinite(self.eta) and self.eta >= 0):
            raise ValueError(f"eta must be nonnegative, got {self.eta}")
        if isinstance(self.seed, bool) or int(self.seed) != self.seed or not 0 <= self.seed < 2**64:
            raise ValueError(f"seed must be an unsigned 64-bit integer, got {self.seed!r}")
        object.__setattr__(self, "seed", int(self.seed))


# ---------------------------------------------------------------------------
# random streams
# ---------------------------------------------------------------------------


def mode_generator(seed: int, sample: int, mode: ModeIndex) -> np.random.Generator:
    """Independent normal stream for one (sample, basis element) pair."""
    key = (int(sample), int(mode.variant), mode.k + _KEY_OFFSET, mode.l + _KEY_OFFSET)
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=key)))


class ModeStreams:
    """Per-mode generators for one sample; ``draw(c)`` returns the next ``c`` normals of every mode."""

    def __init__(self, mode_set: ModeSet, seed: int, sample: int):
        self.mode_set = mode_set
        self._gens = [mode_generator(seed, sample, m) for m in mode_set.modes]

    def draw(self, count: int) -> np.ndarray:
        out = np.empty((len(self._gens), count))
        for i, g in enumerate(self._gens):
            g.standard_normal(count, out=out[i])
        return out


# ---------------------------------------------------------------------------
# one-step kernel
# ---------------------------------------------------------------------------


def step_factors(lam, h: float, eta: float, delta: float) -> tuple[np.ndarray, np.ndarray]:
    """``(decay, scale)`` of the exact OU transition over a step of length ``h``."""
    lam = np.asarray(lam, dtype=float)
    rate = lam + eta
    decay = np.exp(-rate * h)
    scale = lam ** (-delta) * np.sqrt(-np.expm1(-2.0 * rate * h) / (2.0 * rate))
    return decay, scale


def ou_step(value: float, lam: float, params: NoiseParams, h: float, gaussian: float) -> float:
    decay, scale = step_factors(lam, h, params.eta, params.delta)
    return float(decay * value + scale * gaussian)


def stationary_variance(lam, params: NoiseParams):
    return np.asarray(lam, dtype=float) ** (-2 * params.delta) / (2 * (np.asarray(lam, dtype=float) + params.eta))


def marginal_variance(lam, t: float, params: NoiseParams):
    """Closed-form variance of one mode at time ``t`` (started from zero)."""
    lam = np.asarray(lam, dtype=float)
    rate = lam + params.eta
    return lam ** (-2 * params.delta) * (-np.expm1(-2 * rate * t)) / (2 * rate)


# ---------------------------------------------------------------------------
# paths
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class OUPath:
    """Values of the convolution per mode (rows) and grid time (columns)."""

    mode_set: ModeSet
    time_grid: np.ndarray
    values: np.ndarray
    params: NoiseParams
    sample: int = 0
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        t = np.array(self.time_grid, dtype=float)
        v = np.array(self.values, dtype=float)
        if t.ndim != 1 or t.size == 0:
            raise ValueError("time grid must be a non-empty 1-d array")
        if v.shape != (len(self.mode_set), t.size):
            raise ValueError(f"values must have shape {(len(self.mode_set), t.size)}, got {v.shape}")
        t.flags.writeable = False
        v.flags.writeable = False
        object.__setattr__(self, "time_grid", t)
        object.__setattr__(self, "values", v)

    @property
    def n(self) -> int:
        return self.mode_set.n

    def at(self, i: int) -> SpectralField:
        return SpectralField(self.mode_set, self.values[:, i])


def validate_time_grid(time_grid) -> np.ndarray:
    t = np.asarray(time_grid, dtype=float)
    if t.ndim != 1 or t.size == 0:
        raise ValueError("time grid must be non-empty")
    if t[0] != 0.0:
        raise ValueError("time grid must start at 0")
    if not np.all(np.isfinite(t)) or np.any(np.diff(t) <= 0):
        raise ValueError("time grid must be finite and strictly increasing")
    return t


def uniform_grid(h: float, T: float) -> np.ndarray:
    """``0, h, 2h, ...`` up to ``T``, closing with ``T`` itself when ``h`` does not divide it."""
    if not (h > 0 and T > 0 and h <= T):
        raise ValueError("need 0 < h <= T")
    K = int(math.floor(T / h * (1 + TIME_MATCH_RTOL)))
    t = np.arange(K + 1) * h
    if T - t[-1] > TIME_MATCH_RTOL * T:
        t = np.append(t, T)
    else:
        t[-1] = T
    return t


class OUAdvancer:
    """Exact OU transition for one mode set, caching the factors per step length."""

    def __init__(self, mode_set: ModeSet, params: NoiseParams):
        self.lam = mode_set.eigenvalues(params.spectral)
        self.params = params
        self._last_h = None
        self._factors = None

    def advance(self, x: np.ndarray, h: float, gauss: np.ndarray, out: np.ndarray) -> np.ndarray:
        if h != self._last_h:
            self._factors = step_factors(self.lam, h, self.params.eta, self.params.delta)
            self._last_h = h
        decay, scale = self._factors
        return _kernels.ou_advance(x, decay, scale, gauss, out)


def simulate_ou(mode_set: ModeSet, time_grid, params: NoiseParams, sample: int = 0) -> OUPath:
    """Exact joint law of the convolution on ``time_grid`` for one Monte Carlo sample."""
    t = validate_time_grid(time_grid)
    steps = np.diff(t)
    gauss = ModeStreams(mode_set, params.seed, sample).draw(steps.size)
    values = np.zeros((len(mode_set), t.size))
    adv = OUAdvancer(mode_set, params)
    x = np.zeros(len(mode_set))
    for j, h in enumerate(steps):
        x = adv.advance(x, h, np.ascontiguousarray(gauss[:, j]), np.empty_like(x))
        values[:, j + 1] = x
    return OUPath(mode_set, t, values, params, sample)


def match_times(fine, coarse) -> np.ndarray:
    """Indices of ``coarse`` inside ``fine``; raises if any coarse time is missing."""
    fine = np.asarray(fine, dtype=float)
    coarse = np.asarray(coarse, dtype=float)
    scale = max(abs(fine[-1]), 1.0)
    pos = np.clip(np.searchsorted(fine, coarse), 0, fine.size - 1)
    lo = np.clip(pos - 1, 0, fine.size - 1)
    pick = np.where(np.abs(fine[lo] - coarse) < np.abs(fine[pos] - coarse), lo, pos)
    if np.any(np.abs(fine[pick] - coarse) > TIME_MATCH_RTOL * scale):
        raise ValueError("coarse time grid is not a subset of the path's time grid")
    return pick


def restrict(path: OUPath, n: int, coarse_grid=None) -> OUPath:
    """The coupled resolution-``n`` path: drop modes outside the smaller set and subsample times."""
    if n > path.n:
        raise ValueError(f"cannot restrict a resolution-{path.n} path to larger n={n}")
    small = build_mode_set(n)
    rows = small.positions_in(path.mode_set)
    if coarse_grid is None:
        cols = np.arange(path.time_grid.size)
    else:
        cols = match_times(path.time_grid, validate_time_grid(coarse_grid))
    return OUPath(small, path.time_grid[cols], path.values[np.ix_(rows, cols)], path.params, path.sample)


# ---------------------------------------------------------------------------
# truncation error
# ---------------------------------------------------------------------------


def truncation_error_exact(
    n: int, t: float, rho_bar: float, params: NoiseParams, tail_tol: float = 1e-10
) -> float:
    """``E ||O_t - P_n O_t||^2`` in the ``H_rho_bar`` norm, from the per-mode variances."""
    if not params.delta > rho_bar:
        raise ValueError(f"need delta > rho_bar for summability (delta={params.delta}, rho_bar={rho_bar})")
    if not tail_tol > 0:
        raise ValueError("tail_tol must be positive")
    if t < 0:
        raise ValueError("t must be nonnegative")
    if t == 0:
        return 0.0
    sp = params.spectral

    def term(lam):
        return (sp.kappa + lam) ** (2 * rho_bar) * marginal_variance(lam, t, params)

    return max(spectral_series(term, sp, exclude_n=n), 0.0)


def truncation_rate_bound(n: int, eps: float, rho_bar: float, params: NoiseParams, p: float = 2.0) -> float:
    """Squared ``L^p`` bound ``p(p-1)/4 (4 pi^2)^(-2 eps) sum (kappa+lam)^(2rho_bar+2eps) / lam^(1+2delta) n^(-4 eps)``."""
    if not 0 < eps < params.delta - rho_bar:
        raise ValueError("eps must lie in (0, delta - rho_bar)")
    sp = params.spectral
    series = spectral_series(
        lambda lam: (sp.kappa + lam) ** (2 * rho_bar + 2 * eps) / lam ** (1 + 2 * params.delta), sp
    )
    return p * (p - 1) / 4 * FOUR_PI_SQ ** (-2 * eps) * series * float(n) ** (-4 * eps)


# ---------------------------------------------------------------------------
# shifted convolution
# ---------------------------------------------------------------------------


def shifted_ou_from_unshifted(path: OUPath, xi: SpectralField, eta: float) -> OUPath:
    """Convolution with generator ``A - eta`` rebuilt from the unshifted path.

    The correction integral ``eta int_0^t e^{(t-s)(A-eta)} (O_s + e^{sA} xi) ds`` is
    integrated exactly per step, with ``O`` frozen at the left end point.  The
    ``xi`` contributions cancel analytically; they are still assembled so the
    bookkeeping can be audited (``extra['xi_residual']``).
    """
    if eta < 0:
        raise ValueError("eta must be nonnegative")
    if eta == 0:
        return path
    if path.params.eta != 0:
        raise ValueError("input path must be the unshifted convolution")
    t = path.time_grid
    lam = path.mode_set.eigenvalues(path.params.spectral)
    rate = lam + eta
    xi_c = to_resolution(xi, path.n).coeffs
    integral = np.zeros(len(lam))
    out = np.empty_like(path.values)
    out[:, 0] = path.values[:, 0]
    xi_residual = 0.0
    for j in range(1, t.size):
        h = t[j] - t[j - 1]
        integral = np.exp(-rate * h) * integral + eta * path.values[:, j - 1] * (-np.expm1(-rate * h)) / rate
        # xi part: e^{-lam t} xi - e^{-(lam+eta) t} xi - eta int_0^t e^{-(lam+eta)(t-s)} e^{-lam s} xi ds
        tj = t[j]
        xi_int = np.exp(-lam * tj) * (-np.expm1(-eta * tj))
        xi_term = (np.exp(-lam * tj) - np.exp(-rate * tj) - xi_int) * xi_c
        xi_residual = max(xi_residual, float(np.max(np.abs(xi_term))))
        out[:, j] = path.values[:, j] - integral + xi_term
    shifted = NoiseParams(path.params.delta, eta, path.params.seed, path.params.spectral)
    return OUPath(path.mode_set, t, out, shifted, path.sample, {"xi_residual": xi_residual})

