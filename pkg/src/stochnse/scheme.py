"""Tamed exponential Euler scheme on a finite mode set.

Per step of length ``h`` (``y`` is the drift part ``x - O``)::

    y_{k+1} = e^{-lam h} y_k + 1{...} (1 - e^{-lam h}) / lam * F(x_k)
    x_{k+1} = y_{k+1} + O_{k+1}

which equals ``e^{hA} x_k + (O_{k+1} - e^{hA} O_k) + 1{...} w * F(x_k)`` in exact
arithmetic.  Carrying ``y`` makes the linear case reproduce the noise path
bit for bit.  The indicator switches the drift off whenever
``||x_k||_{H_rho_bar} + ||O_k + e^{t_k A} xi||_{H_rho_bar}`` exceeds ``h^-chi``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels, fields
from .errors import ConfigError, NonFiniteError
from .fields import SpectralField
from .noise import NoiseParams, OUPath, match_times, restrict, uniform_grid
from .nonlinearity import DEFAULT_NONLINEARITY, F_coeffs, NonlinearityParams
from .spectral_basis import DEFAULT_SPECTRAL, SpectralParams, build_mode_set

# chi may sit exactly on its upper bound; the bound itself is a rounded float
CHI_BOUND_RTOL = 1e-12


def default_step(n: int, T: float = 1.0) -> float:
    """``T 4^-ceil(log2 n) / 4``: four times smaller each time ``n`` doubles."""
    if n < 1:
        raise ConfigError("n must be a positive integer")
    return T * 4.0 ** (-math.ceil(math.log2(n))) / 4.0


def chi_upper_bound(rho: float, rho_bar: float) -> float:
    return min((1.0 - rho) / 5.0, (rho_bar - rho) / 3.0)


@dataclass(frozen=True, eq=False)
class SchemeParams:
    n: int
    h: float
    T: float = 1.0
    chi: float = 0.05
    rho_bar: float = 0.75
    gamma: float = 2.0
    nonlin: NonlinearityParams = DEFAULT_NONLINEARITY
    noise: NoiseParams = field(default_factory=NoiseParams)
    xi: SpectralField | None = None

    def __post_init__(self):
        if isinstance(self.n, bool) or int(self.n) != self.n or self.n < 1:
            raise ConfigError(f"n must be a positive integer, got {self.n!r}")
        object.__setattr__(self, "n", int(self.n))
        rho, rb = self.rho, self.rho_bar
        if not 0.5 < rho < rb < 1.0:
            raise ConfigError(f"need 1/2 < rho < rho_bar < 1, got rho={rho}, rho_bar={rb}")
        if not self.noise.delta > rb:
            raise ConfigError(f"need delta > rho_bar, got delta={self.noise.delta}, rho_bar={rb}")
        if not self.gamma > rb:
            raise ConfigError(f"need gamma > rho_bar, got gamma={self.gamma}, rho_bar={rb}")
        bound = chi_upper_bound(rho, rb)
        if not (0 < self.chi <= bound * (1 + CHI_BOUND_RTOL)):
            raise ConfigError(
                f"need 0 < chi <= min((1-rho)/5, (rho_bar-rho)/3) = {bound:.17g}, got chi={self.chi}"
            )
        if not (math.isfinite(self.T) and self.T > 0):
            raise ConfigError(f"need T > 0, got T={self.T}")
        if not (0 < self.h <= self.T):
            raise ConfigError(f"need 0 < h <= T, got h={self.h}, T={self.T}")
        xi = self.xi if self.xi is not None else SpectralField.zeros(1)
        object.__setattr__(self, "xi", xi)

    @property
    def rho(self) -> float:
        return self.nonlin.rho

    @property
    def spectral(self) -> SpectralParams:
        return self.noise.spectral

    @property
    def threshold(self) -> float:
        return self.h ** (-self.chi)

    def with_resolution(self, n: int, h: float | None = None) -> "SchemeParams":
        return SchemeParams(
            n, default_step(n, self.T) if h is None else h, self.T, self.chi, self.rho_bar, self.gamma,
            self.nonlin, self.noise, self.xi,
        )

    def time_grid(self) -> np.ndarray:
        return uniform_grid(self.h, self.T)


@dataclass(frozen=True, eq=False)
class Trajectory:
    params: SchemeParams
    times: np.ndarray
    states: np.ndarray  # (len(times), mode count)
    indicator_log: np.ndarray  # one 0/1 entry per step

    @property
    def mode_set(self):
        return build_mode_set(self.params.n)

    def state(self, i: int) -> SpectralField:
        return SpectralField(self.mode_set, self.states[i])


# ---------------------------------------------------------------------------
# single operations
# ---------------------------------------------------------------------------


def semigroup_apply(v: SpectralField, t: float, params: SpectralParams = DEFAULT_SPECTRAL) -> SpectralField:
    """``e^{tA} v``: mode ``h`` is damped by ``e^{-lam_h t}``."""
    if t < 0:
        raise ValueError("t must be nonnegative")
    if t == 0:
        return v
    return SpectralField(v.mode_set, np.exp(-v.mode_set.eigenvalues(params) * t) * v.coeffs)


def drift_weight(lam, h: float):
    """``int_0^h e^{-lam s} ds = (1 - e^{-lam h}) / lam``, clipped to its bound ``h``."""
    lam = np.asarray(lam, dtype=float)
    if np.any(lam <= 0) or not h > 0:
        raise ValueError("drift_weight needs lam > 0 and h > 0")
    w = np.minimum(-np.expm1(-lam * h) / lam, h)
    return w if w.ndim else float(w)


def indicator(
    x_state: SpectralField,
    ou_plus_xi: SpectralField,
    h: float,
    chi: float,
    rho_bar: float,
    params: SpectralParams = DEFAULT_SPECTRAL,
) -> int:
    if x_state.n != ou_plus_xi.n:
        raise ValueError("indicator fields must share a mode set")
    total = fields.norm_Hr(x_state, rho_bar, params) + fields.norm_Hr(ou_plus_xi, rho_bar, params)
    return int(total <= h ** (-chi))


class _Stepper:
    """Precomputed per-mode factors for one (resolution, step length) pair."""

    def __init__(self, params: SchemeParams):
        self.params = params
        n = params.n
        ms = build_mode_set(n)
        self.lam = ms.eigenvalues(params.spectral)
        self.norm_w = fields.norm_weights(ms, params.rho_bar, params.spectral)
        self.xi = fields.to_resolution(params.xi, n).coeffs
        self.threshold = params.threshold
        self._factors: dict[float, tuple[np.ndarray, np.ndarray]] = {}

    def factors(self, h: float) -> tuple[np.ndarray, np.ndarray]:
        f = self._factors.get(h)
        if f is None:
            f = (np.exp(-self.lam * h), drift_weight(self.lam, h))
            self._factors[h] = f
        return f

    def xi_term(self, t: float) -> np.ndarray:
        return np.exp(-self.lam * t) * self.xi

    def indicator(self, x: np.ndarray, ou: np.ndarray, t: float) -> int:
        total = _kernels.weighted_norm(x, self.norm_w) + _kernels.weighted_norm(ou + self.xi_term(t), self.norm_w)
        return int(total <= self.threshold)

    def advance(self, x: np.ndarray, ou_k: np.ndarray, ou_k1: np.ndarray, t_k: float, h: float) -> tuple[np.ndarray, int]:
        decay, weight = self.factors(h)
        ind = self.indicator(x, ou_k, t_k)
        y = decay * (x - ou_k)
        if ind:
            y = y + weight * F_coeffs(x, self.params.n, self.params.nonlin)
        return y + ou_k1, ind


def step(x_k: SpectralField, ou_k: SpectralField, ou_k1: SpectralField, t_k: float, params: SchemeParams, h: float | None = None) -> SpectralField:
    """One scheme step from ``t_k`` to ``t_k + h`` (``h`` defaults to ``params.h``)."""
    n = params.n
    if not (x_k.n == ou_k.n == ou_k1.n == n):
        raise ValueError(f"all step inputs must live on the resolution-{n} mode set")
    x1, _ = _Stepper(params).advance(x_k.coeffs, ou_k.coeffs, ou_k1.coeffs, t_k, params.h if h is None else h)
    return SpectralField(x_k.mode_set, x1)


def run_trajectory(params: SchemeParams, path: OUPath) -> Trajectory:
    """Iterate :func:`step` from ``P_n xi`` over the scheme grid, reading the noise from ``path``."""
    if path.n < params.n:
        raise ValueError(f"noise path resolution {path.n} is below the scheme resolution {params.n}")
    times = params.time_grid()
    try:
        cols = match_times(path.time_grid, times)
    except ValueError as exc:
        raise ValueError(f"scheme grid with h={params.h} is not contained in the noise grid") from exc
    ou = restrict(path, params.n).values[:, cols]
    st = _Stepper(params)
    states = np.empty((times.size, ou.shape[0]))
    states[0] = st.xi + ou[:, 0]
    ind_log = np.empty(times.size - 1, dtype=np.int8)
    x = states[0]
    for k in range(times.size - 1):
        x, ind_log[k] = st.advance(x, ou[:, k], ou[:, k + 1], times[k], times[k + 1] - times[k])
        if not np.all(np.isfinite(x)):
            raise NonFiniteError(f"non-finite state at t={times[k + 1]}")
        states[k + 1] = x
    states.flags.writeable = False
    ind_log.flags.writeable = False
    return Trajectory(params, times, states, ind_log)
