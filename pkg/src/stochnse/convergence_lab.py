"""Monte Carlo strong-error studies against a fine coupled reference run.

For every sample one noise path is generated at the reference resolution on
the reference grid.  The reference scheme and all coarse schemes advance in
lockstep while that path is produced chunk by chunk, so no full path is ever
held in memory.  The coarse schemes read the same noise values that
:func:`stochnse.noise.restrict` would hand them, and the per-sample errors are
bit-identical to running :func:`stochnse.scheme.run_trajectory` on restricted
paths (see the test suite).
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .errors import ConfigError, NonFiniteError
from .noise import ModeStreams, NoiseParams, OUAdvancer, match_times, simulate_ou, truncation_error_exact
from .scheme import SchemeParams, _Stepper, default_step
from .spectral_basis import build_mode_set

MAX_REFERENCE_N = 64
CHUNK_STEPS = 256


@dataclass(frozen=True, eq=False)
class StudyConfig:
    resolutions: tuple[int, ...]
    reference_n: int
    samples: int
    params: SchemeParams
    p: float = 2.0
    base_seed: int = 0
    step_rule: Mapping[int, float] | None = None

    def __post_init__(self):
        res = tuple(int(n) for n in self.resolutions)
        if not res:
            raise ConfigError("at least one resolution is required")
        if any(b <= a for a, b in zip(res, res[1:])) or res[0] < 1:
            raise ConfigError(f"resolutions must be positive and strictly increasing, got {res}")
        object.__setattr__(self, "resolutions", res)
        if self.reference_n < res[-1]:
            raise ConfigError(f"reference_n={self.reference_n} must be >= max(resolutions)={res[-1]}")
        if self.reference_n > MAX_REFERENCE_N:
            raise ConfigError(f"reference_n={self.reference_n} exceeds the desk-scale limit {MAX_REFERENCE_N}")
        if int(self.samples) != self.samples or self.samples < 1:
            raise ConfigError("samples must be a positive integer")
        if not self.p >= 1:
            raise ConfigError("moment order p must be >= 1")
        if not 0 <= int(self.base_seed) < 2**64:
            raise ConfigError("base_seed must be an unsigned 64-bit integer")
        rule = dict(self.step_rule) if self.step_rule else {}
        T = self.params.T
        for n in res + (self.reference_n,):
            rule.setdefault(n, default_step(n, T))
        object.__setattr__(self, "step_rule", rule)
        ref_grid = self.reference_params().time_grid()
        for n in res:
            try:
                match_times(ref_grid, self.study_params(n).time_grid())
            except ValueError:
                raise ConfigError(
                    f"time grid of n={n} (h={rule[n]}) is not nested in the reference grid (h={rule[self.reference_n]})"
                ) from None

    def study_params(self, n: int) -> SchemeParams:
        return self.params.with_resolution(n, self.step_rule[n])

    def reference_params(self) -> SchemeParams:
        noise = NoiseParams(self.params.noise.delta, self.params.noise.eta, self.base_seed, self.params.spectral)
        base = self.params
        return SchemeParams(
            self.reference_n, self.step_rule[self.reference_n], base.T, base.chi, base.rho_bar, base.gamma,
            base.nonlin, noise, base.xi,
        )


@dataclass
class SampleResult:
    errors: np.ndarray  # max over coarse grid times of the H error, per resolution
    tail: np.ndarray  # reference energy outside each coarse mode set at T
    indicator_off: np.ndarray  # steps with the drift switched off, per resolution (last entry: reference)


@dataclass
class StudyResult:
    resolutions: list[int]
    steps: list[float]
    estimates: list[float]
    stderrs: list[float | None]
    samples: int
    p: float
    reference_n: int
    reference_h: float
    tail_energy: list[float]
    indicator_off_fraction: list[float]
    reference_indicator_off_fraction: float
    slope: float | None = None
    residual: float | None = None
    notes: list[str] = field(default_factory=list)

    def rows(self) -> list[dict]:
        return [
            {"n": n, "h": h, "error": e, "stderr": s, "samples": self.samples}
            for n, h, e, s in zip(self.resolutions, self.steps, self.estimates, self.stderrs)
        ]


# ---------------------------------------------------------------------------
# per-sample engine
# ---------------------------------------------------------------------------


def _run_sample(config: StudyConfig, sample: int) -> SampleResult:
    ref_params = config.reference_params()
    N = config.reference_n
    ms_ref = build_mode_set(N)
    t_ref = ref_params.time_grid()
    steps = np.diff(t_ref)

    streams = ModeStreams(ms_ref, config.base_seed, sample)
    ou_adv = OUAdvancer(ms_ref, ref_params.noise)
    ref = _Stepper(ref_params)

    coarse = []
    for n in config.resolutions:
        prm = config.study_params(n)
        times = prm.time_grid()
        coarse.append(
            {
                "stepper": _Stepper(prm),
                "rows": build_mode_set(n).positions_in(ms_ref),
                "times": times,
                "cols": match_times(t_ref, times),
                "next": 1,
                "x": None,
                "ou_prev": None,
                "err": 0.0,
                "off": 0,
            }
        )

    ou = np.zeros(len(ms_ref))
    x_ref = ref.xi + ou
    for c in coarse:
        c["ou_prev"] = ou[c["rows"]]
        c["x"] = c["stepper"].xi + c["ou_prev"]
        c["err"] = float(np.sqrt(np.sum((x_ref[c["rows"]] - c["x"]) ** 2)))
    ref_off = 0

    j = 0
    while j < steps.size:
        count = min(CHUNK_STEPS, steps.size - j)
        gauss = streams.draw(count)
        for i in range(count):
            h = steps[j]
            ou_next = ou_adv.advance(ou, h, np.ascontiguousarray(gauss[:, i]), np.empty_like(ou))
            x_ref, ind = ref.advance(x_ref, ou, ou_next, t_ref[j], h)
            ref_off += 1 - ind
            ou = ou_next
            j += 1
            for c in coarse:
                k = c["next"]
                if k < c["cols"].size and c["cols"][k] == j:
                    ou_k1 = ou[c["rows"]]
                    t_k = c["times"][k - 1]
                    c["x"], ind = c["stepper"].advance(c["x"], c["ou_prev"], ou_k1, t_k, c["times"][k] - t_k)
                    c["off"] += 1 - ind
                    c["ou_prev"] = ou_k1
                    c["next"] = k + 1
                    d = float(np.sqrt(np.sum((x_ref[c["rows"]] - c["x"]) ** 2)))
                    if not math.isfinite(d):
                        raise NonFiniteError(f"non-finite error at n={c['stepper'].params.n}, t={c['times'][k]}")
                    c["err"] = max(c["err"], d)
        if not np.all(np.isfinite(x_ref)):
            raise NonFiniteError(f"non-finite reference state at t={t_ref[j]}")

    errors = np.array([c["err"] for c in coarse])
    sq = x_ref**2
    tail = np.array([np.sum(sq) - np.sum(sq[c["rows"]]) for c in coarse])
    off = np.array([c["off"] for c in coarse] + [ref_off], dtype=np.int64)
    return SampleResult(errors, tail, off)


def run_samples(config: StudyConfig, threads: int = 1) -> list[SampleResult]:
    """Per-sample results in sample order (independent of ``threads``)."""
    if threads < 1:
        raise ConfigError("threads must be >= 1")
    if threads == 1:
        return [_run_sample(config, s) for s in range(config.samples)]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(lambda s: _run_sample(config, s), range(config.samples)))


def moment_estimate(values: np.ndarray, p: float) -> tuple[float, float | None]:
    """``(mean(v^p))^(1/p)`` and its delta-method standard error."""
    vp = np.asarray(values, dtype=float) ** p
    m = float(np.mean(vp))
    est = m ** (1.0 / p)
    if vp.size < 2:
        return est, None
    se_m = float(np.std(vp, ddof=1)) / math.sqrt(vp.size)
    if m == 0.0:
        return est, 0.0 if se_m == 0.0 else None
    return est, est / (p * m) * se_m


def strong_error_mc(config: StudyConfig, threads: int = 1) -> StudyResult:
    results = run_samples(config, threads)
    errs = np.stack([r.errors for r in results])
    tails = np.stack([r.tail for r in results])
    offs = np.stack([r.indicator_off for r in results])
    est, se = zip(*(moment_estimate(errs[:, i], config.p) for i in range(errs.shape[1])))
    n_steps = [config.study_params(n).time_grid().size - 1 for n in config.resolutions]
    ref_steps = config.reference_params().time_grid().size - 1
    res = StudyResult(
        resolutions=list(config.resolutions),
        steps=[config.step_rule[n] for n in config.resolutions],
        estimates=list(est),
        stderrs=list(se),
        samples=config.samples,
        p=config.p,
        reference_n=config.reference_n,
        reference_h=config.step_rule[config.reference_n],
        tail_energy=[float(v) for v in np.mean(tails, axis=0)],
        indicator_off_fraction=[float(np.sum(offs[:, i])) / (n_steps[i] * config.samples) for i in range(len(n_steps))],
        reference_indicator_off_fraction=float(np.sum(offs[:, -1])) / (ref_steps * config.samples),
    )
    if len(config.resolutions) >= 2 and all(e > 0 for e in res.estimates):
        res.slope, res.residual = fit_rate(list(zip(res.resolutions, res.estimates)))
    elif len(config.resolutions) < 2:
        res.notes.append("rate fit omitted: a single resolution was studied")
    else:
        res.notes.append("rate fit omitted: some error estimates are zero")
    return res


def fit_rate(pairs: Sequence[tuple[float, float]]) -> tuple[float, float]:
    """Least-squares slope of ``log(error)`` against ``log(x)`` and the RMS residual."""
    if len(pairs) < 2:
        raise ValueError("need at least two points to fit a rate")
    x, y = np.asarray(pairs, dtype=float).T
    if np.any(x <= 0) or np.any(y <= 0):
        raise ValueError("fit_rate needs strictly positive abscissae and errors")
    lx, ly = np.log(x), np.log(y)
    slope, intercept = np.polyfit(lx, ly, 1)
    resid = ly - (slope * lx + intercept)
    return float(slope), float(np.sqrt(np.mean(resid**2)))


# ---------------------------------------------------------------------------
# noise truncation study
# ---------------------------------------------------------------------------


@dataclass
class NoiseErrorRow:
    n: int
    closed_form: float
    mc_estimate: float
    std_err: float


def noise_error_study(
    n_list: Sequence[int],
    t: float,
    noise: NoiseParams,
    rho_bar: float,
    samples: int,
    reference_n: int | None = None,
    threads: int = 1,
) -> list[NoiseErrorRow]:
    """Closed-form versus Monte Carlo ``E ||O_t - P_n O_t||^2_{H_rho_bar}``.

    The simulated band between ``n`` and the reference resolution is estimated
    by Monte Carlo; the modes beyond the reference are added from the closed
    form (they are never simulated).
    """
    n_list = sorted(int(n) for n in n_list)
    N = 4 * n_list[-1] if reference_n is None else int(reference_n)
    if N < 4 * n_list[-1]:
        raise ConfigError(f"reference_n={N} must be at least 4 * max(n_list) = {4 * n_list[-1]}")
    if samples < 2:
        raise ConfigError("noise_error_study needs at least two samples")
    ms = build_mode_set(N)
    sp = noise.spectral
    w = (sp.kappa + ms.eigenvalues(sp)) ** (2 * rho_bar)
    rows = [build_mode_set(n).positions_in(ms) for n in n_list]
    grid = np.array([0.0, t])

    def one(s: int) -> np.ndarray:
        o = simulate_ou(ms, grid, noise, sample=s).values[:, -1]
        e = w * o * o
        total = np.sum(e)
        return np.array([total - np.sum(e[r]) for r in rows])

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            band = np.stack(list(pool.map(one, range(samples))))
    else:
        band = np.stack([one(s) for s in range(samples)])
    beyond = truncation_error_exact(N, t, rho_bar, noise)
    out = []
    for i, n in enumerate(n_list):
        out.append(
            NoiseErrorRow(
                n,
                truncation_error_exact(n, t, rho_bar, noise),
                float(np.mean(band[:, i])) + beyond,
                float(np.std(band[:, i], ddof=1)) / math.sqrt(samples),
            )
        )
    return out
