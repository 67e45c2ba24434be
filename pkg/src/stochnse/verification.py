"""Property sweeps over small mode sets with fixed seeds.

Every suite returns the worst margin observed (positive means the property
held with room to spare).  ``run_all`` backs the ``verify`` command.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import fields, noise, nonlinearity, scheme
from .fields import SpectralField
from .nonlinearity import NonlinearityParams
from .spectral_basis import DEFAULT_SPECTRAL, build_mode_set, eval_basis, projection_tail_bound


@dataclass
class SuiteResult:
    name: str
    passed: bool
    worst_margin: float
    trials: int
    seconds: float = 0.0
    detail: str = ""

    def __post_init__(self):
        self.passed = bool(self.passed)
        self.worst_margin = float(self.worst_margin)


def _rng(seed: int, salt: int) -> np.random.Generator:
    return np.random.default_rng([seed, salt])


def _random_field(rng: np.random.Generator, n: int, decay: float = 1.0) -> SpectralField:
    """Random coefficients damped like ``lam^-decay/2`` so higher modes stay moderate."""
    ms = build_mode_set(n)
    lam = ms.eigenvalues()
    return SpectralField(ms, rng.standard_normal(len(ms)) * (lam / lam[0]) ** (-decay / 2))


def suite_gram(seed: int, n: int = 4) -> SuiteResult:
    """Gram matrix of the mode set under midpoint quadrature equals the identity."""
    m = 4 * n
    ms = build_mode_set(n)
    x = fields.grid_points(m)
    X, Y = np.meshgrid(x, x, indexing="ij")
    vals = np.stack([eval_basis(h, X, Y).reshape(-1) for h in ms.modes])
    gram = vals @ vals.T / (m * m)
    dev = float(np.max(np.abs(gram - np.eye(len(ms)))))
    return SuiteResult("basis orthonormality (Gram matrix)", dev < 1e-10, 1e-10 - dev, len(ms) ** 2)


def suite_basis_sup(seed: int, n: int = 6) -> SuiteResult:
    """Every basis element is bounded by 2 pointwise."""
    ms = build_mode_set(n)
    x = fields.grid_points(64)
    X, Y = np.meshgrid(x, x, indexing="ij")
    worst = max(float(np.max(np.linalg.norm(eval_basis(h, X, Y), axis=-1))) for h in ms.modes)
    margin = 2.0 + 1e-12 - worst
    return SuiteResult("basis sup-norm bound", margin >= 0, margin, len(ms))


def suite_divergence(seed: int, n: int = 4, trials: int = 50) -> SuiteResult:
    """Spectral divergence of random fields vanishes on the grid."""
    rng = _rng(seed, 1)
    worst = 0.0
    for _ in range(trials):
        div = fields.divergence_grid(_random_field(rng, n))
        worst = max(worst, float(np.sqrt(np.mean(div**2))))
    return SuiteResult("divergence-free synthesis", worst <= 1e-10, 1e-10 - worst, trials)


def suite_derivative_bound(seed: int, n: int = 6, trials: int = 50) -> SuiteResult:
    """``||d_j v||_U <= ||v||_{H_1/2}``."""
    rng = _rng(seed, 2)
    worst = math.inf
    for _ in range(trials):
        v = _random_field(rng, n, 0.0)
        rhs = fields.norm_Hr(v, 0.5)
        for j in (1, 2):
            worst = min(worst, rhs - fields.norm_Hr(fields.partial_derivative(v, j), 0.0))
    return SuiteResult("derivative bounded by half-order norm", worst >= -1e-12, worst, 2 * trials)


def suite_projection(seed: int, n: int = 3, trials: int = 50, e: float = 0.3, r: float = 0.25) -> SuiteResult:
    """Projection error in ``H_r`` is at most ``(kappa+lam_n)^-e`` times the ``H_{r+e}`` norm."""
    rng = _rng(seed, 3)
    worst = math.inf
    for _ in range(trials):
        f = _random_field(rng, 2 * n, 0.0)
        f = f * (1.0 / fields.norm_Hr(f, r + e))
        tail = f - fields.embed(fields.project(f, n), 2 * n)
        worst = min(worst, projection_tail_bound(n, e) * fields.norm_Hr(f, r + e) - fields.norm_Hr(tail, r))
    return SuiteResult("projection tail bound", worst >= -1e-12, worst, trials)


def suite_F_oracle(seed: int, trials: int = 20) -> SuiteResult:
    """Transform-based ``F`` matches dense quadrature built from pointwise formulas."""
    rng = _rng(seed, 4)
    p = NonlinearityParams(1.0, 0.5)
    worst = 0.0
    for n in (2, 3, 4):
        for _ in range(trials):
            v = _random_field(rng, n)
            worst = max(worst, float(np.max(np.abs(nonlinearity.F(v, p).coeffs - nonlinearity.F_oracle(v, p).coeffs))))
    return SuiteResult("nonlinearity vs quadrature oracle", worst <= 1e-10, 1e-10 - worst, 3 * trials)


def suite_energy(seed: int, n: int = 4, trials: int = 50) -> SuiteResult:
    """With ``c2 = 0`` the convection term is orthogonal to the state."""
    rng = _rng(seed, 5)
    p = NonlinearityParams(1.0, 0.0)
    worst = 0.0
    for _ in range(trials):
        v = _random_field(rng, n)
        Fv = nonlinearity.F(v, p)
        scale = fields.norm_Hr(v, 0) * fields.norm_Hr(Fv, 0)
        if scale > 0:
            worst = max(worst, abs(fields.inner(v, Fv)) / scale)
    return SuiteResult("energy orthogonality of convection", worst <= 1e-10, 1e-10 - worst, trials)


def suite_coercivity(seed: int, n: int = 4, trials: int = 100) -> SuiteResult:
    """Generalized coercivity estimate on random pairs with amplitudes over four decades."""
    rng = _rng(seed, 6)
    p = NonlinearityParams(1.0, 0.7)
    worst = math.inf
    for i in range(trials):
        eps = (0.25, 1.0)[i % 2]
        v = _random_field(rng, n) * 10 ** rng.uniform(-1, 3)
        w = _random_field(rng, n) * 10 ** rng.uniform(-1, 1)
        lhs, rhs = nonlinearity.coercivity_check(v, w, eps, p)
        worst = min(worst, (rhs + 1e-9 - lhs) / max(rhs, 1.0))
    return SuiteResult("coercivity estimate", worst >= 0, worst, trials, detail="margin relative to max(rhs, 1)")


def suite_lipschitz(seed: int, n: int = 4, trials: int = 100) -> SuiteResult:
    """Local Lipschitz bound of ``F`` from ``H_rho`` into ``H``."""
    rng = _rng(seed, 7)
    p = NonlinearityParams(1.0, 0.5, 0.6)
    theta = nonlinearity.lipschitz_theta(p, tail_tol=1e-8)
    worst = math.inf
    for _ in range(trials):
        v = _random_field(rng, n) * 10 ** rng.uniform(-1, 1)
        w = _random_field(rng, n) * 10 ** rng.uniform(-1, 1)
        lhs = fields.norm_Hr(nonlinearity.F(v, p) - nonlinearity.F(w, p), 0)
        rhs = theta * (1 + fields.norm_Hr(v, p.rho) + fields.norm_Hr(w, p.rho)) * fields.norm_Hr(v - w, p.rho)
        worst = min(worst, rhs + 1e-9 - lhs)
    return SuiteResult("local Lipschitz bound", worst >= 0, worst, trials, detail=f"theta={theta:.6g}")


def suite_truncation_rate(seed: int) -> SuiteResult:
    """Closed-form noise truncation error stays below its algebraic rate bound."""
    prm = noise.NoiseParams(delta=1.0)
    worst = math.inf
    count = 0
    for n in (2, 4, 8, 16):
        exact = noise.truncation_error_exact(n, 1.0, 0.75, prm)
        for eps in (0.05, 0.1, 0.2):
            worst = min(worst, noise.truncation_rate_bound(n, eps, 0.75, prm) - exact)
            count += 1
    return SuiteResult("noise truncation rate bound", worst >= 0, worst, count)


def suite_ou_variance(seed: int, samples: int = 2000) -> SuiteResult:
    """Per-mode sample variance of the convolution matches the closed form (4 standard errors)."""
    ms = build_mode_set(2)
    prm = noise.NoiseParams(delta=1.0, seed=seed)
    grid = np.array([0.0, 0.05, 0.5])
    vals = np.stack([noise.simulate_ou(ms, grid, prm, sample=s).values for s in range(samples)])
    sq = vals[:, :, 1:] ** 2
    var = sq.mean(axis=0)
    se = sq.std(axis=0, ddof=1) / math.sqrt(samples)
    exact = noise.marginal_variance(ms.eigenvalues()[:, None], grid[None, 1:], prm)
    z = np.max(np.abs(var - exact) / se)
    return SuiteResult("per-mode noise variance", z <= 4.0, 4.0 - float(z), int(sq[0].size), detail="margin in standard errors")


def suite_scheme_global(seed: int, n: int = 4, K: int = 8) -> SuiteResult:
    """Iterated steps equal the directly assembled variation-of-constants sum."""
    rng = _rng(seed, 8)
    xi = _random_field(rng, n) * 0.3
    h = 1.0 / 64
    prm = scheme.SchemeParams(n=n, h=h, T=K * h, nonlin=NonlinearityParams(1.0, 0.5), noise=noise.NoiseParams(seed=seed), xi=xi)
    path = noise.simulate_ou(build_mode_set(n), prm.time_grid(), prm.noise)
    traj = scheme.run_trajectory(prm, path)
    lam = build_mode_set(n).eigenvalues()
    w = scheme.drift_weight(lam, h)
    worst = 0.0
    for k_end in range(1, K + 1):
        t = k_end * h
        direct = np.exp(-lam * t) * xi.coeffs + path.values[:, k_end]
        for k in range(k_end):
            if traj.indicator_log[k]:
                Fk = nonlinearity.F_coeffs(traj.states[k], n, prm.nonlin)
                direct = direct + np.exp(-lam * (k_end - k - 1) * h) * w * Fk
        worst = max(worst, float(np.max(np.abs(direct - traj.states[k_end]))))
    return SuiteResult("scheme matches global formula", worst <= 1e-10, 1e-10 - worst, K)


def suite_linear_exactness(seed: int, n: int = 4) -> SuiteResult:
    """Linear case reproduces the noise path bit for bit."""
    prm = scheme.SchemeParams(n=n, h=1 / 64, nonlin=NonlinearityParams(0.0, 0.0), noise=noise.NoiseParams(seed=seed))
    path = noise.simulate_ou(build_mode_set(n), prm.time_grid(), prm.noise)
    traj = scheme.run_trajectory(prm, path)
    same = bool(np.array_equal(traj.states, path.values.T))
    diff = float(np.max(np.abs(traj.states - path.values.T)))
    return SuiteResult("linear case equals noise path", same, -diff, 1)


SUITES: list[Callable[[int], SuiteResult]] = [
    suite_gram,
    suite_basis_sup,
    suite_divergence,
    suite_derivative_bound,
    suite_projection,
    suite_F_oracle,
    suite_energy,
    suite_coercivity,
    suite_lipschitz,
    suite_truncation_rate,
    suite_ou_variance,
    suite_scheme_global,
    suite_linear_exactness,
]


def run_all(seed: int = 2024) -> list[SuiteResult]:
    out = []
    for suite in SUITES:
        t0 = time.perf_counter()
        try:
            res = suite(seed)
        except (ValueError, ArithmeticError) as exc:
            res = SuiteResult(suite.__name__.removeprefix("suite_"), False, -math.inf, 0, detail=f"raised {exc!r}")
        res.seconds = time.perf_counter() - t0
        out.append(res)
    return out


def format_report(results: list[SuiteResult]) -> str:
    width = max(len(r.name) for r in results)
    lines = []
    for r in results:
        status = "PASS" if r.passed else "FAIL"
        extra = f"  ({r.detail})" if r.detail else ""
        lines.append(f"{status}  {r.name:<{width}}  worst margin {r.worst_margin:+.3e}  trials {r.trials}  {r.seconds:.2f}s{extra}")
    return "\n".join(lines)
