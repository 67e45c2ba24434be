"""Hot inner loops, compiled with numba when available.

Every kernel has a pure-numpy twin with the same signature.  The backend is
picked once at import time:

* ``STOCHNSE_DISABLE_NUMBA=1`` forces the numpy path,
* a missing or broken numba install silently falls back to numpy.

Both paths write into caller-supplied output arrays so the scheme loop does not
allocate per step.
"""

from __future__ import annotations

import os

import numpy as np

_DISABLED = os.environ.get("STOCHNSE_DISABLE_NUMBA", "").strip().lower() in {"1", "true", "yes", "on"}

try:
    if _DISABLED:
        raise ImportError("numba disabled by STOCHNSE_DISABLE_NUMBA")
    import numba

    HAVE_NUMBA = True
except ImportError:
    numba = None
    HAVE_NUMBA = False

BACKEND = "numba" if HAVE_NUMBA else "numpy"


# ---------------------------------------------------------------------------
# numpy reference implementations
# ---------------------------------------------------------------------------


def synth_direct_np(coeffs, k_idx, l_idx, mk_idx, ml_idx, w1, w2, phi, out):
    """Direct summation ``out[i, j, :] = sum_h c_h e_h(x_i, y_j)``.

    ``phi[r, i]`` holds ``phi_{r - n + 1}(x_i)``; the ``*_idx`` arrays are the
    row offsets of ``k, l, -k, -l`` for every mode.  Position 0 of ``coeffs``
    is the constant ``(0, 1)`` mode and is handled by the caller's tables
    (``w1 = 0, w2 = 1`` with ``k = l = 0``).
    """
    a = (coeffs * w1)[:, None, None] * phi[k_idx][:, :, None] * phi[l_idx][:, None, :]
    b = (coeffs * w2)[:, None, None] * phi[mk_idx][:, :, None] * phi[ml_idx][:, None, :]
    out[:, :, 0] = a.sum(axis=0)
    out[:, :, 1] = b.sum(axis=0)
    return out


def analyze_direct_np(values, k_idx, l_idx, mk_idx, ml_idx, w1, w2, phi, out):
    """Midpoint-rule inner products ``out[h] = m^-2 sum_ij e_h(x_ij) . g(x_ij)``."""
    m = values.shape[0]
    g1 = np.einsum("hi,ij,hj->h", phi[k_idx], values[:, :, 0], phi[l_idx])
    g2 = np.einsum("hi,ij,hj->h", phi[mk_idx], values[:, :, 1], phi[ml_idx])
    out[:] = (w1 * g1 + w2 * g2) / (m * m)
    return out


def weighted_norm_np(coeffs, weights):
    return float(np.sqrt(np.sum((weights * coeffs) ** 2)))


def ou_advance_np(values, decay, scale, gauss, out):
    np.multiply(decay, values, out=out)
    out += scale * gauss
    return out


# ---------------------------------------------------------------------------
# numba versions
# ---------------------------------------------------------------------------

if HAVE_NUMBA:

    @numba.njit(cache=True, nogil=True)
    def synth_direct_nb(coeffs, k_idx, l_idx, mk_idx, ml_idx, w1, w2, phi, out):
        m = phi.shape[1]
        out[:, :, :] = 0.0
        for h in range(coeffs.shape[0]):
            a = coeffs[h] * w1[h]
            b = coeffs[h] * w2[h]
            if a == 0.0 and b == 0.0:
                continue
            pk = phi[k_idx[h]]
            pl = phi[l_idx[h]]
            qk = phi[mk_idx[h]]
            ql = phi[ml_idx[h]]
            for i in range(m):
                ai = a * pk[i]
                bi = b * qk[i]
                for j in range(m):
                    out[i, j, 0] += ai * pl[j]
                    out[i, j, 1] += bi * ql[j]
        return out

    @numba.njit(cache=True, nogil=True)
    def analyze_direct_nb(values, k_idx, l_idx, mk_idx, ml_idx, w1, w2, phi, out):
        m = phi.shape[1]
        scale = 1.0 / (m * m)
        for h in range(out.shape[0]):
            pk = phi[k_idx[h]]
            pl = phi[l_idx[h]]
            qk = phi[mk_idx[h]]
            ql = phi[ml_idx[h]]
            s1 = 0.0
            s2 = 0.0
            for i in range(m):
                r1 = 0.0
                r2 = 0.0
                for j in range(m):
                    r1 += values[i, j, 0] * pl[j]
                    r2 += values[i, j, 1] * ql[j]
                s1 += pk[i] * r1
                s2 += qk[i] * r2
            out[h] = (w1[h] * s1 + w2[h] * s2) * scale
        return out

    @numba.njit(cache=True, nogil=True)
    def weighted_norm_nb(coeffs, weights):
        s = 0.0
        for i in range(coeffs.shape[0]):
            t = weights[i] * coeffs[i]
            s += t * t
        return np.sqrt(s)

    @numba.njit(cache=True, nogil=True)
    def ou_advance_nb(values, decay, scale, gauss, out):
        for i in range(values.shape[0]):
            out[i] = decay[i] * values[i] + scale[i] * gauss[i]
        return out

    synth_direct = synth_direct_nb
    analyze_direct = analyze_direct_nb
    weighted_norm = weighted_norm_nb
    ou_advance = ou_advance_nb
else:
    synth_direct = synth_direct_np
    analyze_direct = analyze_direct_np
    weighted_norm = weighted_norm_np
    ou_advance = ou_advance_np


def separable_synth(coeff_grid_1, coeff_grid_2, phi):
    """Fast path: ``phi^T A phi`` for both components (BLAS in either backend)."""
    pt = phi.T
    return pt @ (coeff_grid_1 @ phi), pt @ (coeff_grid_2 @ phi)


def separable_analyze(g1, g2, phi):
    m = phi.shape[1]
    scale = 1.0 / (m * m)
    return (phi @ g1 @ phi.T) * scale, (phi @ g2 @ phi.T) * scale
