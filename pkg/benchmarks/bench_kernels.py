"""Time the numba kernels against their numpy twins and check they agree.

    python benchmarks/bench_kernels.py [--repeat 200]

The F timings run in subprocesses so each backend is chosen the normal way,
through STOCHNSE_DISABLE_NUMBA.
"""

from __future__ import annotations

import argparse
import os
import subprocess
import sys
import timeit

import numpy as np

from stochnse import _kernels as K, fields

F_SNIPPET = """
import timeit, numpy as np
from stochnse import _kernels, fields, nonlinearity as nl
n = {n}
c = np.random.default_rng(0).standard_normal(len(fields.build_mode_set(n)))
p = nl.NonlinearityParams(1.0, 0.3)
nl.F_coeffs(c, n, p)
t = min(timeit.repeat(lambda: nl.F_coeffs(c, n, p), number={number}, repeat=5)) / {number}
print(_kernels.BACKEND, t, repr(float(np.sum(np.abs(nl.F_coeffs(c, n, p))))))
"""


def bench(fn, repeat: int) -> float:
    fn()
    return min(timeit.repeat(fn, number=repeat, repeat=5)) / repeat


def kernel_rows(repeat: int):
    rng = np.random.default_rng(0)
    for n in (4, 8):
        m = 4 * n
        t = fields.tables(n, m)
        c = rng.standard_normal(t.size)
        args = (t.k_idx, t.l_idx, t.mk_idx, t.ml_idx, t.w1, t.w2, t.phi)
        a, b = np.empty((m, m, 2)), np.empty((m, m, 2))
        ta = bench(lambda: K.synth_direct_np(c, *args, a), repeat)
        tb = bench(lambda: K.synth_direct_nb(c, *args, b), repeat)
        yield f"synth n={n}", ta, tb, float(np.max(np.abs(a - b)))
        ca, cb = np.empty(t.size), np.empty(t.size)
        ta = bench(lambda: K.analyze_direct_np(a, *args, ca), repeat)
        tb = bench(lambda: K.analyze_direct_nb(a, *args, cb), repeat)
        yield f"analyze n={n}", ta, tb, float(np.max(np.abs(ca - cb)))
    size = len(fields.build_mode_set(32))
    x, d, s, g = (rng.standard_normal(size) for _ in range(4))
    oa, ob = np.empty(size), np.empty(size)
    ta = bench(lambda: K.ou_advance_np(x, d, s, g, oa), repeat * 10)
    tb = bench(lambda: K.ou_advance_nb(x, d, s, g, ob), repeat * 10)
    yield "ou_advance n=32", ta, tb, float(np.max(np.abs(oa - ob)))
    ta = bench(lambda: K.weighted_norm_np(x, d), repeat * 10)
    tb = bench(lambda: K.weighted_norm_nb(x, d), repeat * 10)
    yield "weighted_norm n=32", ta, tb, abs(K.weighted_norm_np(x, d) - K.weighted_norm_nb(x, d))


def f_rows(repeat: int):
    for n in (4, 8, 16, 32):
        out = {}
        for flag in ("1", "0"):
            env = dict(os.environ, STOCHNSE_DISABLE_NUMBA=flag)
            code = F_SNIPPET.format(n=n, number=max(1, repeat // 4))
            backend, secs, checksum = subprocess.run(
                [sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True
            ).stdout.split()
            out[backend] = (float(secs), float(checksum))
        yield f"F n={n}", out["numpy"][0], out["numba"][0], abs(out["numpy"][1] - out["numba"][1])


def path_rows(repeat: int):
    """Direct summation against the separable path for one convection evaluation."""
    from stochnse import nonlinearity as nl

    for n in (2, 4, 6, 8):
        c = np.random.default_rng(n).standard_normal(len(fields.build_mode_set(n)))
        res = {}
        for method in ("direct", "separable"):
            res[method] = fields.analyze_values(nl.convective_values(c, n, method=method), n, method)
            res[method + "_t"] = bench(
                lambda: fields.analyze_values(nl.convective_values(c, n, method=method), n, method), repeat // 4 or 1
            )
        yield n, res["direct_t"], res["separable_t"], float(np.max(np.abs(res["direct"] - res["separable"])))


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=200)
    args = ap.parse_args(argv)
    if not K.HAVE_NUMBA:
        print("numba is unavailable or disabled; nothing to compare")
        return 1
    print(f"{'kernel':<20}{'numpy':>12}{'numba':>12}{'speedup':>9}{'max diff':>11}")
    worst = 0.0
    for name, t_np, t_nb, diff in [*kernel_rows(args.repeat), *f_rows(args.repeat)]:
        worst = max(worst, diff)
        print(f"{name:<20}{t_np * 1e6:>10.1f}us{t_nb * 1e6:>10.1f}us{t_np / t_nb:>8.1f}x{diff:>11.1e}")
    print(f"\n{'convection n':<20}{'direct':>12}{'separable':>12}{'max diff':>11}   (auto uses direct for n <= {fields.DIRECT_MAX_N})")
    for n, t_d, t_s, diff in path_rows(args.repeat):
        worst = max(worst, diff)
        print(f"{n:<20}{t_d * 1e6:>10.1f}us{t_s * 1e6:>10.1f}us{diff:>11.1e}")
    ok = worst <= 1e-10
    print("backends agree" if ok else f"backends DISAGREE (max diff {worst:.2e})")
    return 0 if ok else 1


if __name__ == "__main__":
    sys.exit(main())
