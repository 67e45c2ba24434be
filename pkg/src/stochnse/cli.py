"""Command-line front end: ``simulate``, ``converge``, ``noise-error``, ``verify``.

Configuration is one JSON document whose keys override the defaults below;
``--seed``, ``--samples``, ``--out`` and ``--threads`` override the file.
Exit codes: 0 success, 2 configuration error, 3 non-finite value,
4 verification failure (including a failed ``--check``).
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import math
import sys
from pathlib import Path

from . import _kernels, fields, io_persistence as io, verification
from .convergence_lab import StudyConfig, noise_error_study, strong_error_mc
from .errors import ConfigError, NonFiniteError
from .noise import NoiseParams, simulate_ou, truncation_rate_bound
from .nonlinearity import NonlinearityParams
from .scheme import SchemeParams, default_step, run_trajectory
from .spectral_basis import SpectralParams, build_mode_set

log = logging.getLogger("stochnse")

EXIT_OK, EXIT_CONFIG, EXIT_NONFINITE, EXIT_VERIFY = 0, 2, 3, 4

DEFAULTS: dict = {
    "rho": 0.6,
    "rho_bar": 0.75,
    "delta": 1.0,
    "gamma": 2.0,
    "chi": 0.05,
    "c1": 1.0,
    "c2": 0.0,
    "kappa": 0.0,
    "epsilon": 1.0,
    "eta": 0.0,
    "T": 1.0,
    "xi": [
        {"variant": "Vec0", "k": 1, "l": 0, "coeff": 0.5},
        {"variant": "Vec0", "k": 0, "l": 1, "coeff": 0.5},
    ],
    "seed": 0,
    # simulate
    "n": 8,
    "h": None,
    # converge
    "resolutions": [4, 8, 16],
    "reference_n": 32,
    "samples": 64,
    "p": 2.0,
    # noise-error
    "noise_n_list": [2, 4, 8],
    "noise_reference_n": 32,
    "noise_samples": 1000,
    "noise_t": 1.0,
    # verify
    "verify_seed": 2024,
}


@dataclasses.dataclass
class RunConfig:
    values: dict
    out: Path
    threads: int = 1
    verbosity: int = 1

    def scheme_params(self, n: int | None = None, h: float | None = None) -> SchemeParams:
        v = self.values
        n = int(v["n"] if n is None else n)
        if h is None:
            h = v["h"] if v["h"] is not None and n == v["n"] else default_step(n, v["T"])
        spectral = SpectralParams(epsilon_shift=v["epsilon"], kappa=v["kappa"])
        return SchemeParams(
            n=n,
            h=float(h),
            T=v["T"],
            chi=v["chi"],
            rho_bar=v["rho_bar"],
            gamma=v["gamma"],
            nonlin=NonlinearityParams(v["c1"], v["c2"], v["rho"]),
            noise=NoiseParams(v["delta"], v["eta"], int(v["seed"]), spectral),
            xi=io.field_from_dict(v["xi"]),
        )


def load_config(path: str | None, overrides: dict) -> dict:
    values = dict(DEFAULTS)
    if path is not None:
        try:
            doc = json.loads(Path(path).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot load config {path}: {exc}") from None
        if not isinstance(doc, dict):
            raise ConfigError("config must be a JSON object")
        unknown = sorted(set(doc) - set(DEFAULTS))
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
        values.update(doc)
    values.update({k: v for k, v in overrides.items() if v is not None})
    for key in ("rho", "rho_bar", "delta", "gamma", "chi", "c1", "c2", "kappa", "epsilon", "eta", "T", "p", "noise_t"):
        try:
            values[key] = float(values[key])
        except (TypeError, ValueError):
            raise ConfigError(f"config key {key!r} must be a number") from None
        if not math.isfinite(values[key]):
            raise ConfigError(f"config key {key!r} must be finite")
    return values


def _validate(cfg: RunConfig) -> SchemeParams:
    """Build the scheme parameters, turning every constraint violation into ConfigError."""
    try:
        return cfg.scheme_params()
    except ConfigError:
        raise
    except (ValueError, KeyError, TypeError) as exc:
        raise ConfigError(str(exc)) from None


def _runtime(cfg: RunConfig) -> dict:
    return {"threads": cfg.threads, "backend": _kernels.BACKEND}


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------


def cmd_simulate(cfg: RunConfig) -> int:
    params = _validate(cfg)
    path = simulate_ou(build_mode_set(params.n), params.time_grid(), params.noise)
    traj = run_trajectory(params, path)
    files = io.write_trajectory(traj, cfg.out / "trajectory.csv", {"config": cfg.values})
    io.write_manifest(cfg.out, files, cfg.values, params.noise.seed, "simulate", _runtime(cfg))
    final = traj.state(-1)
    print(f"t={traj.times[-1]:g}  |X|_H={fields.norm_Hr(final, 0.0, params.spectral):.10g}  "
          f"|X|_H_rho_bar={fields.norm_Hr(final, params.rho_bar, params.spectral):.10g}  "
          f"drift-off steps={int((traj.indicator_log == 0).sum())}/{traj.indicator_log.size}")
    return EXIT_OK


def cmd_converge(cfg: RunConfig) -> int:
    v = cfg.values
    base = _validate(cfg)
    try:
        study = StudyConfig(
            resolutions=tuple(int(n) for n in v["resolutions"]),
            reference_n=int(v["reference_n"]),
            samples=int(v["samples"]),
            params=base,
            p=v["p"],
            base_seed=int(v["seed"]),
        )
        for n in study.resolutions:
            study.study_params(n)
    except ConfigError:
        raise
    except (ValueError, TypeError) as exc:
        raise ConfigError(str(exc)) from None
    result = strong_error_mc(study, threads=cfg.threads)
    files = io.write_study(result, cfg.out / "study.json", cfg.out / "study.csv", cfg.values)
    io.write_manifest(cfg.out, files, cfg.values, study.base_seed, "converge", _runtime(cfg))
    for row in result.rows():
        se = "n/a" if row["stderr"] is None else f"{row['stderr']:.3e}"
        print(f"n={row['n']:3d}  h={row['h']:.3e}  error={row['error']:.6e}  stderr={se}")
    if result.slope is not None:
        print(f"fitted slope {result.slope:.3f} (rms residual {result.residual:.3f})")
    for note in result.notes:
        print(note)
    return EXIT_OK


def cmd_noise_error(cfg: RunConfig) -> int:
    v = cfg.values
    base = _validate(cfg)
    try:
        rows = noise_error_study(
            [int(n) for n in v["noise_n_list"]],
            v["noise_t"],
            base.noise,
            base.rho_bar,
            int(v["noise_samples"]),
            int(v["noise_reference_n"]),
            threads=cfg.threads,
        )
        eps = (base.noise.delta - base.rho_bar) / 2
        bounds = [truncation_rate_bound(r.n, eps, base.rho_bar, base.noise) for r in rows]
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    header = ["n", "closed_form", "mc_estimate", "std_err", "rate_bound"]
    table = [[r.n, r.closed_form, r.mc_estimate, r.std_err, b] for r, b in zip(rows, bounds)]
    a = io.write_table_csv(cfg.out / "noise_error.csv", header, table)
    b = io.write_json(
        cfg.out / "noise_error.json",
        {"schema_version": io.SCHEMA_VERSION, "config": cfg.values, "rate_bound_eps": eps,
         "rows": [dict(zip(header, r)) for r in table]},
    )
    io.write_manifest(cfg.out, [a, b], cfg.values, base.noise.seed, "noise-error", _runtime(cfg))
    for r, bnd in zip(rows, bounds):
        z = abs(r.mc_estimate - r.closed_form) / r.std_err if r.std_err > 0 else math.inf
        print(f"n={r.n:3d}  closed form={r.closed_form:.6e}  mc={r.mc_estimate:.6e} +- {r.std_err:.2e}  "
              f"|z|={z:.2f}  bound={bnd:.3e}")
    return EXIT_OK


def cmd_verify(cfg: RunConfig) -> int:
    results = verification.run_all(int(cfg.values["verify_seed"]))
    report = verification.format_report(results)
    print(report)
    a = io.atomic_write_text(cfg.out / "verify_report.txt", report + "\n")
    b = io.write_json(
        cfg.out / "verify.json",
        {"schema_version": io.SCHEMA_VERSION, "config": cfg.values,
         "suites": [{k: v for k, v in dataclasses.asdict(r).items() if k != "seconds"} for r in results]},
    )
    io.write_manifest(cfg.out, [a, b], cfg.values, int(cfg.values["verify_seed"]), "verify", _runtime(cfg))
    return EXIT_OK if all(r.passed for r in results) else EXIT_VERIFY


COMMANDS = {
    "simulate": cmd_simulate,
    "converge": cmd_converge,
    "noise-error": cmd_noise_error,
    "verify": cmd_verify,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="stochnse", description=__doc__.splitlines()[0])
    parser.add_argument("--check", metavar="DIR", help="verify the manifest digests of an output directory and exit")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON configuration file")
    common.add_argument("--seed", type=int, help="master seed (unsigned 64-bit)")
    common.add_argument("--out", default="out", help="output directory (default: ./out)")
    common.add_argument("--threads", type=int, default=1, help="worker threads; never changes results")
    common.add_argument("--samples", type=int, help="Monte Carlo samples for converge")
    common.add_argument("-v", "--verbose", action="count", default=0)
    common.add_argument("-q", "--quiet", action="store_true")
    sub = parser.add_subparsers(dest="command")
    for name in COMMANDS:
        sub.add_parser(name, parents=[common])
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.check:
        problems = io.check_manifest(args.check)
        for p in problems:
            print(p, file=sys.stderr)
        print("manifest OK" if not problems else f"{len(problems)} problem(s)")
        return EXIT_OK if not problems else EXIT_VERIFY
    if args.command is None:
        parser.print_help()
        return EXIT_CONFIG
    verbosity = 0 if args.quiet else 1 + args.verbose
    logging.basicConfig(level=logging.WARNING if verbosity <= 1 else logging.DEBUG, format="%(levelname)s %(message)s")
    try:
        if args.threads < 1:
            raise ConfigError("--threads must be >= 1")
        if args.seed is not None and not 0 <= args.seed < 2**64:
            raise ConfigError("--seed must be an unsigned 64-bit integer")
        values = load_config(args.config, {"seed": args.seed, "samples": args.samples})
        cfg = RunConfig(values, Path(args.out), args.threads, verbosity)
        return COMMANDS[args.command](cfg)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NonFiniteError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NONFINITE


if __name__ == "__main__":
    sys.exit(main())
