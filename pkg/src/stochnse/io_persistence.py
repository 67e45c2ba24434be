"""CSV/JSON schemas, atomic writes and run manifests.

Floats are written with ``repr`` (shortest string that round-trips a 64-bit
float), so every file reads back bit-exactly.  Files are written to a
temporary sibling and renamed into place; a crashed run never leaves a
truncated file under the final name.
"""

from __future__ import annotations

import csv
import dataclasses
import hashlib
import io
import json
import math
import os
import tempfile
from datetime import datetime, timezone
from pathlib import Path
from typing import Iterable

import numpy as np

from .convergence_lab import StudyResult
from .fields import SpectralField
from .noise import NoiseParams, OUPath
from .nonlinearity import NonlinearityParams
from .scheme import SchemeParams, Trajectory
from .spectral_basis import ModeIndex, SpectralParams, Variant, build_mode_set

SCHEMA_VERSION = 1
MANIFEST_NAME = "manifest.json"
FIELD_HEADER = ["variant", "k", "l", "coeff"]
OU_HEADER = ["mode_index", "time", "value"]
TRAJECTORY_HEADER = ["time", "variant", "k", "l", "coeff"]
STUDY_HEADER = ["n", "h", "error", "stderr", "samples"]


def fmt(x: float) -> str:
    return repr(float(x))


# ---------------------------------------------------------------------------
# atomic writes
# ---------------------------------------------------------------------------


def atomic_write_text(path: str | os.PathLike, text: str) -> Path:
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", suffix=".tmp", dir=path.parent)
        try:
            with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
                fh.write(text)
                fh.flush()
                os.fsync(fh.fileno())
            os.replace(tmp, path)
        except BaseException:
            if os.path.exists(tmp):
                os.unlink(tmp)
            raise
    except OSError as exc:
        raise OSError(f"failed to write {path}: {exc}") from exc
    return path


def _csv_text(header: list[str], rows: Iterable[Iterable]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def write_json(path: str | os.PathLike, obj) -> Path:
    return atomic_write_text(path, json.dumps(_jsonable(obj), indent=2, sort_keys=True, allow_nan=False) + "\n")


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else None
    return obj


# ---------------------------------------------------------------------------
# parameter dictionaries
# ---------------------------------------------------------------------------


def field_to_dict(f: SpectralField) -> list[dict]:
    """Nonzero coefficients only, canonical order."""
    return [
        {"variant": m.variant.label, "k": m.k, "l": m.l, "coeff": float(c)}
        for m, c in zip(f.mode_set.modes, f.coeffs)
        if c != 0.0
    ]


def field_from_dict(entries: list[dict]) -> SpectralField:
    values = {}
    for i, e in enumerate(entries):
        mode = ModeIndex(Variant.parse(str(e["variant"])), int(e.get("k", 0)), int(e.get("l", 0)))
        if mode in values:
            raise ValueError(f"duplicate mode {mode} in entry {i}")
        c = float(e["coeff"])
        if not math.isfinite(c):
            raise ValueError(f"non-finite coefficient for {mode}")
        values[mode] = c
    return SpectralField.from_modes(values)


def scheme_params_to_dict(p: SchemeParams) -> dict:
    return {
        "n": p.n,
        "h": p.h,
        "T": p.T,
        "chi": p.chi,
        "rho": p.rho,
        "rho_bar": p.rho_bar,
        "gamma": p.gamma,
        "c1": p.nonlin.c1,
        "c2": p.nonlin.c2,
        "delta": p.noise.delta,
        "eta": p.noise.eta,
        "seed": p.noise.seed,
        "kappa": p.spectral.kappa,
        "epsilon": p.spectral.epsilon_shift,
        "xi": field_to_dict(p.xi),
    }


def scheme_params_from_dict(d: dict) -> SchemeParams:
    spectral = SpectralParams(epsilon_shift=float(d["epsilon"]), kappa=float(d["kappa"]))
    return SchemeParams(
        n=int(d["n"]),
        h=float(d["h"]),
        T=float(d["T"]),
        chi=float(d["chi"]),
        rho_bar=float(d["rho_bar"]),
        gamma=float(d["gamma"]),
        nonlin=NonlinearityParams(float(d["c1"]), float(d["c2"]), float(d["rho"])),
        noise=NoiseParams(float(d["delta"]), float(d["eta"]), int(d["seed"]), spectral),
        xi=field_from_dict(d["xi"]),
    )


# ---------------------------------------------------------------------------
# spectral fields
# ---------------------------------------------------------------------------


def write_field_csv(f: SpectralField, path: str | os.PathLike) -> Path:
    rows = ([m.variant.label, m.k, m.l, fmt(c)] for m, c in zip(f.mode_set.modes, f.coeffs))
    return atomic_write_text(path, _csv_text(FIELD_HEADER, rows))


def _read_rows(path: str | os.PathLike, header: list[str]) -> list[tuple[int, list[str]]]:
    path = Path(path)
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.reader(fh)
            head = next(reader, None)
            if head != header:
                raise ValueError(f"{path}: expected header {','.join(header)}, got {head}")
            rows = []
            for i, row in enumerate(reader, start=2):
                if not row:
                    continue
                if len(row) != len(header):
                    raise ValueError(f"{path}: row {i} has {len(row)} fields, expected {len(header)}")
                rows.append((i, row))
            return rows
    except OSError as exc:
        raise OSError(f"failed to read {path}: {exc}") from exc


def _parse_float(text: str, path, row: int) -> float:
    try:
        x = float(text)
    except ValueError:
        raise ValueError(f"{path}: row {row}: cannot parse {text!r} as a number") from None
    if not math.isfinite(x):
        raise ValueError(f"{path}: row {row}: non-finite value {text!r}")
    return x


def _parse_mode(variant: str, k: str, l: str, path, row: int) -> ModeIndex:
    try:
        return ModeIndex(Variant.parse(variant), int(k), int(l))
    except ValueError as exc:
        raise ValueError(f"{path}: row {row}: {exc}") from None


def read_field_csv(path: str | os.PathLike) -> SpectralField:
    values: dict[ModeIndex, float] = {}
    seen: dict[ModeIndex, int] = {}
    for row_no, (variant, k, l, c) in _read_rows(path, FIELD_HEADER):
        mode = _parse_mode(variant, k, l, path, row_no)
        if mode in seen:
            raise ValueError(f"{path}: row {row_no}: duplicate mode {mode} (first seen in row {seen[mode]})")
        seen[mode] = row_no
        values[mode] = _parse_float(c, path, row_no)
    return SpectralField.from_modes(values)


# ---------------------------------------------------------------------------
# noise paths
# ---------------------------------------------------------------------------


def write_ou_path(path: OUPath, csv_path: str | os.PathLike) -> tuple[Path, Path]:
    """CSV of ``mode_index,time,value`` plus a ``.json`` sidecar with the parameters."""
    csv_path = Path(csv_path)
    t = path.time_grid
    rows = ([i, fmt(t[j]), fmt(path.values[i, j])] for i in range(len(path.mode_set)) for j in range(t.size))
    a = atomic_write_text(csv_path, _csv_text(OU_HEADER, rows))
    meta = {
        "schema_version": SCHEMA_VERSION,
        "n": path.n,
        "sample": path.sample,
        "seed": path.params.seed,
        "delta": path.params.delta,
        "eta": path.params.eta,
        "epsilon": path.params.spectral.epsilon_shift,
        "kappa": path.params.spectral.kappa,
        "grid": t,
    }
    b = write_json(csv_path.with_suffix(".json"), meta)
    return a, b


def read_ou_path(csv_path: str | os.PathLike) -> OUPath:
    csv_path = Path(csv_path)
    meta = json.loads(csv_path.with_suffix(".json").read_text(encoding="utf-8"))
    ms = build_mode_set(int(meta["n"]))
    grid = np.array(meta["grid"], dtype=float)
    values = np.full((len(ms), grid.size), np.nan)
    for row_no, (i, t, v) in _read_rows(csv_path, OU_HEADER):
        idx = int(i)
        j = int(np.searchsorted(grid, _parse_float(t, csv_path, row_no)))
        if not (0 <= idx < len(ms)) or j >= grid.size or grid[j] != float(t):
            raise ValueError(f"{csv_path}: row {row_no}: mode index or time off the recorded grid")
        values[idx, j] = _parse_float(v, csv_path, row_no)
    if np.isnan(values).any():
        raise ValueError(f"{csv_path}: missing (mode, time) entries")
    params = NoiseParams(
        float(meta["delta"]), float(meta["eta"]), int(meta["seed"]),
        SpectralParams(epsilon_shift=float(meta["epsilon"]), kappa=float(meta["kappa"])),
    )
    return OUPath(ms, grid, values, params, int(meta["sample"]))


# ---------------------------------------------------------------------------
# trajectories
# ---------------------------------------------------------------------------


def write_trajectory(traj: Trajectory, csv_path: str | os.PathLike, extra_meta: dict | None = None) -> tuple[Path, Path]:
    csv_path = Path(csv_path)
    ms = traj.mode_set
    labels = [(m.variant.label, m.k, m.l) for m in ms.modes]
    rows = (
        [fmt(t), v, k, l, fmt(c)]
        for t, state in zip(traj.times, traj.states)
        for (v, k, l), c in zip(labels, state)
    )
    a = atomic_write_text(csv_path, _csv_text(TRAJECTORY_HEADER, rows))
    meta = {
        "schema_version": SCHEMA_VERSION,
        "params": scheme_params_to_dict(traj.params),
        "seed": traj.params.noise.seed,
        "times": traj.times,
        "indicator_log": [int(i) for i in traj.indicator_log],
    }
    if extra_meta:
        meta.update(extra_meta)
    b = write_json(csv_path.with_suffix(".json"), meta)
    return a, b


def read_trajectory(csv_path: str | os.PathLike) -> Trajectory:
    csv_path = Path(csv_path)
    meta = json.loads(csv_path.with_suffix(".json").read_text(encoding="utf-8"))
    params = scheme_params_from_dict(meta["params"])
    ms = build_mode_set(params.n)
    times = np.array(meta["times"], dtype=float)
    rows = _read_rows(csv_path, TRAJECTORY_HEADER)
    if len(rows) != times.size * len(ms):
        raise ValueError(f"{csv_path}: expected {times.size * len(ms)} rows, found {len(rows)}")
    states = np.empty((times.size, len(ms)))
    for r, (row_no, (t, v, k, l, c)) in enumerate(rows):
        i, j = divmod(r, len(ms))
        if _parse_mode(v, k, l, csv_path, row_no) != ms.modes[j] or float(t) != times[i]:
            raise ValueError(f"{csv_path}: row {row_no} is out of canonical order")
        states[i, j] = _parse_float(c, csv_path, row_no)
    return Trajectory(params, times, states, np.array(meta["indicator_log"], dtype=np.int8))


# ---------------------------------------------------------------------------
# studies
# ---------------------------------------------------------------------------


def write_study(result: StudyResult, json_path: str | os.PathLike, csv_path: str | os.PathLike, config: dict) -> tuple[Path, Path]:
    rows = (
        [r["n"], fmt(r["h"]), fmt(r["error"]), "" if r["stderr"] is None else fmt(r["stderr"]), r["samples"]]
        for r in result.rows()
    )
    a = atomic_write_text(csv_path, _csv_text(STUDY_HEADER, rows))
    b = write_json(
        json_path, {"schema_version": SCHEMA_VERSION, "config": config, "result": dataclasses.asdict(result)}
    )
    return b, a


def read_study_csv(csv_path: str | os.PathLike) -> list[dict]:
    out = []
    for row_no, (n, h, e, s, m) in _read_rows(csv_path, STUDY_HEADER):
        out.append(
            {
                "n": int(n),
                "h": _parse_float(h, csv_path, row_no),
                "error": _parse_float(e, csv_path, row_no),
                "stderr": None if s == "" else _parse_float(s, csv_path, row_no),
                "samples": int(m),
            }
        )
    return out


def write_table_csv(path: str | os.PathLike, header: list[str], rows: Iterable[Iterable]) -> Path:
    return atomic_write_text(
        path, _csv_text(header, ([fmt(v) if isinstance(v, float) else v for v in row] for row in rows))
    )


# ---------------------------------------------------------------------------
# manifests
# ---------------------------------------------------------------------------


def sha256_file(path: str | os.PathLike) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


def write_manifest(
    out_dir: str | os.PathLike,
    files: Iterable[str | os.PathLike],
    config: dict,
    seed: int,
    command: str,
    runtime: dict | None = None,
) -> Path:
    """Record every emitted file with its digest.

    ``timestamp`` and ``runtime`` (thread count, backend) are the only fields
    that vary between otherwise identical runs.
    """
    out_dir = Path(out_dir)
    entries = []
    for f in sorted({Path(f).resolve() for f in files}):
        entries.append({"path": f.relative_to(out_dir.resolve()).as_posix(), "sha256": sha256_file(f), "bytes": f.stat().st_size})
    manifest = {
        "schema_version": SCHEMA_VERSION,
        "command": command,
        "timestamp": datetime.now(timezone.utc).isoformat(timespec="seconds"),
        "config": config,
        "seed": seed,
        "files": entries,
        "runtime": runtime or {},
    }
    return write_json(out_dir / MANIFEST_NAME, manifest)


def check_manifest(out_dir: str | os.PathLike) -> list[str]:
    """Return a list of problems (empty when every digest matches)."""
    out_dir = Path(out_dir)
    try:
        manifest = json.loads((out_dir / MANIFEST_NAME).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        return [f"cannot read manifest: {exc}"]
    problems = []
    if manifest.get("schema_version") != SCHEMA_VERSION:
        problems.append(f"unsupported schema_version {manifest.get('schema_version')}")
    for entry in manifest.get("files", []):
        p = out_dir / entry["path"]
        if not p.exists():
            problems.append(f"missing file {entry['path']}")
        elif sha256_file(p) != entry["sha256"]:
            problems.append(f"digest mismatch for {entry['path']}")
    return problems
