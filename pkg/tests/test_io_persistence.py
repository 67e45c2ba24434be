import json
import math

import numpy as np
import pytest

from stochnse import convergence_lab as cl, io_persistence as io, noise as nz
from stochnse.fields import SpectralField
from stochnse.noise import NoiseParams
from stochnse.nonlinearity import NonlinearityParams
from stochnse.scheme import SchemeParams, run_trajectory
from stochnse.spectral_basis import ModeIndex, SpectralParams, build_mode_set

from conftest import random_field


def test_fmt_round_trips():
    for x in (0.1, 1 / 3, 1e-300, -2.5e17, math.pi):
        assert float(io.fmt(x)) == x


class TestFieldCsv:
    def test_round_trip(self, tmp_path, rng):
        f = random_field(rng, 4)
        io.write_field_csv(f, tmp_path / "f.csv")
        g = io.read_field_csv(tmp_path / "f.csv")
        assert g.n == 4 and np.array_equal(g.coeffs, f.coeffs)

    def test_zero_field(self, tmp_path):
        io.write_field_csv(SpectralField.zeros(1), tmp_path / "z.csv")
        assert (tmp_path / "z.csv").read_text().splitlines() == ["variant,k,l,coeff", "E001,0,0,0.0", "Vec0,0,0,0.0"]
        assert not np.any(io.read_field_csv(tmp_path / "z.csv").coeffs)

    def test_canonical_order_independent_of_construction(self, tmp_path):
        modes = {ModeIndex.vec0(1, -1): 0.5, ModeIndex.e001(): 2.0, ModeIndex.vec0(0, 1): -1.0}
        io.write_field_csv(SpectralField.from_modes(modes), tmp_path / "a.csv")
        io.write_field_csv(SpectralField.from_modes(dict(reversed(list(modes.items())))), tmp_path / "b.csv")
        assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()

    def test_duplicate_row(self, tmp_path):
        (tmp_path / "d.csv").write_text("variant,k,l,coeff\nVec0,1,0,0.5\nE001,0,0,1.0\nVec0,1,0,0.25\n")
        with pytest.raises(ValueError, match=r"row 4: duplicate mode .*first seen in row 2"):
            io.read_field_csv(tmp_path / "d.csv")

    @pytest.mark.parametrize("row, fragment", [("Vec0,1,0,nan", "non-finite"), ("Vec0,1,0,inf", "non-finite"),
                                               ("Vec9,1,0,1.0", "row 2"), ("Vec0,1,0,abc", "cannot parse")])
    def test_bad_rows(self, tmp_path, row, fragment):
        (tmp_path / "b.csv").write_text(f"variant,k,l,coeff\n{row}\n")
        with pytest.raises(ValueError, match=fragment):
            io.read_field_csv(tmp_path / "b.csv")

    def test_bad_header(self, tmp_path):
        (tmp_path / "h.csv").write_text("a,b,c,d\n")
        with pytest.raises(ValueError, match="expected header"):
            io.read_field_csv(tmp_path / "h.csv")

    def test_dict_round_trip(self, rng):
        f = random_field(rng, 3)
        assert np.array_equal(io.field_from_dict(io.field_to_dict(f)).coeffs, f.coeffs)
        with pytest.raises(ValueError, match="duplicate"):
            io.field_from_dict([{"variant": "E001", "coeff": 1}, {"variant": "E001", "coeff": 2}])


def test_ou_path_round_trip(tmp_path):
    p = nz.simulate_ou(build_mode_set(3), nz.uniform_grid(0.1, 0.5), NoiseParams(seed=9, eta=0.5), sample=2)
    io.write_ou_path(p, tmp_path / "ou.csv")
    q = io.read_ou_path(tmp_path / "ou.csv")
    assert np.array_equal(q.values, p.values) and np.array_equal(q.time_grid, p.time_grid)
    assert q.params == p.params and q.sample == 2


def test_scheme_params_round_trip(two_mode_xi):
    p = SchemeParams(3, 1 / 16, 0.5, 0.04, 0.7, 1.5, NonlinearityParams(0.5, 0.2, 0.58),
                     NoiseParams(1.1, 0.3, 17, SpectralParams(0.5, 0.2)), two_mode_xi)
    q = io.scheme_params_from_dict(json.loads(json.dumps(io.scheme_params_to_dict(p))))
    assert io.scheme_params_to_dict(q) == io.scheme_params_to_dict(p)


def test_trajectory_round_trip(tmp_path, two_mode_xi):
    p = SchemeParams(n=3, h=1 / 16, xi=two_mode_xi)
    tr = run_trajectory(p, nz.simulate_ou(build_mode_set(3), p.time_grid(), p.noise))
    io.write_trajectory(tr, tmp_path / "t.csv")
    back = io.read_trajectory(tmp_path / "t.csv")
    assert np.array_equal(back.states, tr.states) and np.array_equal(back.indicator_log, tr.indicator_log)
    assert np.array_equal(back.times, tr.times)


def test_study_round_trip(tmp_path, two_mode_xi):
    cfg = cl.StudyConfig((1, 2), 2, 1, SchemeParams(n=2, h=1 / 16, xi=two_mode_xi))
    res = cl.strong_error_mc(cfg)
    io.write_study(res, tmp_path / "s.json", tmp_path / "s.csv", {"x": 1})
    rows = io.read_study_csv(tmp_path / "s.csv")
    assert [r["error"] for r in rows] == res.estimates
    assert rows[0]["stderr"] is None
    doc = json.loads((tmp_path / "s.json").read_text())
    assert doc["schema_version"] == io.SCHEMA_VERSION and doc["result"]["reference_n"] == 2


def test_json_nan_becomes_null(tmp_path):
    io.write_json(tmp_path / "a.json", {"b": float("nan"), "a": np.arange(2)})
    text = (tmp_path / "a.json").read_text()
    assert json.loads(text) == {"a": [0, 1], "b": None}
    assert text.index('"a"') < text.index('"b"')


def test_atomic_write_leaves_no_temporaries(tmp_path):
    io.atomic_write_text(tmp_path / "sub" / "x.txt", "one")
    io.atomic_write_text(tmp_path / "sub" / "x.txt", "two")
    assert [p.name for p in (tmp_path / "sub").iterdir()] == ["x.txt"]
    assert (tmp_path / "sub" / "x.txt").read_text() == "two"


class TestManifest:
    def make(self, tmp_path):
        a = io.atomic_write_text(tmp_path / "a.txt", "alpha\n")
        b = io.write_json(tmp_path / "b.json", {"k": 1})
        io.write_manifest(tmp_path, [a, b], {"seed": 3}, 3, "simulate", {"threads": 2})
        return json.loads((tmp_path / "manifest.json").read_text())

    def test_contents(self, tmp_path):
        m = self.make(tmp_path)
        assert m["schema_version"] == 1 and m["command"] == "simulate" and m["seed"] == 3
        assert [f["path"] for f in m["files"]] == ["a.txt", "b.json"]
        assert m["files"][0]["bytes"] == 6
        assert m["files"][0]["sha256"] == io.sha256_file(tmp_path / "a.txt")
        assert m["runtime"] == {"threads": 2} and "timestamp" in m
        assert io.check_manifest(tmp_path) == []

    def test_tamper_and_missing(self, tmp_path):
        self.make(tmp_path)
        (tmp_path / "a.txt").write_text("beta\n")
        (tmp_path / "b.json").unlink()
        problems = io.check_manifest(tmp_path)
        assert any("digest mismatch for a.txt" in p for p in problems)
        assert any("missing file b.json" in p for p in problems)

    def test_no_manifest(self, tmp_path):
        assert "cannot read manifest" in io.check_manifest(tmp_path)[0]
