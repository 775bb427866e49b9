from __future__ import annotations

import json

import numpy as np
import pytest

from conftest import CONFIGS
from grankin import cli


def run(capsys, *argv):
    code = cli.dispatch(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


class TestEmitCsv:
    def test_header_only(self, tmp_path):
        path = tmp_path / "e.csv"
        cli.emit_csv(path, ["a", "b"], [])
        assert path.read_bytes() == b"a,b\n"

    def test_round_trip(self, tmp_path):
        rows = [(1, 0.1, 1 / 3), (2, -1e-300, 12345.678901234567)]
        path = tmp_path / "r.csv"
        cli.emit_csv(path, ["n", "x", "y"], rows)
        header, parsed = cli.read_csv(path)
        assert header == ["n", "x", "y"]
        assert [(int(a), float(b), float(c)) for a, b, c in parsed] == rows

    def test_bytes_deterministic_lf(self, tmp_path):
        rows = [(0.1 + 0.2, None, "x")]
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        cli.emit_csv(a, ["p", "q", "r"], rows)
        cli.emit_csv(b, ["p", "q", "r"], rows)
        assert a.read_bytes() == b.read_bytes()
        assert b"\r" not in a.read_bytes()
        assert a.read_text().splitlines()[1] == "0.30000000000000004,,x"


class TestCommands:
    def test_gap_elastic(self, capsys):
        code, out, _ = run(capsys, "gap", "--config", str(CONFIGS / "elastic.json"))
        assert code == 0 and out.strip() == "0.5"

    def test_constants(self, capsys, tmp_path):
        path = tmp_path / "c.json"
        code, _, _ = run(capsys, "constants", "--config", str(CONFIGS / "inelastic.json"), "--out", str(path))
        data = json.loads(path.read_text())
        assert code == 0
        assert abs(data["erfinv_half"] - 0.4769) < 5e-5
        assert data["provenance"]["k_norm_bound"] == "analytic-bound"
        assert (tmp_path / "c.json.manifest.json").exists()

    def test_spectrum(self, capsys, tmp_path):
        path = tmp_path / "s.csv"
        code, _, _ = run(capsys, "spectrum", "--nmax", "3", "--lmax", "3", "--out", str(path))
        header, rows = cli.read_csv(path)
        assert code == 0 and header == ["n", "l", "lambda"] and len(rows) == 16
        assert rows[0] == ["0", "0", "0"]

    def test_operator_check(self, capsys):
        code, out, _ = run(capsys, "operator", "--kernel", "hs", "--res", "10", "--check")
        assert code == 0
        assert set(json.loads(out)) == {"self_adjointness", "negativity", "mass_conservation", "equilibrium"}

    def test_relax_particle_prints_seed(self, capsys, tmp_path):
        path = tmp_path / "t.csv"
        code, _, err = run(capsys, "relax", "--method", "particle", "--particles", "1000", "--tend", "0.5",
                           "--seed", "42", "--out", str(path))
        header, rows = cli.read_csv(path)
        assert code == 0 and "seed: 42" in err
        assert header == ["t", "px", "py", "pz", "energy", "l2dist"] and len(rows) == 65
        assert rows[0][-1] == ""

    def test_manifest_fields(self, capsys, tmp_path):
        path = tmp_path / "s.csv"
        run(capsys, "spectrum", "--nmax", "1", "--lmax", "1", "--out", str(path), "--seed", "3")
        manifest = json.loads((tmp_path / "s.csv.manifest.json").read_text())
        assert manifest["command"] == "spectrum" and manifest["seed"] == 3
        assert manifest["outputs"] == [str(path)] and manifest["wall_time"] >= 0
        assert "grankin" in manifest["versions"]


class TestExitCodes:
    def test_usage(self, capsys):
        assert run(capsys, "spectrum", "--bogus")[0] == cli.EXIT_USAGE
        assert run(capsys, "nonsense")[0] == cli.EXIT_USAGE

    def test_config(self, capsys, tmp_path):
        assert run(capsys, "gap", "--config", str(tmp_path / "missing.json"))[0] == cli.EXIT_CONFIG
        bad = tmp_path / "bad.json"
        bad.write_text(json.dumps({"e": 2.0}))
        assert run(capsys, "gap", "--config", str(bad))[0] == cli.EXIT_CONFIG

    def test_numeric_failure_named(self, capsys):
        code, _, err = run(capsys, "spectrum", "--kappa", "0.99", "--nmax", "0", "--lmax", "6")
        assert code == cli.EXIT_CHECK
        assert "QuadratureError" in err

    def test_threads(self, capsys, monkeypatch):
        monkeypatch.setenv("GRANKIN_THREADS", "1")
        assert run(capsys, "gap")[0] == 0
        assert run(capsys, "gap", "--threads", "2")[0] == 0
