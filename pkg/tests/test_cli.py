from __future__ import annotations

import json
import math
import subprocess
import sys

import pytest

from rabinowitz_lab import gf2_homalg as gf
from rabinowitz_lab.cli import EXIT_NUMERICAL, EXIT_OK, EXIT_VALIDATION, THREADS_ENV, build_parser, run

SUBCOMMANDS = [
    ("action", "eval"),
    ("vortex", "flow"),
    ("vortex", "count"),
    ("vortex", "energy"),
    ("vortex", "index"),
    ("floer", "dims"),
    ("floer", "nu"),
    ("floer", "cases"),
    ("floer", "virdim"),
    ("gf2", "check"),
    ("gf2", "reduce"),
    ("gf2", "fuzz"),
    ("gf2", "fixbound"),
    ("group", "squares"),
    ("group", "decompose"),
]


def run_json(argv, tmp_path, name="out.json"):
    out = tmp_path / name
    code = run([*argv, "--out", str(out)])
    assert code == EXIT_OK
    return json.loads(out.read_text()), out.read_bytes()


class TestHelp:
    @pytest.mark.parametrize("area,cmd", SUBCOMMANDS)
    def test_every_subcommand_has_help(self, area, cmd, capsys):
        assert run([area, cmd, "--help"]) == EXIT_OK
        text = capsys.readouterr().out
        assert "usage:" in text

    def test_top_level_help_lists_subcommands(self):
        parser = build_parser()
        help_text = parser.format_help()
        for area in {a for a, _ in SUBCOMMANDS}:
            assert area in help_text

    def test_module_entry_point(self):
        res = subprocess.run([sys.executable, "-m", "rabinowitz_lab", "--help"], capture_output=True, text=True)
        assert res.returncode == 0 and "vortex" in res.stdout


class TestExitCodes:
    def test_unknown_flag(self):
        assert run(["floer", "nu", "--n", "3", "--kappa", "1", "--nu", "3", "--bogus", "1"]) == EXIT_VALIDATION

    def test_missing_required(self):
        assert run(["floer", "nu", "--n", "3"]) == EXIT_VALIDATION

    def test_precondition_violation(self):
        assert run(["floer", "nu", "--n", "0", "--kappa", "1", "--nu", "3"]) == EXIT_VALIDATION

    def test_degenerate_vortex_count(self):
        assert run(["vortex", "count", "--k-minus", "0", "--k-plus", "0"]) == EXIT_VALIDATION

    def test_blowup_is_numerical(self, tmp_path):
        point = tmp_path / "p.json"
        point.write_text(json.dumps({"band_lo": 0, "band_hi": 0, "coeffs": [[2.0, 0.0]], "eta": 0.0}))
        assert run(["vortex", "flow", "--point", str(point), "--s0", "0", "--s1", "10"]) == EXIT_NUMERICAL

    def test_generation_exhausted_is_numerical(self):
        assert run(["gf2", "check", "--dims", "6,0,0", "--seed", "1"]) == EXIT_NUMERICAL
        # seed 0 draws an acyclic complex, which needs no room in W + X
        assert run(["gf2", "check", "--dims", "6,0,0", "--seed", "0", "--out", "/dev/null"]) == EXIT_OK

    def test_search_exhausted_is_numerical(self):
        argv = ["group", "decompose", "--named", "A4", "--target", "(0 1)(2 3)", "--max-factors", "1"]
        assert run(argv) == EXIT_NUMERICAL

    def test_not_in_group(self):
        assert run(["group", "decompose", "--named", "S3", "--target", "(0 1 2 3)"]) == EXIT_VALIDATION

    def test_missing_file(self, tmp_path):
        assert run(["gf2", "check", "--witness", str(tmp_path / "nope.json")]) == EXIT_VALIDATION

    def test_bad_thread_env(self, monkeypatch):
        monkeypatch.setenv(THREADS_ENV, "zero")
        assert run(["gf2", "fuzz", "--count", "2"]) == EXIT_VALIDATION


class TestFloer:
    def test_nu_homotopy_false(self, tmp_path):
        rep, _ = run_json(["floer", "nu", "--n", "3", "--kappa", "1.5", "--nu", "3", "--variant", "homotopy"], tmp_path)
        assert rep["value"] is False
        assert set(rep) == {"formula", "inputs", "value", "paper_eq"}

    def test_cases(self, tmp_path):
        rep, _ = run_json(["floer", "cases"], tmp_path)
        rows = [(r["epsilon"], r["winding_gamma"], r["satisfies_as2"], r["excluded"]) for r in rep["value"]]
        assert rows == [(0, 0, False, False), (1, 1, True, False), (1, 0, False, True)]

    def test_dims(self, tmp_path):
        rep, _ = run_json(["floer", "dims", "--mu-minus", "7", "--mu-plus", "4", "--w-minus", "1"], tmp_path)
        assert rep["flow"]["value"] == 2 and rep["oni"]["value"] == 1
        assert rep["broken_piece"]["value"] == 0

    def test_virdim(self, tmp_path):
        rep, _ = run_json(["floer", "virdim", "--n", "5", "--kappa", "0", "--nu", "4"], tmp_path)
        assert rep["value"] == {"strict_bound": 0, "conclusion": -2}


class TestGF2:
    def test_fuzz_example(self, tmp_path):
        rep, _ = run_json(["gf2", "fuzz", "--seed", "7", "--count", "1000", "--dims", "6,4,2"], tmp_path)
        assert rep["holds_fraction"] == "1000/1000" and rep["violations"] == 0

    def test_fuzz_thread_independent(self, tmp_path, monkeypatch):
        _, a = run_json(["gf2", "fuzz", "--seed", "3", "--count", "200"], tmp_path, "a.json")
        monkeypatch.setenv(THREADS_ENV, "4")
        _, b = run_json(["gf2", "fuzz", "--seed", "3", "--count", "200"], tmp_path, "b.json")
        assert a == b

    def test_check_roundtrip_through_file(self, tmp_path):
        rep, _ = run_json(["gf2", "check", "--dims", "6,4,2", "--seed", "5", "--emit-witness"], tmp_path)
        assert rep["valid"] and rep["holds"]
        wfile = tmp_path / "w.json"
        wfile.write_text(json.dumps(rep["witness"]))
        again, _ = run_json(["gf2", "check", "--witness", str(wfile)], tmp_path, "again.json")
        assert again["homology"] == rep["homology"]

    def test_invalid_witness_file(self, tmp_path):
        w = gf.generate_instance(2, 3, 3, 0).to_json()
        w["psi"][0][0] ^= 1
        wfile = tmp_path / "bad.json"
        wfile.write_text(json.dumps(w))
        assert run(["gf2", "check", "--witness", str(wfile)]) == EXIT_VALIDATION

    def test_reduce(self, tmp_path):
        rep, _ = run_json(["gf2", "reduce", "--dims", "5,2,3", "--seed", "1"], tmp_path)
        assert rep["dimW"] == 5 and rep["dimX"] == 0

    def test_fixbound(self, tmp_path):
        rep, _ = run_json(["gf2", "fixbound", "--betti", "1,0,1"], tmp_path)
        assert rep["integer_bound"] == 1 and rep["real_bound"] == 0.4


class TestGroup:
    def test_squares_a5(self, tmp_path):
        rep, _ = run_json(["group", "squares", "--named", "A5"], tmp_path)
        assert rep["equals_group"] and rep["is_normal"] and rep["order"] == 60

    def test_squares_from_file(self, tmp_path):
        gfile = tmp_path / "g.json"
        gfile.write_text(json.dumps({"degree": 3, "generators": ["(0 1)", "(0 1 2)"], "name": "S3"}))
        rep, _ = run_json(["group", "squares", "--group", str(gfile)], tmp_path)
        assert rep["squares_order"] == 3 and not rep["equals_group"]

    def test_decompose(self, tmp_path):
        rep, _ = run_json(["group", "decompose", "--named", "A5", "--target", "(0 1 2 3 4)"], tmp_path)
        assert rep["found"] and rep["n"] == 1

    def test_decompose_outside_squares(self, tmp_path):
        rep, _ = run_json(["group", "decompose", "--named", "S3", "--target", "(0 1)"], tmp_path)
        assert rep["found"] is False


class TestVortexAndAction:
    def test_action_eval(self, tmp_path):
        point = tmp_path / "p.json"
        point.write_text(json.dumps({"band_lo": -1, "band_hi": 0, "coeffs": [[0.5, 0], [0.5, 0]], "eta": 0.5}))
        rep, _ = run_json(["action", "eval", "--point", str(point)], tmp_path)
        assert rep["action"] == pytest.approx(math.pi / 2)
        assert rep["critical"] is None

    def test_flow_csv(self, tmp_path):
        out = tmp_path / "traj.csv"
        assert run(["vortex", "flow", "--explicit", "--s0", "-1", "--s1", "1", "--out", str(out)]) == EXIT_OK
        lines = out.read_text().splitlines()
        assert lines[0] == "s,eta,rho_-1,rho_0"
        last = [float(x) for x in lines[-1].split(",")]
        assert last[0] == 1.0 and last[1] == pytest.approx(1 / (1 + math.exp(2 * math.pi)), abs=1e-6)

    def test_energy_explicit_shifted(self, tmp_path):
        rep, _ = run_json(["vortex", "energy", "--explicit", "--shift", "0.3,2"], tmp_path)
        assert abs(rep["energy"] - math.pi) < 1e-6
        assert rep["neg_limit"]["k"] == 3 and rep["pos_limit"]["k"] == 2

    def test_count_report(self, tmp_path):
        rep, raw = run_json(["vortex", "count", "--k-minus", "1", "--k-plus", "0"], tmp_path)
        assert rep["count_mod2"] == 1
        _, raw2 = run_json(["vortex", "count", "--k-minus", "1", "--k-plus", "0"], tmp_path, "again.json")
        assert raw == raw2

    def test_index_small_grid(self, tmp_path):
        rep, _ = run_json(["vortex", "index", "--Ns", "100"], tmp_path)
        assert (rep["index"], rep["dim_ker"], rep["dim_coker"]) == (3, 3, 0)

    def test_index_constant(self, tmp_path):
        rep, _ = run_json(["vortex", "index", "--Ns", "64", "--constant", "0,0"], tmp_path)
        assert rep["index"] == 1

    def test_index_bad_grid(self):
        assert run(["vortex", "index", "--delta", "7"]) == EXIT_VALIDATION
