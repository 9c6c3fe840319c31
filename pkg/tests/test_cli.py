import csv
import json
import subprocess
import sys

import pytest

import bilevelpen as bp
from bilevelpen.cli import main


def run_cli(*args, tmp_path=None):
    argv = list(args)
    if tmp_path is not None:
        argv += ["--output", str(tmp_path)]
    return main(argv)


class TestList:
    def test_lists_registry(self, capsys):
        assert run_cli("list") == 0
        out = capsys.readouterr().out.split()
        assert "FS" in out and "QB" in out


class TestSolve:
    def test_qb_solve(self, tmp_path, capsys):
        code = run_cli("solve", "--problem", "QB", "--epsilon", "0.1",
                       "--seed", "7", tmp_path=tmp_path)
        assert code == 0
        doc = json.loads((tmp_path / "QB_solve.json").read_text())
        assert doc["schema"] == "solve-v1"
        assert doc["value"] == pytest.approx(4.0 / 1.4, abs=2e-4)
        assert doc["seed"] == 7
        assert doc["converged"] is True
        # csv mirror agrees with the json report
        with open(tmp_path / "QB_solve.csv") as fh:
            row = list(csv.DictReader(fh))[0]
        assert float(row["value"]) == doc["value"]

    def test_unknown_problem(self, tmp_path, capsys):
        code = run_cli("solve", "--problem", "nope", "--epsilon", "0.1",
                       tmp_path=tmp_path)
        assert code == 1
        assert "unknown problem" in capsys.readouterr().err

    def test_zero_epsilon(self, tmp_path, capsys):
        code = run_cli("solve", "--problem", "QB", "--epsilon", "0",
                       tmp_path=tmp_path)
        assert code == 1
        assert "epsilon must be positive" in capsys.readouterr().err

    def test_bad_flag_is_config_error(self, tmp_path, capsys):
        assert run_cli("solve", "--problem", "QB", tmp_path=tmp_path) == 1

    def test_optimistic_solve(self, tmp_path):
        code = run_cli("solve", "--problem", "FS", "--epsilon", "0.01",
                       "--sign", "optimistic", tmp_path=tmp_path)
        assert code == 0
        doc = json.loads((tmp_path / "FS_solve.json").read_text())
        assert doc["value"] == pytest.approx(3.0, abs=1e-3)


class TestContinuation:
    def test_qb_trace_files(self, tmp_path):
        code = run_cli("continuation", "--problem", "QB", "--eps0", "0.1",
                       "--rho", "0.5", "--k", "10", tmp_path=tmp_path)
        assert code == 0
        doc = json.loads((tmp_path / "QB_trace.json").read_text())
        assert doc["schema"] == "trace-v1"
        assert doc["monotone_ok"] is True
        vs = [r["v"] for r in doc["rows"]]
        assert vs == sorted(vs)
        assert vs[-1] == pytest.approx(4 / (1 + 4 * 0.1 * 0.5 ** 9), abs=2e-4)
        with open(tmp_path / "QB_trace.csv") as fh:
            header = fh.readline().strip()
        assert header == "epsilon,y0,x0,x1,x2,x3,v,h_value,fw_gap,evals"

    def test_fs_constant_trace(self, tmp_path):
        code = run_cli("continuation", "--problem", "FS", "--k", "4",
                       tmp_path=tmp_path)
        assert code == 0
        doc = json.loads((tmp_path / "FS_trace.json").read_text())
        assert all(abs(r["v"] - 2.0) < 1e-9 for r in doc["rows"])

    def test_limit_needs_three_rows(self, tmp_path, capsys):
        code = run_cli("continuation", "--problem", "QB", "--k", "1",
                       "--limit", tmp_path=tmp_path)
        assert code == 1
        assert "need k >= 3" in capsys.readouterr().err

    def test_limit_report(self, tmp_path):
        code = run_cli("continuation", "--problem", "QB", "--k", "12",
                       "--limit", tmp_path=tmp_path)
        assert code == 0
        doc = json.loads((tmp_path / "QB_trace.json").read_text())
        assert doc["limit"]["v"] == pytest.approx(4.0, abs=1e-3)


class TestOracle:
    def test_qb_oracle(self, tmp_path):
        code = run_cli("oracle", "--problem", "QB", "--ygrid", "1e-3",
                       tmp_path=tmp_path)
        assert code == 0
        doc = json.loads((tmp_path / "QB_oracle.json").read_text())
        assert doc["schema"] == "oracle-v1"
        assert doc["leader_value"] == pytest.approx(4.0, abs=1e-3)
        assert doc["y_best"][0] == pytest.approx(0.5, abs=1e-3)


class TestRates:
    def test_qb_rates_report(self, tmp_path):
        code = run_cli("rates", "--problem", "QB", tmp_path=tmp_path)
        # soft exit: the sum-sublevel certificate genuinely fails on QB
        assert code in (0, 2)
        doc = json.loads((tmp_path / "QB_rates.json").read_text())
        fit = doc["ratefit"]
        assert 0.9 <= fit["slope"] <= 1.1
        assert fit["classification"] == "linear_rate"
        assert doc["certificate"]["schema"] == "certificate-v1"
        gaps = doc["gaps"]
        assert all(g == pytest.approx(16 * e / (1 + 4 * e), abs=5e-4)
                   for e, g in gaps)
        with open(tmp_path / "QB_gaps.csv") as fh:
            assert fh.readline().strip() == "epsilon,gap"

    def test_fs_rates_exact_selection(self, tmp_path):
        code = run_cli("rates", "--problem", "FS", tmp_path=tmp_path)
        assert code == 0
        doc = json.loads((tmp_path / "FS_rates.json").read_text())
        assert doc["ratefit"]["classification"] == "exact_selection"
        assert doc["certificate"]["valid"] is True


class TestRoundTrip:
    def test_json_problem_reproduces_solve(self, tmp_path, qb):
        bp.save_problem(qb, tmp_path / "qb.json")
        d1 = tmp_path / "by_name"
        d2 = tmp_path / "by_file"
        assert run_cli("solve", "--problem", "QB", "--epsilon", "0.05",
                       "--seed", "3", tmp_path=d1) == 0
        assert run_cli("solve", "--problem", str(tmp_path / "qb.json"),
                       "--epsilon", "0.05", "--seed", "3", tmp_path=d2) == 0
        a = json.loads((d1 / "QB_solve.json").read_text())
        b = json.loads((d2 / "QB_solve.json").read_text())
        assert a == b


def test_console_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "bilevelpen.cli", "list"],
                          capture_output=True, text=True)
    assert proc.returncode == 0
    assert "QB" in proc.stdout
