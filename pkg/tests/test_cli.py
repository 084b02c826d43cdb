import csv
import json
import subprocess
import sys

import numpy as np
import pytest

from nashavg.cli import RunConfig, emit_plot_data, main, run
from nashavg.data_io import EvaluationReport, parse_report

from conftest import FIXTURES
from golden_cases import CASES, GOLDEN, argv_for


def assert_close_tree(a, b, path="$"):
    if isinstance(a, dict):
        assert isinstance(b, dict) and sorted(a) == sorted(b), path
        for k in a:
            assert_close_tree(a[k], b[k], f"{path}.{k}")
    elif isinstance(a, list):
        assert isinstance(b, list) and len(a) == len(b), path
        for i, (x, y) in enumerate(zip(a, b)):
            assert_close_tree(x, y, f"{path}[{i}]")
    elif isinstance(a, float) or isinstance(b, float):
        assert a == pytest.approx(b, rel=1e-6, abs=1e-9), path
    else:
        # strings (labels, digests of 12-digit text), ints and booleans
        assert a == b, path


@pytest.mark.parametrize("name, args", CASES, ids=[c[0] for c in CASES])
class TestGolden:
    def test_matches_golden(self, name, args, tmp_path):
        out = tmp_path / "report.json"
        assert main(argv_for(args, out)) == 0
        got = json.loads(out.read_text())
        want = json.loads((GOLDEN / f"{name}.json").read_text())
        assert_close_tree(got, want)

    def test_byte_identical_reruns(self, name, args, tmp_path):
        first, second = tmp_path / "a.json", tmp_path / "b.json"
        assert main(argv_for(args, first)) == 0
        assert main(argv_for(args, second)) == 0
        assert first.read_bytes() == second.read_bytes()

    def test_report_parses(self, name, args):
        rep = parse_report((GOLDEN / f"{name}.json").read_text())
        assert rep.mode in ("ava", "avt")


class TestReports:
    def test_rps(self):
        rep = json.loads((GOLDEN / "nash_ava.json").read_text())
        np.testing.assert_allclose(rep["nash"]["distribution"], 1 / 3, atol=1e-9)
        np.testing.assert_allclose(rep["nash"]["nash_average"], 0.0, atol=1e-9)

    def test_one_cell(self):
        rep = json.loads((GOLDEN / "nash_avt_one_cell.json").read_text())
        assert rep["nash"]["agent_distribution"] == [1.0]
        assert rep["nash"]["task_distribution"] == [1.0]
        assert rep["nash"]["value"] == 0.0
        assert rep["diagnostics"]["warnings"]

    def test_elo_table(self):
        rep = json.loads((GOLDEN / "elo.json").read_text())
        np.testing.assert_allclose(rep["elo"]["ratings_display"], [-71.9143334236, 71.9143334236, 0, 0], atol=1e-6)


def _run(tmp_path, *args, input_name="rps_probs.csv"):
    return main([*args, "--input", str(FIXTURES / input_name), "--output", str(tmp_path / "r.json")])


class TestExitCodes:
    def test_parse_error(self, tmp_path, capsys):
        bad = tmp_path / "bad.csv"
        bad.write_text("player_i,player_j,outcome\na,b,2\n")
        assert main(["elo", "--input", str(bad)]) == 1
        assert "line 2" in capsys.readouterr().err

    def test_missing_file(self, tmp_path):
        assert main(["elo", "--input", str(tmp_path / "nope.csv")]) == 1

    def test_wrong_format_for_subcommand(self, tmp_path):
        assert _run(tmp_path, "nash-avt", input_name="rps_probs.csv") == 1

    def test_non_convergence_keeps_diagnostics(self, tmp_path):
        code = _run(tmp_path, "elo", "--max-iter", "1", input_name="elo_4x4_probs.csv")
        assert code == 2
        rep = json.loads((tmp_path / "r.json").read_text())
        assert rep["diagnostics"]["error"]["iterations"] == 1
        assert rep["diagnostics"]["error"]["residual"] > 0

    @pytest.mark.parametrize(
        "args",
        [
            ["elo", "--k", "2"],
            ["hodge", "--standardize"],
            ["nash-ava", "--center"],
            ["hodge", "--emit-plots"],
            ["elo", "--clamp-eps", "0.5"],
            ["nash-ava", "--tol", "0"],
            ["melo", "--k", "-1"],
        ],
    )
    def test_invalid_flags(self, tmp_path, args):
        assert _run(tmp_path, *args) == 3

    def test_argparse_errors_use_flag_code(self):
        with pytest.raises(SystemExit) as info:
            main(["nash-ava", "--input", "x.csv", "--bogus"])
        assert info.value.code == 3

    def test_empty_nash_block(self, tmp_path):
        with pytest.raises(ValueError):
            emit_plot_data(EvaluationReport(mode="ava", labels=[]), tmp_path)


def _read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


class TestPlots:
    def test_rps_rows(self, tmp_path):
        assert _run(tmp_path, "nash-ava", "--emit-plots") == 0
        rows = _read_csv(tmp_path / "averages_comparison.csv")
        assert rows[0] == ["label", "uniform_avg", "nash_avg"]
        assert len(rows) == 4
        for _, uni, nash in rows[1:]:
            assert abs(float(uni)) < 1e-9 and abs(float(nash)) < 1e-9
        dist = _read_csv(tmp_path / "nash_distribution.csv")
        assert sorted(r[0] for r in dist[1:]) == ["paper", "rock", "scissors"]

    def test_duplicated_tasks_equal_mass(self, tmp_path):
        assert _run(tmp_path, "nash-avt", "--emit-plots", input_name="avt_scores_dup.csv") == 0
        rows = {(r[0], r[1]): float(r[2]) for r in _read_csv(tmp_path / "nash_distribution.csv")[1:]}
        assert rows[("task", "task3")] == rows[("task", "task3_copy")]
        avg = _read_csv(tmp_path / "averages_comparison.csv")[1:]
        agents = [float(r[3]) for r in avg if r[0] == "agent"]
        assert agents == sorted(agents, reverse=True)

    def test_sorted_by_nash_average(self, tmp_path):
        assert _run(tmp_path, "nash-ava", "--emit-plots", input_name="elo_4x4_probs.csv") == 0
        avg = [float(r[2]) for r in _read_csv(tmp_path / "averages_comparison.csv")[1:]]
        assert avg == sorted(avg, reverse=True)


class TestEntryPoint:
    def test_module_runs(self, tmp_path):
        out = tmp_path / "r.json"
        proc = subprocess.run(
            [sys.executable, "-m", "nashavg.cli", "nash-ava", "--input", str(FIXTURES / "rps_probs.csv"), "--output", str(out)],
            capture_output=True,
            text=True,
        )
        assert proc.returncode == 0, proc.stderr
        assert out.read_bytes() == (GOLDEN / "nash_ava.json").read_bytes()

    def test_run_config_defaults(self):
        cfg = RunConfig("nash-ava", FIXTURES / "rps_probs.csv")
        assert (cfg.clamp_eps, cfg.lr_r, cfg.lr_c, cfg.k, cfg.tol, cfg.seed) == (0.01, 16.0, 1.0, 1, 1e-8, 0)
        cfg.validate()

    def test_stdout(self, capsys):
        assert run(RunConfig("nash-ava", FIXTURES / "rps_probs.csv")) == 0
        assert json.loads(capsys.readouterr().out)["mode"] == "ava"
