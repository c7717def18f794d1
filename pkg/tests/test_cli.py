import csv
import json
import subprocess
import sys

import pytest

from sumtest.cli import main


def read_csv(path):
    with open(path) as fh:
        return list(csv.DictReader(fh))


@pytest.fixture(autouse=True)
def serial(monkeypatch):
    monkeypatch.setenv("SUMTEST_THREADS", "1")


class TestCurves:
    def test_rows(self, tmp_path):
        out = tmp_path / "c.csv"
        assert main(["curves", "--k-min", "1", "--k-max", "2", "--sb-reps", "5", "--out", str(out)]) == 0
        rows = read_csv(out)
        assert list(rows[0]) == ["k", "benchmark1", "sb_mean", "dyadic", "lower_bound"]
        assert rows[0] == {"k": "1", "benchmark1": "20", "sb_mean": "20", "dyadic": "20", "lower_bound": "20"}
        assert rows[1]["benchmark1"] == "40" and rows[1]["dyadic"] == "27" and rows[1]["lower_bound"] == "26"

    def test_bad_range(self, capsys):
        assert main(["curves", "--k-min", "3", "--k-max", "2"]) == 2
        assert main(["curves", "--k-min", "0"]) == 2


class TestSimulate:
    def test_k1_entropy(self, tmp_path):
        out = tmp_path / "t.csv"
        assert main(["simulate", "--k", "1", "--n", "100", "--out", str(out)]) == 0
        rows = read_csv(out)
        assert len(rows) == 101
        assert rows[0]["n"] == "0" and rows[0]["X_n"] == "" and float(rows[0]["H_bits"]) == 0.0
        assert float(rows[-1]["H_bits"]) == -100.0
        summary = read_csv(tmp_path / "t_summary.csv")
        assert float(summary[0]["final_entropy"]) == -100.0 and float(summary[0]["rate"]) == 1.0

    def test_k2_rate(self, tmp_path):
        out = tmp_path / "t.csv"
        assert main(["simulate", "--k", "2", "--n", "200", "--reps", "200", "--seed", "3", "--out", str(out)]) == 0
        rates = [float(r["rate"]) for r in read_csv(tmp_path / "t_summary.csv")]
        assert sum(rates) / len(rates) == pytest.approx(1.5, abs=0.02)

    def test_deterministic(self, tmp_path):
        paths = []
        for i in range(2):
            out = tmp_path / f"t{i}.csv"
            assert main(["simulate", "--k", "3", "--n", "10", "--reps", "4", "--seed", "9", "--out", str(out)]) == 0
            paths.append(out)
        assert paths[0].read_bytes() == paths[1].read_bytes()

    def test_thread_count_does_not_change_output(self, tmp_path, monkeypatch):
        args = ["simulate", "--k", "2", "--n", "8", "--reps", "5", "--seed", "4"]
        assert main(args + ["--out", str(tmp_path / "a.csv")]) == 0
        monkeypatch.setenv("SUMTEST_THREADS", "2")
        assert main(args + ["--out", str(tmp_path / "b.csv")]) == 0
        assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()

    def test_dump_state(self, tmp_path):
        state = tmp_path / "s.json"
        assert main(["simulate", "--k", "2", "--n", "3", "--out", str(tmp_path / "t.csv"), "--dump-state", str(state)]) == 0
        d = json.loads(state.read_text())
        assert d["k"] == 2 and len(d["answers"]) == 3 and d["cells"] and d["support"]

    def test_greedy_and_sb(self, tmp_path):
        assert main(["simulate", "--k", "2", "--n", "2", "--policy", "greedy", "--out", str(tmp_path / "g.csv")]) == 0
        assert len(read_csv(tmp_path / "g.csv")) == 3
        assert main(["simulate", "--k", "2", "--n", "5", "--policy", "sb", "--target-bits", "2",
                     "--out", str(tmp_path / "s.csv")]) == 0

    def test_usage_errors(self, tmp_path):
        bad = tmp_path / "p.json"
        bad.write_text('{"type": "piecewise", "breakpoints": [0, 1], "densities": [2]}')
        assert main(["simulate", "--k", "2", "--n", "3", "--prior", str(bad)]) == 2
        assert main(["simulate", "--k", "2", "--n", "3", "--prior", str(tmp_path / "missing.json")]) == 2
        assert main(["simulate", "--k", "2", "--n", "30", "--dump-state", str(tmp_path / "x.json")]) == 2
        assert main(["simulate", "--k", "2", "--n", "3", "--policy", "sb", "--dump-state", str(tmp_path / "x.json")]) == 2
        assert main(["simulate", "--k", "0", "--n", "3"]) == 2

    def test_bad_threads(self, monkeypatch):
        monkeypatch.setenv("SUMTEST_THREADS", "many")
        assert main(["simulate", "--k", "1", "--n", "1"]) == 2


class TestLocalize:
    def test_rows_and_scene(self, tmp_path):
        out, scene = tmp_path / "l.csv", tmp_path / "s.json"
        assert main(["localize", "--m", "8", "--k", "2", "--reps", "3", "--out", str(out), "--dump-scene", str(scene)]) == 0
        rows = read_csv(out)
        assert len(rows) == 12 and {r["algorithm"] for r in rows} == {"ir", "pr", "ipr", "ep"}
        d = json.loads(scene.read_text())
        assert d["M"] == 8 and len(d["pixels"]) == 2

    def test_guards(self):
        assert main(["localize", "--m", "8", "--k", "10", "--algos", "ep"]) == 2
        assert main(["localize", "--m", "6", "--k", "2"]) == 2
        assert main(["localize", "--m", "8", "--k", "2", "--algos", "xx"]) == 2
        assert main(["localize", "--m", "2", "--k", "5", "--algos", "ir"]) == 2


def test_help_lists_schemas():
    res = subprocess.run([sys.executable, "-m", "sumtest", "--help"], capture_output=True, text=True)
    assert res.returncode == 0
    for col in ("benchmark1, sb_mean", "rep, n, X_n, H_bits", "oracle_calls", "SUMTEST_THREADS"):
        assert col in res.stdout


def test_no_command_is_usage_error():
    assert main([]) == 2
