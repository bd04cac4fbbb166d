import csv
import subprocess
import sys

import pytest

from mac_latency.cli import main, read_config
from mac_latency.errors import ConfigError


def rows(path):
    with open(path) as fh:
        return list(csv.DictReader(fh))


@pytest.fixture
def script(tmp_path):
    p = tmp_path / "one.txt"
    p.write_text("inject 0 1\n")
    return p


def test_minimal_run_writes_ten_round_trace(tmp_path, script, capsys):
    out = tmp_path / "out"
    code = main(["--algorithm", "rrw", "--n", "2", "--rho", "0", "--b", "1", "--horizon", "10",
                 "--adversary", f"script:{script}", "--out", str(out)])
    assert code == 0
    trace = rows(out / "trace.csv")
    assert len(trace) == 10
    assert trace[1]["feedback"] == "H:0"
    metrics = rows(out / "metrics.csv")
    assert metrics == [{"packet_id": "0", "station": "1", "injected": "0", "heard": "1", "latency": "1"}]
    summary = rows(out / "summary.csv")
    assert list(summary[0]) == ["config_id", "algorithm", "n", "rho", "lambda", "b", "J",
                                "max_latency", "max_queue", "bound", "ratio"]
    assert summary[0]["bound"] == "12"
    for name in ("report.txt", "bounds.csv", "run_latency.png", "run_queue.png"):
        assert (out / name).exists()
    assert "ratio" in capsys.readouterr().out


def test_same_config_and_seed_give_identical_files(tmp_path):
    args = ["--algorithm", "of-jrrw", "--n", "4", "--rho", "1/4", "--lambda", "1/4", "--b", "2",
            "--adversary", "random", "--seed", "3"]
    assert main(args + ["--out", str(tmp_path / "a")]) == 0
    assert main(args + ["--out", str(tmp_path / "b")]) == 0
    for name in ("trace.csv", "metrics.csv", "summary.csv", "report.txt", "bounds.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_grid_mode_one_row_per_point(tmp_path):
    cfg = tmp_path / "grid.cfg"
    cfg.write_text("# two algorithms, two sizes, two rates\n"
                   "algorithm = rrw, of-rrw\nn = 2,3\nrho = 1/4, 1/2\nb = 1\nadversary = greedy-behind-token\n")
    out = tmp_path / "out"
    assert main(["--config", str(cfg), "--out", str(out)]) == 0
    summary = rows(out / "summary.csv")
    assert len(summary) == 8
    assert len({r["config_id"] for r in summary}) == 8
    assert len(list((out / "traces").iterdir())) == 8
    assert (out / "grid_ratio.png").exists()


def test_flags_override_config(tmp_path):
    cfg = tmp_path / "c.cfg"
    cfg.write_text("algorithm = rrw\nn = 2,3\nb = 1\n")
    out = tmp_path / "o"
    assert main(["--config", str(cfg), "--n", "4", "--horizon", "20", "--out", str(out)]) == 0
    assert rows(out / "summary.csv")[0]["n"] == "4"


def test_config_errors(tmp_path, capsys):
    assert main(["--algorithm", "nope", "--n", "2"]) == 1
    assert main(["--algorithm", "rrw", "--n", "0"]) == 1
    assert main(["--algorithm", "rrw", "--n", "2", "--rho=-1/2"]) == 1
    assert main(["--algorithm", "rrw", "--n", "2", "--adversary", "script:/no/such/file"]) == 1
    # srr has no bound under jamming, so a horizon must be given
    assert main(["--algorithm", "srr", "--n", "2", "--lambda", "1/4"]) == 1
    # unbounded point without an explicit horizon
    assert main(["--algorithm", "rrw", "--n", "2", "--rho", "1"]) == 1
    bad = tmp_path / "bad.cfg"
    bad.write_text("algorithm rrw\n")
    assert main(["--config", str(bad)]) == 1
    assert "error" in capsys.readouterr().err
    unknown = tmp_path / "unknown.cfg"
    unknown.write_text("colour = red\n")
    with pytest.raises(ConfigError):
        read_config(unknown)


def test_budget_violation_exit_code(tmp_path, capsys):
    s = tmp_path / "burst.txt"
    s.write_text("inject 0 0\ninject 0 0\n")
    code = main(["--algorithm", "rrw", "--n", "2", "--rho", "0", "--b", "1", "--horizon", "5",
                 "--adversary", f"script:{s}"])
    assert code == 3
    assert "rounds [0, 0]" in capsys.readouterr().err


def test_verify_small_grid_passes_and_marks_full_load(tmp_path, capsys):
    cfg = tmp_path / "v.cfg"
    cfg.write_text("algorithm = of-jrrw, ofc-rrw\nn = 2,4\nrho = 1/4, 3/4\nlambda = 1/4\nb = 1\nseeds = 2\n")
    out = tmp_path / "v"
    assert main(["--config", str(cfg), "--verify", "--out", str(out)]) == 0
    text = capsys.readouterr().out
    assert text.count("not-applicable") == 4
    assert "soundness failures: 0" in text
    assert len(rows(out / "summary.csv")) == 4 * (3 + 1 + 2)
    assert rows(out / "failures.csv") == []


def test_verify_catches_mutated_threshold(tmp_path, capsys):
    cfg = tmp_path / "m.cfg"
    # J = 1 here; the mutant moves the token after J void rounds instead of J + 1
    cfg.write_text("algorithm = of-jrrw\nn = 4\nrho = 1/4\nlambda = 1/4\nb = 1\nthreshold = 1\nseeds = 5\n")
    assert main(["--config", str(cfg), "--verify"]) == 2
    assert "FAIL" in capsys.readouterr().err


def test_bound_table_export(tmp_path, capsys):
    assert main(["--bound-table", "--n", "8", "--rho", "1/4", "--lambda", "1/4", "--b", "2",
                 "--out", str(tmp_path)]) == 0
    table = rows(tmp_path / "bounds.csv")
    assert next(r for r in table if r["algorithm"] == "ofc-rrw")["latency_bound"] == "80"


def test_module_entry_point(tmp_path):
    res = subprocess.run([sys.executable, "-m", "mac_latency", "--algorithm", "rrw", "--n", "2",
                          "--horizon", "5"], capture_output=True, text=True)
    assert res.returncode == 0
    assert "configuration" in res.stdout
