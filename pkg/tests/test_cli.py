import csv
import json
import subprocess
import sys

import pytest

from skrates.cli import main

SMALL = """\
eps_list = [0.25, 0.125, 0.0625]
N = 8
T = 0.05
h = 0.0015625
M = 40
n_obs = 4
bootstrap = 100
"""


@pytest.fixture
def cfg_path(tmp_path):
    p = tmp_path / "small.cfg"
    p.write_text(SMALL)
    return p


def read_rows(path):
    lines = [l for l in path.read_text().splitlines() if not l.startswith("#")]
    return list(csv.reader(lines))


def test_strong_rate_end_to_end(cfg_path, tmp_path, capsys):
    out = tmp_path / "out"
    assert main(["strong-rate", "--config", str(cfg_path), "--out", str(out), "--gnuplot"]) == 0
    rows = read_rows(out / "strong_rate.csv")
    assert rows[0] == ["type", "eps", "error", "ci_halfwidth", "n_samples", "noise_dominated"]
    assert rows[-2] == ["slope", "slope_stderr", "intercept"]
    assert len(rows) == 1 + 3 + 2
    assert (out / "strong_rate.gp").exists()
    report = (out / "strong_rate_report.txt").read_text()
    assert "fitted slope" in report and "predicted rate 0.5" in report
    manifest = json.loads((out / "strong-rate_manifest.json".replace("-", "_")).read_text())
    assert manifest["workers"] == 1 and manifest["digest"] in (out / "strong_rate.csv").read_text()
    assert main(["strong-rate", "--config", str(cfg_path), "--out", str(out), "--check-digest"]) == 0


def test_check_digest_detects_other_config(cfg_path, tmp_path):
    out = tmp_path / "out"
    assert main(["propagator-table", "--config", str(cfg_path), "--out", str(out)]) == 0
    other = tmp_path / "other.cfg"
    other.write_text(SMALL.replace("M = 40", "M = 41"))
    assert main(["propagator-table", "--config", str(other), "--out", str(out), "--check-digest"]) == 2
    assert main(["propagator-table", "--config", str(cfg_path), "--out", str(out), "--check-digest"]) == 0


def test_propagator_table_schema(cfg_path, tmp_path):
    out = tmp_path / "out"
    assert main(["propagator-table", "--config", str(cfg_path), "--out", str(out)]) == 0
    rows = read_rows(out / "propagator_table.csv")
    assert rows[0] == ["eps", "lambda", "t", "f10", "f01", "g10", "g01"]
    assert len(rows) == 1 + 3 * 8 * 4


def test_simulate_schema(cfg_path, tmp_path):
    out = tmp_path / "out"
    assert main(["simulate", "--config", str(cfg_path), "--out", str(out)]) == 0
    for i in range(3):
        rows = read_rows(out / f"simulate_eps{i}.csv")
        assert rows[0] == ["t", "mode", "u_eps", "v_eps", "u_heat"]
        assert len(rows) == 1 + 4 * 8


def test_lemma_check_contraction(tmp_path, capsys):
    assert main(["lemma-check", "--lemma", "4.1", "--out", str(tmp_path)]) == 0
    assert "max ratio <= 1" in capsys.readouterr().out


def test_lemma_check_reports_constant(tmp_path, capsys):
    assert main(["lemma-check", "--lemma", "4.5", "--out", str(tmp_path)]) == 0
    assert "fitted constant" in capsys.readouterr().out


def test_lemma_out_of_range_is_invalid(tmp_path):
    p = tmp_path / "c.cfg"
    p.write_text("lemma = smoothing-wave\nlemma_delta = 0.4\nlemma_rho = 0.5\n")
    assert main(["lemma-check", "--config", str(p), "--out", str(tmp_path)]) == 2
    assert main(["lemma-check", "--lemma", "9.9", "--out", str(tmp_path)]) == 2


def test_validation_error_exit_code(tmp_path, capsys):
    p = tmp_path / "bad.cfg"
    p.write_text("T = 0.25\nh = 0.3\n")
    assert main(["simulate", "--config", str(p), "--out", str(tmp_path)]) == 2
    assert "h must divide T" in capsys.readouterr().err


def test_unknown_subcommand_exit_code(capsys):
    with pytest.raises(SystemExit) as info:
        main(["bogus"])
    assert info.value.code == 2
    assert "usage" in capsys.readouterr().err


def test_numerical_failure_exit_code(tmp_path):
    p = tmp_path / "blow.cfg"
    p.write_text("eps_list = [0.5, 0.25, 0.125]\nN = 4\nT = 1.0\nh = 0.5\nn_obs = 1\nM = 2\n"
                 "nonlinearity = linear\nnonlinearity_c = 1e300\n")
    assert main(["strong-rate", "--config", str(p), "--out", str(tmp_path)]) == 3


def test_weak_rate_flags_linear_pairing(tmp_path, cfg_path):
    p = tmp_path / "lin.cfg"
    p.write_text(SMALL + "functional = linear-pairing\n")
    assert main(["weak-rate", "--config", str(p), "--out", str(tmp_path)]) == 0
    assert "outside" in (tmp_path / "weak_rate_report.txt").read_text()
    assert "outside" in (tmp_path / "weak_rate.csv").read_text()


def test_workers_env_fallback(cfg_path, tmp_path, monkeypatch):
    monkeypatch.setenv("SKRATES_WORKERS", "2")
    out = tmp_path / "o"
    assert main(["propagator-table", "--config", str(cfg_path), "--out", str(out)]) == 0
    assert json.loads((out / "propagator_table_manifest.json").read_text())["workers"] == 2


def test_byte_identical_across_workers(cfg_path, tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["strong-rate", "--config", str(cfg_path), "--out", str(a), "--workers", "1"]) == 0
    assert main(["strong-rate", "--config", str(cfg_path), "--out", str(b), "--workers", "4"]) == 0
    assert (a / "strong_rate.csv").read_bytes() == (b / "strong_rate.csv").read_bytes()


def test_console_script_entry_point(tmp_path):
    r = subprocess.run([sys.executable, "-m", "skrates.cli", "lemma-check", "--out", str(tmp_path)],
                       capture_output=True, text=True)
    assert r.returncode == 0, r.stderr
