import csv
import io
import subprocess
import sys

import pytest

from rfconc.cli import build_parser, main

SMALL = """\
activation = "poly5"
lambda_grid = [0.1, 1.0]
N_grid = [64, 128, 256]
trials = 2
B = 2
M = 20
metrics = ["train", "loocv", "gcv", "test"]

[data]
dist = "sphere"
d = 16
n = 12

[teacher]
tau = "softplus"
sigma_eps = 0.3
"""


def run(argv):
    out = io.StringIO()
    code = main(argv, out=out)
    return code, out.getvalue()


def test_hermite_csv_rows():
    code, text = run(["hermite", "--activation", "relu", "--max-degree", "4", "--format", "csv"])
    assert code == 0
    rows = list(csv.DictReader(io.StringIO(text)))
    assert len(rows) == 5
    assert list(rows[0]) == ["k", "zeta", "cumulative_sq", "tail_mass", "l2_norm_sq", "l4_norm"]
    assert float(rows[1]["zeta"]) == pytest.approx(0.5, abs=1e-9)


def test_hermite_table():
    code, text = run(["hermite", "--activation", "poly5", "--max-degree", "5"])
    assert code == 0
    assert "l2_norm_sq  2" in text


def test_gen_and_profile(tmp_path):
    path = tmp_path / "x.csv"
    assert run(["gen", "--dist", "sphere", "--d", "300", "--n", "20", "--seed", "1", "--out", str(path)])[0] == 0
    assert len(path.read_text().splitlines()) == 20
    code, text = run(["profile", "--data", str(path), "--activation", "relu", "--max-ell", "3"])
    assert code == 0
    assert "eps_n" in text and "chosen_ell" in text
    code, text = run(["profile", "--data", str(path)])
    assert code == 0 and "delta" in text


def test_compare_is_deterministic():
    argv = ["compare", "--dist", "sphere", "--d", "32", "--n", "24", "--activation", "poly5", "--tau", "softplus",
            "--N", "512", "--lambda", "0.1", "--seed", "7", "--M", "50"]
    code, first = run(argv)
    assert code == 0
    assert run(argv)[1] == first
    header = first.splitlines()[0].split()
    assert header == ["metric", "RFRR", "KRR", "PKRR", "|RFRR-KRR|", "|KRR-PKRR|"]
    assert [line.split()[0] for line in first.splitlines()[1:]] == ["train", "loocv", "gcv", "test"]


def test_compare_zero_lambda_skips_gcv(capsys):
    code, text = run(["compare", "--d", "16", "--n", "8", "--N", "64", "--lambda", "0", "--M", "10"])
    assert code == 0
    assert "gcv" not in text
    assert "gcv skipped" in capsys.readouterr().err


def test_sweep_and_report(tmp_path, monkeypatch):
    cfg = tmp_path / "c.toml"
    cfg.write_text(SMALL)
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert run(["sweep", "--config", str(cfg), "--out", str(a), "--threads", "1"])[0] == 0
    monkeypatch.setenv("RFCONC_THREADS", "3")
    assert run(["sweep", "--config", str(cfg), "--out", str(b)])[0] == 0
    assert a.read_bytes() == b.read_bytes()
    code, text = run(["report", "--in", str(a)])
    assert code in (0, 2)
    assert text.splitlines()[0].split() == ["metric", "lambda", "slope", "intercept", "result"]
    assert len(text.splitlines()) == 1 + 4 * 2


def test_sweep_missing_config_names_path(capsys, tmp_path):
    code, _ = run(["sweep", "--config", "missing.toml", "--out", str(tmp_path / "o.csv")])
    assert code == 1
    assert "missing.toml" in capsys.readouterr().err


def test_invalid_config_is_usage_error(capsys, tmp_path):
    cfg = tmp_path / "bad.toml"
    cfg.write_text(SMALL.replace("[0.1, 1.0]", "[0.0, 1.0]"))
    code, _ = run(["sweep", "--config", str(cfg), "--out", str(tmp_path / "o.csv")])
    assert code == 1
    assert "line 2" in capsys.readouterr().err


def test_runtime_error_exit_code(capsys, tmp_path):
    bad = tmp_path / "bad.csv"
    bad.write_text("1,2\nx,3\n")
    code, _ = run(["profile", "--data", str(bad)])
    assert code == 2
    assert "ParseError" in capsys.readouterr().err


@pytest.mark.parametrize("argv", [
    [],
    ["frobnicate"],
    ["hermite", "--activation", "relu", "--unknown-flag"],
    ["gen", "--dist", "ball", "--d", "2", "--n", "2", "--out", "x"],
    ["compare", "--d", "0", "--n", "2", "--N", "4", "--lambda", "0.1"],
])
def test_usage_errors_exit_one(argv):
    assert run(argv)[0] == 1


@pytest.mark.parametrize("sub", ["gen", "profile", "hermite", "compare", "sweep", "report"])
def test_help_documents_every_flag(sub, capsys):
    assert run([sub, "--help"])[0] == 0
    text = capsys.readouterr().out
    parser = build_parser()
    subparser = parser._subparsers._group_actions[0].choices[sub]
    for action in subparser._actions:
        for flag in action.option_strings:
            assert flag in text
        if action.option_strings and action.dest != "help":
            assert action.help


def test_console_script_entry_point():
    out = subprocess.run([sys.executable, "-m", "rfconc.cli", "hermite", "--activation", "identity",
                          "--max-degree", "2", "--format", "csv"], capture_output=True, text=True)
    assert out.returncode == 0
    assert len(out.stdout.splitlines()) == 4
