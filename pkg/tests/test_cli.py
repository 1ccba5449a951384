import subprocess
import sys

from semiblind.cli import main

PLAN = """
[system]
protocol = P1
M = 2
N = 4
N_r = 2
K = 2
I = 2
P = 2
T = 5
[receiver]
max_iters = 20
[experiment]
receiver = pf_tals
snr_grid = 5, 15
trials = 1
output = {out}
"""


def _write(tmp_path, text):
    path = tmp_path / "plan.ini"
    path.write_text(text)
    return str(path)


def test_run_writes_csv(tmp_path, capsys):
    out = tmp_path / "r.csv"
    assert main(["run", _write(tmp_path, PLAN.format(out=out))]) == 0
    assert capsys.readouterr().out.strip() == str(out)
    assert len(out.read_text().splitlines()) == 3


def test_run_override(tmp_path):
    out = tmp_path / "r.csv"
    plan = _write(tmp_path, PLAN.format(out=out))
    assert main(["run", plan, "--set", "experiment.trials=3", "--workers", "1"]) == 0
    assert len(out.read_text().splitlines()) == 7


def test_check_reports(tmp_path, capsys):
    assert main(["check", _write(tmp_path, PLAN.format(out="x.csv"))]) == 0
    text = capsys.readouterr().out
    assert "IMTP >= N_r*max(K,N)" in text and text.rstrip().endswith("identifiable")


def test_check_flags_violation(tmp_path, capsys):
    plan = _write(tmp_path, PLAN.format(out="x.csv"))
    assert main(["check", plan, "--set", "system.N_r=16", "--set", "system.I=1"]) == 1
    assert "NOT identifiable" in capsys.readouterr().out


def test_bad_config_exit_code(tmp_path, capsys):
    plan = _write(tmp_path, PLAN.format(out="x.csv").replace("M = 2", "M = 12"))
    assert main(["check", plan]) == 2
    assert "system.M" in capsys.readouterr().err


def test_missing_file_exit_code(tmp_path):
    assert main(["check", str(tmp_path / "nope.ini")]) == 3


def test_oracle_subcommand():
    proc = subprocess.run([sys.executable, "-m", "semiblind.cli", "oracle"],
                          capture_output=True, text=True)
    assert proc.returncode == 0
    lines = proc.stdout.splitlines()
    assert lines and all(l.startswith("PASS") for l in lines)
