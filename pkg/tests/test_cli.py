"""End-to-end command-line behavior: artifacts, exit codes, overrides."""

import json
import subprocess

import pytest

import factmech
from factmech.harness.cli import main

BASE = """\
[constants]
noise_scale = 2.0
ir_margin = 1.0
num_agents = {n}

[agents]
true_cost = 1.024e-7

[cost_dist]
kind = "gaussian-around-true-cost"

[monte_carlo]
trials = 2000
seed = {seed}
"""

TRAIN = """
[train]
rounds = 6
local_steps = 1
epochs = 10
step_size = 0.1
dimension = 4
noise_variance = 20.0
lipschitz = 1.0
curvature_min = 0.25
"""


@pytest.fixture
def cfg_file(tmp_path):
    path = tmp_path / "scenario.toml"
    path.write_text(BASE.format(n=4, seed=99) + TRAIN)
    return str(path)


def test_verify_command(tmp_path, capsys):
    cfg = tmp_path / "v.toml"
    cfg.write_text(BASE.format(n=16, seed=5))
    code = main(["verify", "--config", str(cfg), "--out", str(tmp_path / "out")])
    assert code == 0
    out = capsys.readouterr().out
    assert out.count("[PASS]") == 15
    assert "[FAIL]" not in out
    assert "15/15 checks passed" in out
    report = json.loads((tmp_path / "out" / "verify.json").read_text())
    assert report["passed"] is True
    assert len(report["checks"]) == 15
    assert report["artifact_version"] == factmech.__version__


def test_verify_negative_control(tmp_path, capsys):
    cfg = tmp_path / "bad.toml"
    cfg.write_text(BASE.format(n=16, seed=5)
                   + "\n[debug]\npenalty_scale_factor = 4.0\n")
    code = main(["verify", "--config", str(cfg), "--out", str(tmp_path / "out")])
    assert code == 1
    out = capsys.readouterr().out
    assert "[FAIL] ir-gap-identity" in out
    report = json.loads((tmp_path / "out" / "verify.json").read_text())
    assert report["passed"] is False


def test_missing_config_is_a_usage_error(tmp_path, capsys):
    code = main(["sweep", "--config", str(tmp_path / "absent.toml")])
    assert code == 2
    assert "configuration error" in capsys.readouterr().err


def test_invalid_config_value(tmp_path, capsys):
    cfg = tmp_path / "bad.toml"
    cfg.write_text(BASE.format(n=4, seed=1).replace("ir_margin = 1.0",
                                                    "ir_margin = 2.0"))
    assert main(["sweep", "--config", str(cfg)]) == 2
    assert "ir_margin" in capsys.readouterr().err


def test_sweep_command(cfg_file, tmp_path, capsys):
    out = tmp_path / "out"
    code = main(["sweep", "--config", cfg_file, "--out", str(out), "--svg"])
    assert code == 0
    text = (out / "sweep.csv").read_text()
    assert text.splitlines()[-22].startswith("misreport_pct,")  # 21 rows follow
    assert "# seed: 99" in text
    assert (out / "sweep.svg").read_text().startswith("<svg")
    stdout = capsys.readouterr().out
    assert "peak mean net improvement" in stdout


def test_overrides_recorded_in_artifact(cfg_file, tmp_path):
    out = tmp_path / "out"
    main(["sweep", "--config", cfg_file, "--out", str(out),
          "--seed", "123", "--trials", "500"])
    text = (out / "sweep.csv").read_text()
    assert "# seed: 123" in text
    assert "# trials: 500" in text


def test_paper_scale_override(cfg_file, tmp_path):
    out = tmp_path / "out"
    main(["sweep", "--config", cfg_file, "--out", str(out), "--paper-scale"])
    assert "# trials: 100000" in (out / "sweep.csv").read_text()


def test_penalty_curve_command(cfg_file, tmp_path, capsys):
    out = tmp_path / "out"
    assert main(["penalty-curve", "--config", cfg_file, "--out", str(out)]) == 0
    assert (out / "penalty_curve.csv").exists()
    assert "minimized at m" in capsys.readouterr().out


def test_compare_command(cfg_file, tmp_path, capsys):
    out = tmp_path / "out"
    assert main(["compare", "--config", cfg_file, "--out", str(out), "--svg"]) == 0
    lines = (out / "compare.csv").read_text().splitlines()
    data = [l for l in lines if not l.startswith("#")][1:]
    assert len(data) == 5  # four agents plus the aggregate row
    assert data[-1].startswith("-1.0,")
    assert "mechanism" in capsys.readouterr().out
    assert (out / "compare.svg").exists()


def test_train_command_worker_invariant(cfg_file, tmp_path, capsys):
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["train", "--config", cfg_file, "--out", str(a)]) == 0
    assert main(["train", "--config", cfg_file, "--out", str(b),
                 "--workers", "4"]) == 0
    assert (a / "train.csv").read_bytes() == (b / "train.csv").read_bytes()
    assert (a / "train_report.json").read_bytes() == \
        (b / "train_report.json").read_bytes()
    assert "trained 6 rounds" in capsys.readouterr().out


def test_train_svg(cfg_file, tmp_path):
    out = tmp_path / "out"
    main(["train", "--config", cfg_file, "--out", str(out), "--svg"])
    assert (out / "train.svg").read_text().startswith("<svg")


def test_train_workers_validated(cfg_file, capsys):
    assert main(["train", "--config", cfg_file, "--workers", "0"]) == 2
    assert "--workers" in capsys.readouterr().err


def test_subcommand_required():
    with pytest.raises(SystemExit):
        main([])


def test_console_script_wired_up():
    proc = subprocess.run(["factmech", "--help"], capture_output=True, text=True)
    assert proc.returncode == 0
    assert "verify" in proc.stdout
