import os
from dataclasses import replace

import numpy as np
import pytest

from qia_sim import cli, experiments, qcore
from qia_sim.experiments import ConfigError, ExperimentConfig


def test_verify_passes(capsys):
    assert cli.main(["verify"]) == 0
    out = capsys.readouterr().out
    assert out.count("PASS") == 4 and "FAIL" not in out


def test_verify_reports_fault(monkeypatch, capsys):
    bad = dict(qcore.BELL_VECTORS)
    bad["01"] = np.array([1, 0, 0, 1]) / np.sqrt(2)
    real = experiments.verify_checks
    monkeypatch.setattr(experiments, "verify_checks", lambda: real(bell_vectors=bad))
    assert cli.main(["verify"]) == 3
    assert "FAIL  rearranged five-particle state" in capsys.readouterr().out


@pytest.mark.parametrize("argv", [
    ["run", "--protocol", "4"],
    ["run", "--attack", "teleport"],
    ["run", "--protocol", "1", "--attack", "ancilla-forge"],
    ["run", "--protocol", "3", "--attack", "ancilla-forge", "--coeffs", "1,1,0,0"],
    ["run", "--trials", "0"],
    ["run", "--qber-threshold", "2"],
    ["nonsense"],
])
def test_config_errors(argv):
    assert cli.main(argv) == 1


def test_io_error(tmp_path):
    assert cli.main(["run", "--trials", "5", "--out", str(tmp_path / "missing" / "x.csv")]) == 2


def test_deterministic_csv_is_byte_identical(tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    for p in (a, b):
        assert cli.main(["run", "--protocol", "2", "--attack", "measure-resend", "--n", "2", "--trials", "300",
                         "--seed", "5", "--out", str(p), "--deterministic"]) == 0
    assert a.read_bytes() == b.read_bytes()
    lines = a.read_text().splitlines()
    assert lines[0] == ",".join(experiments.CSV_FIELDS)
    assert b"\r" not in a.read_bytes()


def test_timestamp_line_without_deterministic(tmp_path):
    p = tmp_path / "t.csv"
    assert cli.main(["run", "--trials", "20", "--out", str(p)]) == 0
    assert p.read_text().startswith("# generated ")
    assert cli.main(["run", "--trials", "20", "--out", str(p)]) == 0
    assert len(p.read_text().splitlines()) == 4  # stamp, header, two rows


def test_config_precedence(tmp_path, capsys):
    cfg = tmp_path / "exp.cfg"
    cfg.write_text("# sample\nprotocol = 2\nattack = measure-resend\nn = 2\ntrials = 40\n")
    assert cli.main(["run", "--config", str(cfg), "--n", "1"]) == 0
    out = capsys.readouterr().out
    assert "protocol 2 attack measure-resend n=1: " in out and "/40 detected" in out


def test_config_file_errors(tmp_path):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("protocol 2\n")
    assert cli.main(["run", "--config", str(cfg)]) == 1
    cfg.write_text("colour = blue\n")
    assert cli.main(["run", "--config", str(cfg)]) == 1
    cfg.write_text("trials = many\n")
    assert cli.main(["run", "--config", str(cfg)]) == 1
    assert cli.main(["run", "--config", str(tmp_path / "absent.cfg")]) == 2


def test_curve_writes_csv_and_svg(tmp_path):
    out = tmp_path / "c.csv"
    assert cli.main(["curve", "--protocol", "3", "--attack", "impersonation", "--n-min", "1", "--n-max", "3",
                     "--trials", "50", "--out", str(out), "--deterministic"]) == 0
    rows = out.read_text().splitlines()
    assert len(rows) == 4
    svg = out.with_suffix(".svg").read_text()
    assert svg.startswith("<svg") and svg.count("<circle") == 4 and "closed form" in svg


def test_key_size(capsys):
    assert cli.main(["key-size"]) == 0
    out = capsys.readouterr().out
    assert "protocol 1: 6 bits" in out and "protocol 3: 6 bits" in out
    assert "protocol 2: 12 bits" in out and "not reproducible" in out


def test_info_tables(tmp_path, capsys):
    out = tmp_path / "info.csv"
    assert cli.main(["info-tables", "--samples", "20000", "--seed", "3", "--out", str(out)]) == 0
    text = out.read_text()
    assert text.count("\n") == 17
    assert "false" not in text


def test_worker_count_does_not_change_result():
    cfg = ExperimentConfig(protocol=1, attack="impersonation", n=2, trials=400, seed=11)
    assert experiments.count_detections(cfg, workers=1) == experiments.count_detections(cfg, workers=2)


def test_threads_env(monkeypatch):
    monkeypatch.setenv("QIA_SIM_THREADS", "1")
    assert experiments.worker_count() == 1
    monkeypatch.setenv("QIA_SIM_THREADS", "lots")
    with pytest.raises(ConfigError):
        experiments.worker_count()


def test_closed_form_column_agrees_with_analysis():
    from qia_sim import analysis

    for proto in (1, 2, 3):
        cfg = ExperimentConfig(protocol=proto, attack="impersonation", n=3, trials=10)
        assert experiments.run(cfg, workers=1).closed_form == analysis.detection_probability(proto, 3)
    cfg = ExperimentConfig(protocol=3, attack="ancilla-forge", n=2, trials=10)
    assert experiments.closed_form(cfg) == 1 - analysis.eve_success_p3(cfg.forge_coefficients()) ** 2
    cfg = replace(cfg, attack="measure-resend")
    assert experiments.closed_form(cfg) == analysis.exact_detection_probability(3, "measure-resend", 2)


def test_honest_runs_never_detect():
    for proto in (1, 2, 3):
        cfg = ExperimentConfig(protocol=proto, attack="none", n=3, trials=100)
        assert experiments.run(cfg, workers=1).detections == 0


def test_module_entry_point():
    import subprocess
    import sys

    r = subprocess.run([sys.executable, "-m", "qia_sim", "key-size"], capture_output=True, text=True,
                       env={**os.environ, "QIA_SIM_THREADS": "1"})
    assert r.returncode == 0 and "protocol 1" in r.stdout
