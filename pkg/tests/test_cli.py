import json
import subprocess
import sys

import pytest

from pnrkit.cli import main

SMALL = """
[simulate]
pulses = 60000
seed = 5

[iat]
events = 20000
lk_values_nH = [165.0]

[sweep]
dt_values_ps = [10.0, 30.0, 60.0]
jitter_values_ps = [10.0, 30.0]
lk_values_nH = [100.0, 1000.0]

[report]
histogram_pulses = 60000
histogram_mu_values = [1.46]
"""


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_quality_far_apart(capsys):
    code, out, _ = run(capsys, "quality", "--mu", "1.5", "--dt", "500", "--sigma1", "5")
    assert code == 0
    doc = json.loads(out)
    assert all(q > 0.999 for q in doc["diagonal"])


def test_jitter_sweep_table(capsys):
    code, out, _ = run(capsys, "sweep", "--axis", "jitter", "--dt", "47", "--mu", "1.5",
                       "--values", "10", "30", "60")
    assert code == 0
    lines = out.splitlines()
    assert lines[0] == "jitter_fwhm_ps,Q_1,Q_2,Q_3,Q_4"
    row = [float(x) for x in lines[1].split(",")]
    assert row[0] == 10.0 and all(q > 0.99 for q in row[1:])


def test_min_lk_comment(capsys):
    code, out, _ = run(capsys, "sweep", "--axis", "lk", "--values", "200", "2000", "--min-lk")
    assert code == 0
    assert "# min_lk n=1" in out


def test_error_line_and_exit_code(capsys):
    code, _, err = run(capsys, "quality", "--mu", "-1")
    assert code == 2
    doc = json.loads(err.strip().splitlines()[-1])
    assert set(doc) == {"error", "message", "details"}
    assert doc["error"] == "DomainError"


def test_config_errors_listed(tmp_path, capsys):
    cfg = tmp_path / "bad.toml"
    cfg.write_text("[model]\nmu_eff = -2\nbogus = 1\n")
    code, _, err = run(capsys, "--config", str(cfg), "quality")
    assert code == 2
    doc = json.loads(err.strip().splitlines()[-1])
    assert doc["error"] == "ConfigError" and len(doc["details"]) == 2


def test_missing_file(capsys):
    code, _, err = run(capsys, "fit", "/nonexistent/file.json")
    assert code == 2
    assert json.loads(err.strip().splitlines()[-1])["error"] == "FileNotFoundError"


def test_simulate_fit_pipe():
    sim = subprocess.run([sys.executable, "-m", "pnrkit.cli", "simulate", "--mu", "1.5", "--dt", "47",
                          "--jitter-fwhm", "33", "--pulses", "200000", "--seed", "3"],
                         capture_output=True, text=True, check=True)
    fit = subprocess.run([sys.executable, "-m", "pnrkit.cli", "fit", "--constrained"],
                         input=sim.stdout, capture_output=True, text=True, check=True)
    doc = json.loads(fit.stdout)
    assert abs(doc["delta_t12_ps"] - 47.0) <= 2.0
    assert abs(doc["photon_statistics"]["mu_eff"] - 1.5) < 0.05


@pytest.mark.parametrize("fmt", ["samples", "timetags"])
def test_fit_reads_text_formats(tmp_path, capsys, fmt):
    path = tmp_path / f"data.{fmt}"
    assert main(["simulate", "--pulses", "100000", "--seed", "8", "--format", fmt, "-o", str(path)]) == 0
    code, out, _ = run(capsys, "fit", str(path))
    assert code == 0
    assert abs(json.loads(out)["delta_t12_ps"] - 47.0) <= 3.0


def test_simulate_is_seeded(tmp_path, capsys):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    main(["simulate", "--pulses", "5000", "--seed", "11", "-o", str(a)])
    main(["simulate", "--pulses", "5000", "--seed", "11", "--workers", "3", "-o", str(b)])
    assert a.read_bytes() == b.read_bytes()


def test_unseeded_logs_seed(capsys, caplog):
    code, _, _ = run(capsys, "simulate", "--pulses", "1000")
    assert code == 0 and "no --seed given" in caplog.text


def test_iat_dead_time(capsys):
    code, out, _ = run(capsys, "iat", "--dead-time", "20", "--events", "50000", "--seed", "2")
    assert code == 0
    assert 15.0 < json.loads(out)["tau_rec_ns"] < 35.0


def test_report_env_dir_and_determinism(tmp_path, monkeypatch, capsys):
    cfg = tmp_path / "small.toml"
    cfg.write_text(SMALL)
    first, second = tmp_path / "r1", tmp_path / "r2"
    monkeypatch.setenv("PNRKIT_OUTPUT_DIR", str(first))
    assert main(["--config", str(cfg), "report", "--no-timestamps", "--only", "fig2b", "fig4"]) == 0
    monkeypatch.setenv("PNRKIT_OUTPUT_DIR", str(second))
    assert main(["--config", str(cfg), "report", "--no-timestamps", "--only", "fig2b", "fig4"]) == 0
    files = sorted(p.name for p in first.iterdir())
    assert "manifest.json" in files and any(f.endswith(".svg") for f in files)
    assert files == sorted(p.name for p in second.iterdir())
    for name in files:
        assert (first / name).read_bytes() == (second / name).read_bytes(), name
    assert "generated_at" not in json.loads((first / "manifest.json").read_text())
