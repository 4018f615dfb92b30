import math

import numpy as np
import pytest

from dobwind import cli
from dobwind.config import ENV_VAR, Config, dump_config, load_config, parse_config
from dobwind.errors import ParseError
from dobwind.telemetry import parse_estimates, parse_telemetry

QUICK = """
tunnel_speeds = 0,2,4,6,8
tunnel_yaw_step_deg = 45
tunnel_dwell_s = 4
ramp_s = 10
ramp_peak = 6
"""


@pytest.fixture
def quick_cfg(tmp_path):
    path = tmp_path / "quick.cfg"
    path.write_text(QUICK)
    return str(path)


def test_default_file_matches_builtin_defaults():
    assert load_config("configs/default.cfg") == Config()


def test_parse_config_types_and_errors():
    cfg = parse_config("mass_kg = 2.5  # light\nclean_k=7\nyaw_source = fixed\n")
    assert cfg.mass_kg == 2.5 and cfg.clean_k == 7 and cfg.yaw_source == "fixed"
    with pytest.raises(ParseError, match="unknown key"):
        parse_config("mas_kg = 2\n")
    with pytest.raises(ParseError, match="line 2"):
        parse_config("seed = 1\nseed = one\n")
    with pytest.raises(ParseError):
        parse_config("just words\n")
    with pytest.raises(ParseError):
        parse_config("mass_kg = nan\n")
    assert parse_config(dump_config(cfg)) == cfg


def test_env_var_config(tmp_path, monkeypatch):
    path = tmp_path / "env.cfg"
    path.write_text("noise_sigma = 0.25\n")
    monkeypatch.setenv(ENV_VAR, str(path))
    assert load_config().noise_sigma == 0.25
    assert load_config("configs/default.cfg").noise_sigma == 0.5
    monkeypatch.delenv(ENV_VAR)
    assert load_config() == Config()


def test_config_builds_objects():
    cfg = parse_config("observer_tau_s = 0.5\nairframe = constant\ndrag_coeff = 0.3\n")
    p = cfg.params()
    assert p.observer_gain[0] == pytest.approx(2 * 8.0 / 0.5)
    assert cfg.drag_model().coefficient(1.0) == pytest.approx(0.3)
    assert len(Config().tunnel_protocol().cells()) == 324
    with pytest.raises(ParseError):
        parse_config("airframe = brick\n").drag_model()


def test_usage_errors_exit_1(capsys):
    assert cli.main([]) == 1
    assert cli.main(["bogus"]) == 1
    assert cli.main(["estimate", "--model", "m.txt"]) == 1
    assert cli.main(["simulate", "--scenario", "space", "--out", "x"]) == 1
    assert cli.main(["--config", "/nonexistent/file.cfg", "simulate", "--out", "x"]) == 1


def test_default_simulate_has_324_cells(tmp_path):
    cfg = tmp_path / "c.cfg"
    cfg.write_text("tunnel_dwell_s = 0.02\n")
    out = tmp_path / "t.csv"
    assert cli.main(["--config", str(cfg), "simulate", "--out", str(out)]) == 0
    log = parse_telemetry(out)
    assert log.meta["cells"] == "324"
    assert len(log) == 324 * 2


def test_estimate_empty_log_exit_2(tmp_path, capsys):
    model = tmp_path / "m.txt"
    model.write_text("c0=0\nc_m=0\nc_n=0\nc_mm=0.09\nc_nn=0.07\n")
    empty = tmp_path / "empty.csv"
    empty.write_text("")
    assert cli.main(["estimate", "--model", str(model), "--log", str(empty), "--out", str(tmp_path / "e.csv")]) == 2
    assert "no samples" in capsys.readouterr().err


def test_missing_model_exit_2(tmp_path, capsys):
    log = tmp_path / "l.csv"
    log.write_text("t,px,py,pz,vx,vy,vz,ax,ay,az,roll,pitch,yaw,omega1,omega2,omega3,omega4\n"
                   "0,0,0,0,0,0,0,0,0,0,0,0,0,0.28,0.28,0.28,0.28\n")
    assert cli.main(["estimate", "--model", str(tmp_path / "none.txt"), "--log", str(log),
                     "--out", str(tmp_path / "e.csv")]) == 2
    assert "model file not found" in capsys.readouterr().err


def test_malformed_log_exit_2(tmp_path, capsys):
    bad = tmp_path / "bad.csv"
    bad.write_text("t,px\n1,2\n")
    assert cli.main(["calibrate", "--tunnel", str(bad), "--out", str(tmp_path / "m.txt")]) == 2


def test_full_workflow(tmp_path, quick_cfg, capsys):
    d = tmp_path
    base = ["--config", quick_cfg, "--seed", "4"]
    assert cli.main(base + ["simulate", "--out", str(d / "tun.csv")]) == 0
    assert cli.main(base + ["simulate", "--scenario", "vertical", "--out", str(d / "vert.csv")]) == 0
    assert cli.main(base + ["simulate", "--scenario", "ramp", "--out", str(d / "ramp.csv")]) == 0
    assert cli.main(base + ["calibrate", "--tunnel", str(d / "tun.csv"), "--vertical", str(d / "vert.csv"),
                            "--out", str(d / "m.txt")]) == 0
    assert cli.main(base + ["estimate", "--model", str(d / "m.txt"), "--log", str(d / "ramp.csv"),
                            "--out", str(d / "est.csv")]) == 0
    assert cli.main(base + ["evaluate", "--estimates", str(d / "est.csv"), "--truth", str(d / "ramp.csv"),
                            "--out", str(d / "rep.csv"), "--text", str(d / "rep.txt")]) == 0
    est = parse_estimates(d / "est.csv")
    assert len(est) == len(parse_telemetry(d / "ramp.csv"))
    text = (d / "rep.txt").read_text()
    assert "mean_speed_error_mps" in text and "0.11" in text
    mean = dict(line.split(",")[1:3] for line in (d / "rep.csv").read_text().splitlines()[1:5])
    assert float(mean["mean_speed_error_mps"]) < 0.3


def test_evaluate_self_is_zero(tmp_path, quick_cfg, capsys):
    log = tmp_path / "ramp.csv"
    assert cli.main(["--config", quick_cfg, "simulate", "--scenario", "ramp", "--out", str(log)]) == 0
    capsys.readouterr()
    assert cli.main(["evaluate", "--estimates", str(log), "--truth", str(log)]) == 0
    out = capsys.readouterr().out
    for key in ("mean_speed_error_mps", "max_speed_error_mps", "mean_angle_error_deg", "max_angle_error_deg"):
        line = next(l for l in out.splitlines() if l.startswith(key))
        assert float(line.split()[1]) == 0.0


def test_from_convention_in_estimates(tmp_path, quick_cfg):
    d = tmp_path
    cfg = d / "from.cfg"
    cfg.write_text(QUICK + "direction_convention = from\n")
    base = ["--config", str(cfg)]
    assert cli.main(base + ["simulate", "--out", str(d / "tun.csv")]) == 0
    assert cli.main(base + ["simulate", "--scenario", "ramp", "--out", str(d / "ramp.csv")]) == 0
    assert cli.main(base + ["calibrate", "--tunnel", str(d / "tun.csv"), "--out", str(d / "m.txt")]) == 0
    assert cli.main(base + ["estimate", "--model", str(d / "m.txt"), "--log", str(d / "ramp.csv"),
                            "--out", str(d / "est.csv")]) == 0
    est = parse_estimates(d / "est.csv")
    assert est.meta["direction_convention"] == "from"
    late = est.vwh > 3
    # the ramp blows toward 65 deg, reported as coming from 245 deg
    rows = [l for l in (d / "est.csv").read_text().splitlines() if not l.startswith("#")][1:]
    raw = np.array([float(r.split(",")[6]) for r in rows])
    assert abs(np.median(raw[late]) - 245.0) < 3.0
    np.testing.assert_allclose(np.median(est.theta[late]), math.radians(65), atol=0.05)
