import copy
import json

import pytest

from omegadiv.cli import _parse_betas, main
from omegadiv.config import EXAMPLE_CONFIG, parse_config
from omegadiv.errors import ConfigError


def write_cfg(tmp_path, **changes):
    raw = copy.deepcopy(EXAMPLE_CONFIG)
    for k, v in changes.items():
        raw[k] = v
    p = tmp_path / "run.json"
    p.write_text(json.dumps(raw))
    return p


def run(cmd, cfg, out, *extra):
    return main([cmd, "--config", str(cfg), "--out", str(out), *extra])


def test_example_parses():
    cfg = parse_config(EXAMPLE_CONFIG)
    m = cfg.levy_model()
    assert (m.mu, m.sigma, m.jump_intensity) == (0.075, 0.5, 0.5)
    assert cfg.bankruptcy_rate().breakpoints == [-1.0, 0.0]
    assert cfg.q == 0.025 and cfg.beta == 0.001


def test_unknown_key_rejected():
    raw = copy.deepcopy(EXAMPLE_CONFIG)
    raw["grid"] = {"h": 1e-3, "xmax": 10}
    with pytest.raises(ConfigError):
        parse_config(raw)


@pytest.mark.parametrize(
    "patch",
    [
        {"beta": 0.0},
        {"q": -1.0},
        {"omega": {"a": -1.0, "slope": -0.15}},
        {"omega": {"a": -1.0, "phi": 1.5, "slope": 0.2}},
        {"model": {"mu": 0.1, "sigma": 0.5, "jump_intensity": 1.0, "jump_mixture": [[0.5, 9.0]]}},
    ],
)
def test_invalid_configs(patch):
    raw = copy.deepcopy(EXAMPLE_CONFIG)
    raw.update(patch)
    with pytest.raises(ConfigError):
        parse_config(raw)


def test_overrides_and_hash():
    base = parse_config(EXAMPLE_CONFIG)
    cfg = parse_config(EXAMPLE_CONFIG, {"beta": 0.02, "grid.h": 5e-4, "simulation.seed": 3})
    assert cfg.beta == 0.02 and cfg.grid.h == 5e-4 and cfg.simulation.seed == 3
    assert cfg.config_hash() != base.config_hash()
    assert parse_config(EXAMPLE_CONFIG).config_hash() == base.config_hash()


def test_parse_betas():
    assert _parse_betas("0.001:0.003:0.001") == [0.001, 0.002, 0.003]
    assert _parse_betas("0.1,0.2") == [0.1, 0.2]


def test_solve(tmp_path):
    cfg = write_cfg(tmp_path)
    assert run("solve", cfg, tmp_path / "a") == 0
    rep = json.loads((tmp_path / "a" / "solve_report.json").read_text())
    assert rep["residual_sup"] < 1e-8 and rep["passed"]
    head = (tmp_path / "a" / "omega_scale.csv").read_text().splitlines()[0]
    assert head.startswith("#")
    assert run("solve", cfg, tmp_path / "b") == 0
    assert (tmp_path / "a" / "omega_scale.csv").read_bytes() == (tmp_path / "b" / "omega_scale.csv").read_bytes()


def test_solve_coarse_grid_exit_2(tmp_path):
    cfg = write_cfg(tmp_path)
    with pytest.warns(UserWarning):
        code = run("solve", cfg, tmp_path / "o", "--h", "0.1")
    assert code == 2
    assert not json.loads((tmp_path / "o" / "solve_report.json").read_text())["passed"]


def test_missing_phi_exit_1(tmp_path, capsys):
    cfg = write_cfg(tmp_path, omega={"a": -1.0, "slope": -0.15})
    assert run("solve", cfg, tmp_path / "o") == 1
    err = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
    assert err["exit_code"] == 1 and err["error"] == "ConfigError"


def test_bad_beta_exit_1(tmp_path):
    assert run("optimize", write_cfg(tmp_path), tmp_path / "o", "--beta", "-0.1") == 1


def test_optimize_interior(tmp_path):
    assert run("optimize", write_cfg(tmp_path), tmp_path) == 0
    opt = json.loads((tmp_path / "optimum.json").read_text())
    assert opt["case"] == "interior" and opt["c1_star"] > 0
    assert (tmp_path / "g1_curve.csv").exists() and (tmp_path / "g0_curve.csv").exists()


def test_optimize_beta_002_corner(tmp_path):
    assert run("optimize", write_cfg(tmp_path), tmp_path, "--beta", "0.02") == 0
    opt = json.loads((tmp_path / "optimum.json").read_text())
    assert opt["case"] == "corner_beta"
    assert opt["c1_star"] == 0.0


def test_value(tmp_path):
    assert run("value", write_cfg(tmp_path), tmp_path) == 0
    rep = json.loads((tmp_path / "value_report.json").read_text())
    assert rep["checks"]["passed"]
    assert rep["checks"]["c1_fit_residual"] < 1e-3
    assert (tmp_path / "value.csv").read_text().splitlines()[0].startswith("# ")


def test_simulate_deterministic(tmp_path):
    cfg = write_cfg(tmp_path)
    for d in ("a", "b"):
        assert run("simulate", cfg, tmp_path / d, "--paths", "600", "--seed", "5") in (0, 3)
    ra = json.loads((tmp_path / "a" / "mc_report.json").read_text())
    rb = json.loads((tmp_path / "b" / "mc_report.json").read_text())
    ra.pop("generated_at"), rb.pop("generated_at")
    assert ra == rb
    assert len(ra["results"]) == 5


def test_simulate_with_analytic(tmp_path):
    cfg = write_cfg(tmp_path)
    assert run("value", cfg, tmp_path) == 0
    assert run("simulate", cfg, tmp_path, "--paths", "1000") == 0
    rep = json.loads((tmp_path / "mc_report.json").read_text())
    assert all("z" in r for r in rep["results"])


def test_sweep_above_threshold_all_zero(tmp_path):
    assert run("sweep-beta", write_cfg(tmp_path), tmp_path, "--betas", "0.03,0.04,0.05") == 0
    lines = [l for l in (tmp_path / "beta_sweep.csv").read_text().splitlines() if not l.startswith("#")]
    assert lines[0] == "beta,c1,c2,case"
    assert all(float(l.split(",")[1]) == 0.0 for l in lines[1:])


def test_sweep_brackets_reported_threshold(tmp_path):
    assert run("sweep-beta", write_cfg(tmp_path), tmp_path, "--betas", "0.001:0.03:0.001") == 0
    s = json.loads((tmp_path / "beta_sweep.json").read_text())
    assert s["last_beta_interior"] < s["beta_max"] <= s["first_beta_corner"]
    assert s["first_beta_corner"] - s["last_beta_interior"] == pytest.approx(1e-3)
