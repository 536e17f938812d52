from __future__ import annotations

import csv
import io
import json
import math

import pytest

from lpflow.cli import main
from lpflow.config import ConfigError, parse_config


def _tiny_config(tmp_path, **sim):
    cfg = {
        "grid": {"N": 256, "L": 16 * math.pi},
        "counterexample": {"variant": "GRID-ADAPTED", "k_max": 3},
        "simulation": {"T1": 0.04, "steps": 8, "norm_cadence": 4, **sim},
    }
    p = tmp_path / "run.json"
    p.write_text(json.dumps(cfg))
    return str(p)


class TestConfig:
    def test_defaults(self):
        cfg = parse_config("{}")
        assert cfg.grid.N == 2048
        assert cfg.make_spec().k_max == 5
        assert cfg.make_grid().dxi == pytest.approx(0.125)

    def test_bad_json_location(self):
        with pytest.raises(ConfigError, match="line 1"):
            parse_config("{bad")

    def test_unknown_key(self):
        with pytest.raises(ConfigError, match="grid.M"):
            parse_config('{"grid": {"M": 3}}')

    def test_non_power_of_two(self):
        with pytest.raises(ConfigError, match="power of two"):
            parse_config('{"grid": {"N": 1000}}')

    def test_dt_sets_steps(self):
        cfg = parse_config('{"simulation": {"T1": 0.1, "dt": 0.025}}')
        assert cfg.simulation.steps == 4

    def test_dt_must_divide(self):
        with pytest.raises(ConfigError):
            parse_config('{"simulation": {"T1": 0.1, "dt": 0.03}}')

    def test_faithful_overrides(self):
        spec = parse_config('{"counterexample": {"variant": "FAITHFUL", "k_max": 4}}').make_spec()
        assert spec.rho == pytest.approx(1 / 32) and spec.k_max == 4


class TestExitCodes:
    def test_help(self, capsys):
        assert main(["--help"]) == 0

    def test_unknown_command(self, capsys):
        assert main(["explode"]) == 2

    def test_missing_config(self, tmp_path, capsys):
        assert main(["build", "--config", str(tmp_path / "nope.json")]) == 2
        assert "cannot read config" in capsys.readouterr().err

    def test_invalid_config(self, tmp_path, capsys):
        p = tmp_path / "c.json"
        p.write_text('{"grid": {"N": 3}}')
        assert main(["build", "--config", str(p)]) == 2

    def test_bad_threads(self, capsys):
        assert main(["build", "--threads", "0"]) == 2

    def test_unknown_suite(self, tmp_path, capsys):
        assert main(["verify", "--config", _tiny_config(tmp_path), "--suite", "nonsense", "--out", str(tmp_path)]) == 2

    def test_short_sweep(self, tmp_path, capsys):
        args = ["simulate", "--config", _tiny_config(tmp_path), "--kmax-sweep", "3,4", "--out", str(tmp_path)]
        assert main(args) == 2

    def test_analyze_missing(self, tmp_path, capsys):
        assert main(["analyze", str(tmp_path / "none")]) == 1


class TestBuild:
    def test_grid_adapted(self, tmp_path, capsys):
        out = tmp_path / "b"
        assert main(["build", "--config", _tiny_config(tmp_path), "--out", str(out)]) == 0
        for name in ("alpha.sparse.json", "low_bump.sparse.json", "u0.lpf1", "u0.meta.json", "norms.json"):
            assert (out / name).exists(), name
        rep = json.loads((out / "norms.json").read_text())
        assert rep["F"] > 0

    def test_faithful_warns(self, tmp_path, caplog):
        p = tmp_path / "f.json"
        p.write_text('{"grid": {"N": 256}, "counterexample": {"variant": "FAITHFUL"}}')
        out = tmp_path / "f"
        assert main(["build", "--config", str(p), "--out", str(out)]) == 0
        assert "unresolved" in caplog.text
        assert (out / "alpha.sparse.json").exists()
        assert not (out / "u0.lpf1").exists()

    def test_out_dir_from_environment(self, tmp_path, monkeypatch, capsys):
        monkeypatch.setenv("LP_OUT_DIR", str(tmp_path / "env"))
        assert main(["build", "--config", _tiny_config(tmp_path)]) == 0
        assert (tmp_path / "env" / "u0.lpf1").exists()


@pytest.fixture(scope="module")
def run_dir(tmp_path_factory):
    tmp = tmp_path_factory.mktemp("pipe")
    out = tmp / "run"
    cfg = _tiny_config(tmp, steps=8, t_star_fraction=0.5)
    assert main(["simulate", "--config", cfg, "--out", str(out), "--kmax-sweep", "1,2,3"]) == 0
    return out, cfg


class TestPipeline:
    def test_simulate_outputs(self, run_dir):
        out, _ = run_dir
        for name in ("trace.csv", "summary.json", "trace.json", "final.lpf1"):
            assert (out / name).exists()
        assert (out / "kmax1" / "trace.json").exists() and (out / "kmax2" / "trace.json").exists()
        rows = list(csv.reader(io.StringIO((out / "trace.csv").read_text())))
        assert len(rows) == 1 + 9

    def test_analyze(self, run_dir, capsys):
        out, cfg = run_dir
        assert main(["analyze", "--config", cfg, str(out)]) == 0
        inf = json.loads((out / "inflation.json").read_text())
        assert "sigma" in inf
        disc = json.loads((out / "discontinuity.json").read_text())
        assert set(disc["D"]) == {"1", "2", "3"}
        cont = json.loads((out / "continuity.json").read_text())
        assert "refinement_jumps" in cont

    def test_plot_deterministic(self, run_dir, tmp_path, capsys):
        out, cfg = run_dir
        a, b = tmp_path / "a", tmp_path / "b"
        assert main(["plot", "--config", cfg, str(out), "--out", str(a)]) == 0
        assert main(["plot", "--config", cfg, str(out), "--out", str(b)]) == 0
        for name in ("g_family.svg", "norm_traces.svg"):
            assert (a / name).read_bytes() == (b / name).read_bytes()

    def test_zero_horizon_single_row(self, tmp_path, capsys):
        out = tmp_path / "z"
        assert main(["simulate", "--config", _tiny_config(tmp_path, T1=0.0), "--out", str(out)]) == 0
        rows = list(csv.reader(io.StringIO((out / "trace.csv").read_text())))
        assert len(rows) == 2
        assert float(rows[1][0]) == 0.0
