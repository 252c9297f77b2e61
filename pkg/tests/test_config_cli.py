import json

import pytest

from formlearn import cli
from formlearn.config import ConfigError, builtin_config, load_scenario, validate_config


class TestValidation:
    def test_shipped_scenarios_self_validate(self):
        assert validate_config(builtin_config("paper_siv")) == []
        assert validate_config(builtin_config("synthetic_learning")) == []

    def test_negative_gain_eigenvalue_named(self):
        cfg = builtin_config("paper_siv")
        cfg["controller"]["H1"] = [[-1.0, 0, 0], [0, 900.0, 0], [0, 0, 1350.0]]
        errors = validate_config(cfg)
        assert any("H1" in e and "controller" in e for e in errors)

    def test_disconnected_topology_named(self):
        cfg = builtin_config("paper_siv")
        cfg["topology"]["edges"] = [[1, 2, 1.0], [3, 4, 1.0]]
        errors = validate_config(cfg)
        assert any("topology" in e and "reach" in e for e in errors)

    def test_errors_are_exhaustive_not_first_failure(self):
        cfg = builtin_config("paper_siv")
        cfg["controller"]["H1"] = [[-1.0, 0, 0], [0, 900.0, 0], [0, 0, 1350.0]]
        cfg["topology"]["edges"] = [[1, 2, 1.0], [3, 4, 1.0]]
        cfg["run"]["dt"] = -1.0
        errors = validate_config(cfg)
        assert len(errors) >= 3

    def test_dimension_cross_checks(self):
        cfg = builtin_config("paper_siv")
        cfg["rbf"]["bounds"] = [[-100, 100]] * 4  # grid dim != 2n
        assert any("2n" in e for e in validate_config(cfg))
        cfg = builtin_config("paper_siv")
        cfg["formation"]["offsets"] = [[0, 0, 0]] * 3
        assert any("offsets" in e for e in validate_config(cfg))

    def test_load_scenario_raises_with_error_list(self):
        cfg = builtin_config("paper_siv")
        del cfg["controller"]
        with pytest.raises(ConfigError) as ei:
            load_scenario(cfg)
        assert ei.value.errors

    def test_unknown_builtin_rejected(self):
        cfg = builtin_config("paper_siv")
        cfg["plant"] = {"builtin": "hovercraft"}
        assert any("plant" in e for e in validate_config(cfg))


class TestCli:
    def test_validate_ok(self, capsys):
        rc = cli.main(["validate", "--scenario", "paper_siv"])
        assert rc == 0
        assert "ok" in capsys.readouterr().out

    def test_validate_failure_exit_code(self, tmp_path, capsys):
        cfg = builtin_config("paper_siv")
        cfg["controller"]["H1"] = [[-1.0, 0, 0], [0, 1.0, 0], [0, 0, 1.0]]
        f = tmp_path / "bad.json"
        f.write_text(json.dumps(cfg))
        assert cli.main(["validate", "--config", str(f)]) == 2

    def test_missing_config_file_is_io_error(self):
        assert cli.main(["validate", "--config", "/nonexistent/x.json"]) == 4

    def test_run_tiny_and_analyze(self, tmp_path, capsys):
        rc = cli.main([
            "run", "--scenario", "synthetic_learning",
            "--override", "rbf.per_dim=2",
            "--override", "plant.wstar.indices=[0,63]",
            "--override", "run.t_end=1.0",
            "--override", "run.dt=0.01",
            "--override", "run.log_stride=10",
            "--out", str(tmp_path / "run"),
        ])
        assert rc == 0
        assert (tmp_path / "run" / "log.csv").exists()
        assert (tmp_path / "run" / "meta.json").exists()

        rc = cli.main(["analyze", "--run", str(tmp_path / "run")])
        assert rc == 0
        summary = json.loads((tmp_path / "run" / "metrics" / "summary.json").read_text())
        assert "verdicts" in summary
        assert (tmp_path / "run" / "metrics" / "tracking.csv").exists()

    def test_run_divergence_exit_code(self, tmp_path, capsys):
        rc = cli.main([
            "run", "--scenario", "paper_siv",
            "--override", "run.dt=0.001",  # integrator-unstable here
            "--override", "run.t_end=0.2",
            "--out", str(tmp_path / "div"),
        ])
        assert rc == 3
        assert (tmp_path / "div" / "log.csv").exists()  # partial log retained

    def test_analyze_missing_run_is_io_error(self, tmp_path):
        assert cli.main(["analyze", "--run", str(tmp_path / "nope")]) == 4

    def test_analyze_schema_mismatch(self, tmp_path):
        cli.main([
            "run", "--scenario", "synthetic_learning",
            "--override", "rbf.per_dim=2",
            "--override", "plant.wstar.indices=[0,63]",
            "--override", "run.t_end=0.05",
            "--override", "run.dt=0.01",
            "--out", str(tmp_path / "run"),
        ])
        meta = json.loads((tmp_path / "run" / "meta.json").read_text())
        meta["schema_version"] = 999
        (tmp_path / "run" / "meta.json").write_text(json.dumps(meta))
        assert cli.main(["analyze", "--run", str(tmp_path / "run")]) == 2

    def test_golden_capture_and_check(self, tmp_path):
        f = tmp_path / "golden.json"
        assert cli.main(["golden", "--scenario", "paper_siv", "--file", str(f)]) == 0
        assert cli.main(["golden", "--scenario", "paper_siv", "--file", str(f), "--check"]) == 0
        payload = json.loads(f.read_text())
        payload["derivative_head"][0] += 1.0
        f.write_text(json.dumps(payload))
        assert cli.main(["golden", "--scenario", "paper_siv", "--file", str(f), "--check"]) == 2

    def test_env_outdir_override(self, tmp_path, monkeypatch):
        monkeypatch.setenv("FORMLEARN_OUTDIR", str(tmp_path / "redirected"))
        rc = cli.main([
            "run", "--scenario", "synthetic_learning",
            "--override", "rbf.per_dim=2",
            "--override", "plant.wstar.indices=[0,63]",
            "--override", "run.t_end=0.02",
            "--override", "run.dt=0.01",
            "--out", "myrun",
        ])
        assert rc == 0
        assert (tmp_path / "redirected" / "myrun" / "log.csv").exists()


def test_committed_golden_first_derivative_matches():
    """Regression pin: the example scenario's first derivative evaluation
    (leader + plant + observer blocks) frozen from a validated run."""
    from pathlib import Path

    golden = Path(__file__).parent / "golden" / "paper_siv_first_derivative.json"
    rc = cli.main(["golden", "--scenario", "paper_siv", "--file", str(golden), "--check"])
    assert rc == 0


def test_estimator_mode_run_and_analyze(tmp_path):
    rc = cli.main([
        "run", "--scenario", "paper_siv",
        "--mode", "estimator",
        "--override", "run.t_end=0.5",
        "--override", "run.log_stride=100",
        "--out", str(tmp_path / "est"),
    ])
    assert rc == 0
    assert cli.main(["analyze", "--run", str(tmp_path / "est")]) == 0
    summary = json.loads((tmp_path / "est" / "metrics" / "summary.json").read_text())
    assert "estimator_convergence" in summary["verdicts"]


def test_analyze_zero_length_run_flags_degenerate_window(tmp_path):
    rc = cli.main([
        "run", "--scenario", "synthetic_learning",
        "--override", "rbf.per_dim=2",
        "--override", "plant.wstar.indices=[0,63]",
        "--override", "run.t_end=0.01",
        "--override", "run.dt=0.01",
        "--out", str(tmp_path / "tiny"),
    ])
    assert rc == 0
    assert cli.main(["analyze", "--run", str(tmp_path / "tiny")]) == 0
    summary = json.loads((tmp_path / "tiny" / "metrics" / "summary.json").read_text())
    assert "window_degenerate" in summary
