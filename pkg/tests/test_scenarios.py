import json
import subprocess
import sys

import numpy as np
import pytest

from sobolev_gpe import ConfigurationError
from sobolev_gpe.scenarios import (PotentialConfig, Scenario, certify_run, gp_disorder,
                                   gp_well, linear_oracle, run_scenario,
                                   saddle_experiment, saddle, sweep)


def tiny_well(tag="t", **kw):
    """A coarse, fast scenario for artifact-level tests."""
    defaults = dict(n=24, tag=tag, max_iterations=150)
    defaults.update(kw)
    n = defaults.pop("n")
    sc = gp_well(beta=1.0, n=n, **defaults)
    return sc


class TestScenarioSerialization:
    def test_roundtrip(self):
        sc = gp_disorder(seed=9, tag="x")
        back = Scenario.from_json(json.loads(json.dumps(sc.to_json())))
        assert back == sc

    def test_unknown_name_rejected(self):
        with pytest.raises(ConfigurationError):
            Scenario(name="mystery")

    def test_unknown_potential_rejected(self):
        sc = Scenario(name="gp-well", potential=PotentialConfig(kind="volcano"))
        with pytest.raises(ConfigurationError):
            sc.potential.build(sc.grid())


class TestRunScenario:
    def test_artifacts_written(self, tmp_path):
        sc = tiny_well()
        artifacts = run_scenario(sc, out_root=tmp_path)
        d = artifacts.directory
        assert (d / "trace.csv").exists()
        assert (d / "state.csv").exists()
        assert (d / "scenario.json").exists()
        assert (d / "diagnostics.json").exists()
        echo = json.loads((d / "scenario.json").read_text())
        assert Scenario.from_json(echo) == sc
        diag = json.loads((d / "diagnostics.json").read_text())
        assert diag["ground_state_certificate"]["passed"] is True
        assert "lojasiewicz" in diag

    def test_byte_reproducible(self, tmp_path):
        sc = tiny_well()
        a = run_scenario(sc, out_root=tmp_path / "r1").directory
        b = run_scenario(sc, out_root=tmp_path / "r2").directory
        for name in ("trace.csv", "state.csv", "scenario.json"):
            assert (a / name).read_bytes() == (b / name).read_bytes()

    def test_linear_oracle_scenario(self, tmp_path):
        sc = linear_oracle(n=24, tag="t")
        artifacts = run_scenario(sc, out_root=tmp_path)
        oracle = artifacts.diagnostics["linear_oracle"]
        assert oracle["l2_distance_to_eigenvector"] < 1e-6
        assert oracle["lambda_rel_error"] < 1e-8

    def test_error_report_on_failure(self, tmp_path):
        sc = tiny_well(tag="boom", max_iterations=150)
        # an absurd step size trips the divergence watchdog
        sc = Scenario.from_json({**sc.to_json(), "tau": 25.0})
        with pytest.raises(Exception):
            run_scenario(sc, out_root=tmp_path)
        report = tmp_path / "gp-well" / "boom" / "error_report.json"
        assert report.exists()
        payload = json.loads(report.read_text())
        assert payload["error"]

    def test_disorder_scenario_runs(self, tmp_path):
        sc = gp_disorder(n=24, K=8, seed=5, tag="d", max_iterations=200)
        artifacts = run_scenario(sc, out_root=tmp_path)
        assert artifacts.trace.stop_reason in ("grad_tol", "energy_stall")
        assert artifacts.diagnostics["ground_state_certificate"]["passed"] is True


class TestSweep:
    def test_beta_sweep(self, tmp_path):
        sc = tiny_well(tag="sweepbase", max_iterations=200)
        summary = sweep(sc, "beta", [0.5, 1.0], out_root=tmp_path)
        lines = summary.read_text().strip().splitlines()
        assert lines[0].startswith("beta,")
        assert len(lines) == 3
        for line in lines[1:]:
            cells = line.split(",")
            assert cells[5] == ""  # no error column content
            assert int(cells[1]) > 0

    def test_empty_values(self, tmp_path):
        sc = tiny_well(tag="empty")
        summary = sweep(sc, "beta", [], out_root=tmp_path)
        lines = summary.read_text().strip().splitlines()
        assert len(lines) == 1  # header only

    def test_unknown_axis(self, tmp_path):
        with pytest.raises(ConfigurationError):
            sweep(tiny_well(), "gamma", [1.0], out_root=tmp_path)

    def test_cell_failure_recorded(self, tmp_path):
        sc = tiny_well(tag="failcell", max_iterations=60)
        summary = sweep(sc, "tau", [1.0, 25.0], out_root=tmp_path)
        lines = summary.read_text().strip().splitlines()
        assert len(lines) == 3
        ok_row = lines[1].split(",")
        bad_row = lines[2].split(",")
        assert ok_row[5] == ""
        assert bad_row[5] != ""


class TestCertify:
    def test_recomputes_diagnostics(self, tmp_path):
        sc = tiny_well(tag="c")
        artifacts = run_scenario(sc, out_root=tmp_path)
        (artifacts.directory / "diagnostics.json").unlink()
        diag = certify_run(artifacts.directory)
        assert diag["ground_state_certificate"]["passed"] is True
        assert (artifacts.directory / "diagnostics.json").exists()


class TestSaddleExperiment:
    def test_small_saddle_run(self, tmp_path):
        sc = saddle(beta=100.0, n=21, epsilons=(1e-2,), noise_seed=7,
                    max_iterations=2500, tag="s")
        artifacts = saddle_experiment(sc, out_root=tmp_path)
        diag = artifacts.diagnostics
        assert diag["saddle"]["hessian_smallest_eigenvalue"] < 0.0
        assert diag["saddle"]["is_strict_saddle"] is True
        eps_run = diag["epsilon_runs"]["0.01"]
        assert eps_run["alignment_with_ground"] > 0.99
        assert eps_run["dist_saddle_min"] < eps_run["dist_saddle_final"]
        eps_dir = artifacts.directory / "eps_0.01"
        assert (eps_dir / "trace.csv").exists()
        header = (eps_dir / "trace.csv").read_text().splitlines()[0]
        assert "dist_saddle" in header


class TestCli:
    def run_cli(self, *args):
        return subprocess.run([sys.executable, "-m", "sobolev_gpe.cli", *args],
                              capture_output=True, text=True)

    def test_solve_and_certify(self, tmp_path):
        scfile = tmp_path / "scenario.json"
        scfile.write_text(json.dumps(tiny_well(tag="cli").to_json()))
        out = self.run_cli("solve", "--scenario", str(scfile), "--out", str(tmp_path / "out"))
        assert out.returncode == 0, out.stderr
        assert "run complete" in out.stdout
        rundir = tmp_path / "out" / "gp-well" / "cli"
        cert = self.run_cli("certify", "--run", str(rundir))
        assert cert.returncode == 0, cert.stderr
        assert "ground_state_certificate" in cert.stdout

    def test_sweep_command(self, tmp_path):
        scfile = tmp_path / "scenario.json"
        scfile.write_text(json.dumps(tiny_well(tag="clisweep").to_json()))
        out = self.run_cli("sweep", "--scenario", str(scfile), "--axis", "beta",
                           "--values", "0.5,1.0", "--out", str(tmp_path / "out"))
        assert out.returncode == 0, out.stderr
        assert "sweep summary" in out.stdout

    def test_missing_scenario_file(self, tmp_path):
        out = self.run_cli("solve", "--scenario", str(tmp_path / "nope.json"))
        assert out.returncode == 1
        assert "error" in out.stderr

    def test_output_root_env(self, tmp_path):
        import os
        scfile = tmp_path / "scenario.json"
        scfile.write_text(json.dumps(tiny_well(tag="envtag").to_json()))
        env = dict(os.environ, SOBOLEV_GPE_OUT=str(tmp_path / "envout"))
        out = subprocess.run([sys.executable, "-m", "sobolev_gpe.cli", "solve",
                              "--scenario", str(scfile)],
                             capture_output=True, text=True, env=env)
        assert out.returncode == 0, out.stderr
        assert (tmp_path / "envout" / "gp-well" / "envtag" / "trace.csv").exists()
