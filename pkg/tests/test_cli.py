import json
import time

import numpy as np
import pytest
import yaml

import jumpbounds as jb
from jumpbounds.cli import main
from jumpbounds.errors import ConfigError
from jumpbounds.runner import (
    SAMPLES_CSV_COLUMNS,
    SWEEP_CSV_COLUMNS,
    config_from_dict,
    load_config,
    run_experiment,
)


def qubit_config(**overrides):
    cfg = {
        "model": {"type": "qubit", "delta": 0.0, "omega": 1.0, "gamma": 1.0, "n": 1.0},
        "observables": [
            {"name": "absorb", "weights": {1: 1.0}},
            {"name": "emit", "weights": {2: 1.0}},
        ],
        "bound_kind": "kur",
        "tau": 10.0,
        "trajectories": 400,
        "master_seed": 321,
    }
    cfg.update(overrides)
    return cfg


def write_config(tmp_path, cfg, name="config.yaml"):
    path = tmp_path / name
    path.write_text(yaml.safe_dump(cfg))
    return path


@pytest.fixture(scope="module", autouse=True)
def warm_kernels():
    # compile the jit kernels once so timing assertions see steady-state cost
    cfg = config_from_dict(qubit_config(trajectories=100, tau=1.0))
    run_experiment(cfg)


class TestConfig:
    def test_yaml_and_json_equivalent(self, tmp_path):
        raw = qubit_config()
        ypath = write_config(tmp_path, raw)
        jpath = tmp_path / "config.json"
        jpath.write_text(json.dumps(raw))
        assert load_config(ypath) == load_config(jpath)

    def test_validation_errors(self):
        with pytest.raises(ConfigError):
            config_from_dict(qubit_config(trajectories=10))
        with pytest.raises(ConfigError):
            config_from_dict(qubit_config(tau=-1.0))
        with pytest.raises(ConfigError):
            config_from_dict(qubit_config(bound_kind="xur"))
        with pytest.raises(ConfigError):
            config_from_dict(qubit_config(sweep={"parameter": "model.omega", "values": []}))
        with pytest.raises(ConfigError):
            config_from_dict(qubit_config(sweep={"parameter": "model.omega", "values": [2.0, 1.0]}))
        with pytest.raises(ConfigError):
            config_from_dict(qubit_config(unexpected=1))

    def test_observable_count_enforced(self):
        cfg = qubit_config()
        cfg["observables"] = cfg["observables"][:1]
        with pytest.raises(ConfigError):
            config_from_dict(cfg)


class TestRunCommand:
    def test_smoke_run_under_five_seconds(self, tmp_path):
        path = write_config(tmp_path, qubit_config(trajectories=100))
        start = time.perf_counter()
        rc = main(["run", "--config", str(path), "--out", str(tmp_path / "out")])
        elapsed = time.perf_counter() - start
        assert rc == 0
        assert elapsed < 5.0
        summary = json.loads((tmp_path / "out" / "summary.json").read_text())
        assert {"lhs_det", "rhs_main", "kind", "provenance"} <= set(summary)
        lines = (tmp_path / "out" / "samples.csv").read_text().splitlines()
        assert lines[0] == ",".join(SAMPLES_CSV_COLUMNS)
        assert len(lines) == 101

    def test_reproducible_artifacts(self, tmp_path):
        path = write_config(tmp_path, qubit_config(trajectories=300))
        main(["run", "--config", str(path), "--out", str(tmp_path / "a"), "--workers", "1"])
        main(["run", "--config", str(path), "--out", str(tmp_path / "b"), "--workers", "4"])
        assert (tmp_path / "a" / "samples.csv").read_bytes() == (tmp_path / "b" / "samples.csv").read_bytes()
        sa = json.loads((tmp_path / "a" / "summary.json").read_text())
        sb = json.loads((tmp_path / "b" / "summary.json").read_text())
        assert sa == sb

    def test_seed_override_changes_samples(self, tmp_path):
        path = write_config(tmp_path, qubit_config(trajectories=300))
        main(["run", "--config", str(path), "--out", str(tmp_path / "a")])
        main(["run", "--config", str(path), "--out", str(tmp_path / "c"), "--seed", "999"])
        assert (tmp_path / "a" / "samples.csv").read_bytes() != (tmp_path / "c" / "samples.csv").read_bytes()

    def test_error_is_machine_readable(self, tmp_path, capsys):
        cfg = qubit_config()
        cfg["model"]["type"] = "unknown"
        path = write_config(tmp_path, cfg)
        rc = main(["run", "--config", str(path), "--out", str(tmp_path / "out")])
        assert rc == 1
        err = json.loads(capsys.readouterr().err)
        assert err["error"] == "ConfigError"

    def test_output_dir_env_default(self, tmp_path, monkeypatch):
        monkeypatch.setenv("JUMPBOUNDS_OUTPUT_DIR", str(tmp_path / "envout"))
        path = write_config(tmp_path, qubit_config(trajectories=150))
        rc = main(["run", "--config", str(path)])
        assert rc == 0
        assert (tmp_path / "envout" / "summary.json").exists()


class TestSweepCommand:
    def test_qubit_sweep_rows_and_trend(self, tmp_path):
        cfg = qubit_config(
            trajectories=4000,
            sweep={"parameter": "model.omega", "values": [0.25, 0.5, 1.0, 2.0, 4.0]},
        )
        path = write_config(tmp_path, cfg)
        rc = main(["sweep", "--config", str(path), "--out", str(tmp_path / "sw")])
        assert rc == 0
        lines = (tmp_path / "sw" / "sweep.csv").read_text().splitlines()
        assert lines[0] == ",".join(SWEEP_CSV_COLUMNS)
        assert len(lines) == 6
        rows = [line.split(",") for line in lines[1:]]
        corr = [float(r[SWEEP_CSV_COLUMNS.index("corr_coeff")]) for r in rows]
        # incoherent absorption and emission decorrelate as the drive grows
        assert all(c2 < c1 for c1, c2 in zip(corr, corr[1:]))
        assert not any("failed:" in r[-1] for r in rows)

    def test_sweep_requires_section(self, tmp_path):
        path = write_config(tmp_path, qubit_config())
        rc = main(["sweep", "--config", str(path), "--out", str(tmp_path / "sw")])
        assert rc == 1

    def test_failed_point_marked(self, tmp_path):
        # negative drive makes the model builder fail for that point only
        cfg = qubit_config(
            trajectories=200,
            sweep={"parameter": "model.n", "values": [-0.5, 1.0]},
        )
        path = write_config(tmp_path, cfg)
        rc = main(["sweep", "--config", str(path), "--out", str(tmp_path / "sw2")])
        assert rc == 0
        lines = (tmp_path / "sw2" / "sweep.csv").read_text().splitlines()
        assert len(lines) == 3
        assert "failed:" in lines[1]
        assert "failed:" not in lines[2]


class TestClassicalCheck:
    def test_three_state_cycle_passes(self, tmp_path):
        cfg = {
            "model": {
                "type": "classical",
                "rates": [[0.0, 0.0, 1.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]],
                "groups": [[0, 0, 1], [1, 0, 0], [0, 2, 0]],
            },
            "observables": [
                {"name": "g1", "weights": {1: 1.0, 3: 1.0}},
                {"name": "g2", "weights": {2: 1.0}},
            ],
            "bound_kind": "kur",
            "tau": 10.0,
            "trajectories": 20000,
            "master_seed": 2718,
        }
        path = write_config(tmp_path, cfg)
        rc = main(["classical-check", "--config", str(path), "--out", str(tmp_path / "cc")])
        assert rc == 0
        report = json.loads((tmp_path / "cc" / "classical_check.json").read_text())
        assert report["passed"]
        assert report["max_abs_z"] <= 4.0

    def test_two_state_network_diag_zscore(self, tmp_path):
        cfg = {
            "model": {
                "type": "classical",
                "rates": [[0.0, 2.0], [1.0, 0.0]],
                "groups": [[0, 2], [1, 0]],
            },
            "observables": [
                {"name": "fwd", "weights": {1: 1.0}},
                {"name": "bwd", "weights": {2: 1.0}},
            ],
            "bound_kind": "kur",
            "tau": 10.0,
            "trajectories": 20000,
            "master_seed": 1618,
        }
        path = write_config(tmp_path, cfg)
        rc = main(["classical-check", "--config", str(path), "--out", str(tmp_path / "cc3")])
        assert rc == 0
        report = json.loads((tmp_path / "cc3" / "classical_check.json").read_text())
        assert abs(report["z_diagonal"][0]) < 4.0

    def test_quantum_model_rejected(self, tmp_path, capsys):
        path = write_config(tmp_path, qubit_config())
        rc = main(["classical-check", "--config", str(path), "--out", str(tmp_path / "cc2")])
        assert rc == 1
        err = json.loads(capsys.readouterr().err)
        assert err["error"] == "ModelValidationError"


class TestInspectionCommands:
    def test_steady_state_output(self, tmp_path, capsys):
        path = write_config(tmp_path, qubit_config())
        rc = main(["steady-state", "--config", str(path)])
        assert rc == 0
        out = json.loads(capsys.readouterr().out)
        rho = np.array(out["rho_ss_real"])
        assert rho.trace() == pytest.approx(1.0, abs=1e-9)
        assert out["channel_ids"] == [1, 2]

    def test_validate_output(self, tmp_path, capsys):
        path = write_config(tmp_path, qubit_config())
        rc = main(["validate", "--config", str(path)])
        assert rc == 0
        out = json.loads(capsys.readouterr().out)
        assert out["ok"] is True
        assert out["tur_ready"] is False

    def test_csv_format_flag(self, tmp_path, capsys):
        path = write_config(tmp_path, qubit_config())
        rc = main(["validate", "--config", str(path), "--format", "csv"])
        assert rc == 0
        lines = capsys.readouterr().out.splitlines()
        assert len(lines) == 2
        assert "ok" in lines[0].split(",")
