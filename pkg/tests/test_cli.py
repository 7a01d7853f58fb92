import json

import numpy as np
import pytest

from momentid.cli import (
    EXPERIMENTS,
    UsageError,
    config_hash,
    load_config,
    main,
    run_experiment,
)


def write_config(tmp_path, payload, name="config.json"):
    path = tmp_path / name
    path.write_text(json.dumps(payload))
    return str(path)


class TestConfigValidation:
    def test_seed_is_mandatory(self, tmp_path):
        path = write_config(tmp_path, {"experiment": "counterexample"})
        with pytest.raises(UsageError, match="seed"):
            load_config(path)

    def test_unknown_experiment(self, tmp_path):
        path = write_config(tmp_path, {"experiment": "nope", "seed": 1})
        with pytest.raises(UsageError, match="unknown experiment"):
            load_config(path)

    def test_unknown_top_level_key(self, tmp_path):
        path = write_config(
            tmp_path,
            {"experiment": "counterexample", "seed": 1, "typo": True},
        )
        with pytest.raises(UsageError, match="unknown config keys"):
            load_config(path)

    def test_unknown_param_key(self, tmp_path):
        path = write_config(
            tmp_path,
            {"experiment": "counterexample", "seed": 1,
             "params": {"k_mx": 8}},
        )
        with pytest.raises(UsageError, match="unknown params"):
            load_config(path)

    def test_defaults_filled(self, tmp_path):
        path = write_config(
            tmp_path, {"experiment": "counterexample", "seed": 7})
        config = load_config(path)
        assert config["params"]["k_max"] == 12

    def test_malformed_json_is_usage_error(self, tmp_path):
        path = tmp_path / "broken.json"
        path.write_text("{not json")
        with pytest.raises(UsageError):
            load_config(str(path))


class TestCatalog:
    def test_seven_experiments(self):
        assert len(EXPERIMENTS) == 7

    def test_every_entry_documents_its_checks(self):
        for spec in EXPERIMENTS.values():
            assert spec["description"]
            assert len(spec["checks"]) >= 1

    def test_stable_ordering(self, capsys):
        main(["list"])
        first = capsys.readouterr().out
        main(["list"])
        assert capsys.readouterr().out == first


class TestRun:
    def test_counterexample_passes(self, tmp_path):
        path = write_config(
            tmp_path, {"experiment": "counterexample", "seed": 3})
        code = main(["run", path, "--out", str(tmp_path)])
        assert code == 0
        report = json.loads((tmp_path / "counterexample.json").read_text())
        assert report["summary"]["pass"]
        assert report["config_sha256"]

    def test_exit_status_tracks_summary(self, tmp_path, monkeypatch):
        path = write_config(
            tmp_path, {"experiment": "cone-suite", "seed": 3,
                       "params": {"instances": 200, "dim": 3}})
        assert main(["run", path, "--out", str(tmp_path)]) == 0

    def test_usage_error_exit_code(self, tmp_path):
        path = write_config(tmp_path, {"experiment": "counterexample"})
        assert main(["run", path]) == 2

    def test_seed_override(self, tmp_path):
        path = write_config(
            tmp_path, {"experiment": "cone-suite", "seed": 3,
                       "params": {"instances": 100, "dim": 3}})
        main(["run", path, "--out", str(tmp_path), "--seed", "99"])
        report = json.loads((tmp_path / "cone-suite.json").read_text())
        assert report["config"]["seed"] == 99

    def test_reports_deterministic_modulo_wall_time(self, tmp_path):
        config = load_config(write_config(
            tmp_path, {"experiment": "semiparam-pi", "seed": 5,
                       "params": {"n_splits": 3, "trials": 500}}))
        r1, _ = run_experiment(config)
        r2, _ = run_experiment(config)
        r1.pop("wall_time_s")
        r2.pop("wall_time_s")
        assert json.dumps(r1, sort_keys=True) == json.dumps(r2,
                                                            sort_keys=True)

    def test_csv_format_writes_tables(self, tmp_path):
        path = write_config(
            tmp_path,
            {"experiment": "genericity", "seed": 5,
             "params": {"draws": 10, "trunc_n": 10, "grid_n": 16,
                        "tol": 1e-12}},
        )
        assert main(["run", path, "--out", str(tmp_path),
                     "--format", "csv"]) == 0
        checks = (tmp_path / "genericity.checks.csv").read_text()
        assert checks.startswith("name,passed,value")
        samples = np.loadtxt(tmp_path / "genericity.sigma_min.csv",
                             skiprows=1)
        assert samples.shape == (10,)

    def test_numeric_failure_becomes_failed_check(self, tmp_path):
        # an impossible tolerance makes the eigensolver give up; the runner
        # must report a failed check, not crash
        path = write_config(
            tmp_path,
            {"experiment": "ccapm", "seed": 5,
             "params": {"n_state": 9, "n_signal": 11, "pf_tol": 1e-30}},
        )
        code = main(["run", path, "--out", str(tmp_path)])
        assert code == 1
        report = json.loads((tmp_path / "ccapm.json").read_text())
        assert not report["summary"]["pass"]
        assert any(not c["passed"] for c in report["checks"])


def test_config_hash_ignores_out_dir(tmp_path):
    base = {"experiment": "counterexample", "seed": 1}
    c1 = load_config(write_config(tmp_path, base, "a.json"))
    c2 = load_config(write_config(tmp_path, {**base, "out_dir": "/tmp/x"},
                                  "b.json"))
    assert config_hash(c1) == config_hash(c2)
