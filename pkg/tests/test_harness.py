import json

import numpy as np
import pytest

from boostcal.boost import BaseSpec, BoostConfig
from boostcal.dataset import ConfigurationError, Dataset
from boostcal.harness import (CURVE_COLUMNS, DataSource, ExperimentConfig, ModelBundle,
                              SchemaVersionError, derive_seed, dump_json, load_model,
                              rows_to_csv, run_calibration_experiment,
                              run_learning_curve, save_model, select_iterations,
                              train_bundle)
from boostcal.synthetic import make_gaussians


def _val():
    return Dataset(np.zeros((4, 1)), np.array([0, 0, 1, 1]))


class TestSelect:
    def test_tie_prefers_fewer_rounds(self):
        p = np.array([0.2, 0.2, 0.8, 0.8])
        assert select_iterations(_val(), {8: p, 2: p.copy(), 4: p.copy()}) == 2

    def test_single_gridpoint(self):
        assert select_iterations(_val(), {16: np.full(4, 0.5)}, "brier") == 16

    def test_interior_minimum(self):
        cand = {2: np.array([0.4, 0.4, 0.6, 0.6]),
                4: np.array([0.1, 0.1, 0.9, 0.9]),
                8: np.array([0.0, 0.0, 0.0, 1.0])}
        assert select_iterations(_val(), cand, "cross_entropy") == 4
        assert select_iterations(_val(), cand, "brier") == 4

    def test_errors(self):
        with pytest.raises(ConfigurationError):
            select_iterations(_val(), {})
        with pytest.raises(ConfigurationError):
            select_iterations(_val(), {1: np.full(4, 0.5)}, "accuracy")


class TestBundle:
    @pytest.mark.parametrize("method", ["none", "logistic", "platt", "isotonic"])
    def test_round_trip_bit_identical(self, tmp_path, method):
        d = make_gaussians(200, seed=1)
        b = train_bundle(d, BoostConfig(rounds=12, base=BaseSpec("tree", 2)), method)
        path = tmp_path / "m.json"
        save_model(b, path)
        b2 = load_model(path)
        assert b2.method == method
        X = make_gaussians(50, seed=2).features
        assert b.predict(X).tobytes() == b2.predict(X).tobytes()
        p = b.predict(X)
        assert np.all((p >= 0) & (p <= 1))

    def test_logloss_bundle_reports_sigmoid(self):
        d = make_gaussians(100, seed=3)
        b = train_bundle(d, BoostConfig(rounds=5, loss="logloss"))
        F = b.ensemble.raw_score(d.features)
        assert np.allclose(b.predict(d.features), 1 / (1 + np.exp(-F)))

    def test_schema_version(self, tmp_path):
        d = make_gaussians(60, seed=0)
        obj = train_bundle(d, BoostConfig(rounds=2)).to_dict()
        obj["schema_version"] = 99
        with pytest.raises(SchemaVersionError):
            ModelBundle.from_dict(obj)

    def test_corrupt_file(self, tmp_path):
        p = tmp_path / "bad.json"
        p.write_text("{not json")
        with pytest.raises(ValueError, match="corrupt"):
            load_model(p)

    def test_method_calibrator_mismatch(self):
        d = make_gaussians(60, seed=0)
        e = train_bundle(d, BoostConfig(rounds=2)).ensemble
        with pytest.raises(ConfigurationError):
            ModelBundle(e, "platt", None)

    def test_metadata_records_early_stop(self):
        X = np.arange(10, dtype=float).reshape(-1, 1)
        d = Dataset(X, (X[:, 0] > 4).astype(int))
        b = train_bundle(d, BoostConfig(rounds=20))
        assert b.metadata["early_stop"] and b.metadata["rounds_trained"] == 1


class TestConfig:
    def test_grid_validation(self):
        with pytest.raises(ConfigurationError):
            ExperimentConfig(grid=(4, 2))
        with pytest.raises(ConfigurationError):
            ExperimentConfig(methods=("magic",))

    def test_digest_stable(self):
        a = ExperimentConfig(grid=(2, 4), seed=3)
        assert a.digest() == ExperimentConfig(grid=(2, 4), seed=3).digest()
        assert a.digest() != ExperimentConfig(grid=(2, 4), seed=4).digest()

    def test_derive_seed(self):
        assert derive_seed(1, 2, 3) == derive_seed(1, 2, 3)
        assert derive_seed(1, 2, 3) != derive_seed(1, 3, 2)
        assert 0 <= derive_seed(5) < 2 ** 63


def _small_cfg(**kw):
    src = DataSource(synthetic="gaussians", n_samples=600)
    base = dict(data=src, base=BaseSpec("tree", 2), grid=(2, 8), trials=2, seed=1,
                calibration_sizes=(16, 32, 10_000))
    base.update(kw)
    return ExperimentConfig(**base)


class TestExperiment:
    def test_rows_and_summary(self):
        res = run_calibration_experiment(_small_cfg())
        conds = {r["condition"] for r in res["rows"]}
        assert conds == {"RAW", "PLATT", "ISO", "LOGIST", "LOGLOSS"}
        # 5 conditions x (ce, brier, auc) x 2 trials
        assert len(res["rows"]) == 30
        assert {r["metric"] for r in res["summary"]} == {"cross_entropy", "brier", "auc"}
        for diag in res["diagnostics"]:
            pr = diag["platt_rank"]
            assert pr["identical"] and pr["A"] < 0
        assert json.loads(dump_json(res))["config_digest"] == res["config_digest"]

    def test_deterministic(self):
        a = dump_json(run_calibration_experiment(_small_cfg(trials=1)))
        b = dump_json(run_calibration_experiment(_small_cfg(trials=1)))
        assert a == b

    def test_learning_curve_shape(self):
        res = run_learning_curve(_small_cfg(), rounds=8)
        sizes = {r["size"] for r in res["aggregate"]}
        assert sizes == {16, 32}
        assert any(s["size"] == 10_000 for s in res["skipped"])
        for r in res["aggregate"]:
            assert r["n"] == 2 and r["method"] in ("RAW", "PLATT", "ISO")
        header = rows_to_csv(res["aggregate"], CURVE_COLUMNS).splitlines()[0]
        assert header == "size,method,mean,stderr,n"


def test_rows_to_csv_empty_cells():
    text = rows_to_csv([{"a": 1, "b": None, "c": 0.5}], ("a", "b", "c"))
    assert text == "a,b,c\n1,,0.5\n"
