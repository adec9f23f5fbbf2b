import json

import numpy as np
import pytest

from carle.checkpoint import Scaler, load_checkpoint
from carle.errors import InputError, ParameterError
from carle.metrics import MetricReport
from carle.pipeline import (
    ExperimentConfig,
    build_sequences,
    crossdomain_predictions,
    derive_seed,
    extract_matrix,
    labels_for,
    load_model,
    noise_reports,
    save_model,
    synth_signal,
    train_model,
    variant_flags,
)


def tiny_config(**overrides):
    config = ExperimentConfig.from_dict(
        {
            "seed": 1,
            "sample_rate_hz": 1024.0,
            "extraction": {"window_len": 128, "f_o": 35.0, "n_scales": 12},
            "synth": {"duration_s": 6.0, "channel_count": 1},
            "training": {"epochs": 30, "batch_size": 8},
            "forest": {"n_trees": 8},
        }
    )
    if overrides:
        config = config.with_overrides(overrides)
    return config


class TestConfig:
    def test_defaults_validate(self):
        ExperimentConfig().validate()

    def test_from_dict_rejects_unknown_keys(self):
        with pytest.raises(ParameterError, match="unknown"):
            ExperimentConfig.from_dict({"extraction": {"windowlen": 3}})
        with pytest.raises(ParameterError, match="unknown"):
            ExperimentConfig.from_dict({"mystery": 1})

    def test_overrides(self):
        config = tiny_config(**{"training.epochs": 99, "seed": 5})
        assert config.training.epochs == 99
        assert config.seed == 5
        with pytest.raises(ParameterError):
            tiny_config(**{"training.bogus": 1})

    def test_hash_stable_and_sensitive(self):
        a = tiny_config()
        b = tiny_config()
        assert a.config_hash() == b.config_hash()
        c = tiny_config(**{"training.epochs": 31})
        assert a.config_hash() != c.config_hash()

    def test_validation_errors(self):
        with pytest.raises(ParameterError):
            tiny_config(**{"extraction.sigma_g": -1})
        with pytest.raises(ParameterError):
            tiny_config(**{"labels.scheme": "exp"})
        with pytest.raises(ParameterError):
            tiny_config(**{"training.val_fraction": 1.5})

    def test_file_round_trip(self, tmp_path):
        config = tiny_config()
        path = tmp_path / "cfg.json"
        path.write_text(json.dumps(config.to_dict()))
        again = ExperimentConfig.from_file(path)
        assert again.config_hash() == config.config_hash()

    def test_derive_seed_streams_differ(self):
        seeds = {name: derive_seed(7, name) for name in ("synth", "noise", "init", "train", "bootstrap")}
        assert len(set(seeds.values())) == len(seeds)
        assert derive_seed(7, "synth") == seeds["synth"]
        with pytest.raises(ParameterError):
            derive_seed(7, "unknown-stream")


class TestSequences:
    def test_shape_and_trailing_window(self, rng):
        X = np.arange(20, dtype=float).reshape(10, 2)
        seqs = build_sequences(X, 3)
        assert seqs.shape == (10, 3, 2)
        assert np.array_equal(seqs[5], X[[3, 4, 5]])

    def test_left_edge_clamps(self):
        X = np.arange(8, dtype=float).reshape(4, 2)
        seqs = build_sequences(X, 3)
        assert np.array_equal(seqs[0], X[[0, 0, 0]])
        assert np.array_equal(seqs[1], X[[0, 0, 1]])

    def test_one_sequence_per_row(self, rng):
        X = rng.normal(size=(17, 5))
        assert len(build_sequences(X, 4)) == 17


class TestScaler:
    def test_standardises(self, rng):
        X = rng.normal(loc=5.0, scale=3.0, size=(200, 4))
        s = Scaler.fit(X)
        Z = s.transform(X)
        assert np.allclose(Z.mean(axis=0), 0.0, atol=1e-9)
        assert np.allclose(Z.std(axis=0), 1.0, atol=1e-9)

    def test_clips_wild_values(self, rng):
        X = rng.normal(size=(50, 2))
        s = Scaler.fit(X, clip=6.0)
        Z = s.transform(X + 1000.0)
        assert np.all(Z <= 6.0)

    def test_constant_feature_floored(self):
        X = np.ones((10, 2))
        s = Scaler.fit(X)
        assert np.all(np.isfinite(s.transform(X)))


class TestTrainModel:
    def _data(self, config):
        sig, _ = synth_signal(config)
        X, _, _ = extract_matrix(sig, config)
        y = labels_for(config, len(X))
        return X, y

    def test_carle_variant_trains_and_predicts(self):
        config = tiny_config()
        X, y = self._data(config)
        model = train_model(X, y, config, "carle")
        pred = model.predict(X)
        assert pred.shape == y.shape
        assert model.forest is not None
        report = MetricReport.compute(y, pred)
        assert report.mae < 0.25

    def test_carl_has_no_forest(self):
        config = tiny_config()
        X, y = self._data(config)
        model = train_model(X, y, config, "carl")
        assert model.forest is None
        pred = model.predict(X)
        assert np.all((0.0 <= pred) & (pred <= 1.0))

    def test_variant_flags(self):
        config = tiny_config()
        assert variant_flags("carle", config) == (True, True)
        assert variant_flags("crle", config) == (False, True)
        assert variant_flags("cale", config) == (True, False)
        with pytest.raises(ParameterError):
            variant_flags("carlo", config)

    def test_forest_training_fit_at_least_as_good_as_head(self):
        # the ensemble phase should not fit the training set worse than the
        # scalar head it consumes
        config = tiny_config()
        X, y = self._data(config)
        model = train_model(X, y, config, "carle")
        seqs = model._sequences(X)
        logits, scalar = model.net.forward(seqs)
        head_mse = float(np.mean((np.clip(scalar, 0, 1) - y) ** 2))
        forest_mse = float(np.mean((model.forest.predict(logits) - y) ** 2))
        assert forest_mse <= head_mse + 1e-12

    def test_checkpoint_round_trip(self, tmp_path):
        config = tiny_config()
        X, y = self._data(config)
        model = train_model(X, y, config, "carle")
        path = tmp_path / "ckpt.npz"
        save_model(path, model, config)
        again = load_model(path)
        assert np.allclose(model.predict(X), again.predict(X), rtol=0, atol=0)
        bundle = load_checkpoint(path)
        assert bundle.meta["config_hash"] == config.config_hash()
        assert bundle.meta["has_forest"]
        assert bundle.meta["param_shapes"]
        assert "optimizer" in bundle.meta

    def test_feature_width_mismatch(self):
        config = tiny_config()
        X, y = self._data(config)
        model = train_model(X, y, config, "carle")
        with pytest.raises(InputError):
            model.predict(np.zeros((4, X.shape[1] + 1)))

    def test_checkpoint_rejects_foreign_npz(self, tmp_path):
        path = tmp_path / "foreign.npz"
        np.savez(path, stuff=np.arange(3))
        with pytest.raises(InputError, match="checkpoint"):
            load_checkpoint(path)

    def test_checkpoint_rejects_future_version(self, tmp_path):
        config = tiny_config()
        X, y = self._data(config)
        model = train_model(X, y, config, "carl")
        path = tmp_path / "ok.npz"
        save_model(path, model, config)

        import json as _json

        with np.load(path) as data:
            meta = _json.loads(bytes(data["meta"]).decode())
            arrays = {k: data[k] for k in data.files if k != "meta"}
        meta["version"] = 999
        bad = tmp_path / "future.npz"
        np.savez(bad, meta=np.frombuffer(_json.dumps(meta).encode(), dtype=np.uint8), **arrays)
        with pytest.raises(InputError, match="version"):
            load_checkpoint(bad)


class TestCrossdomain:
    def test_alignment_recovers_affine_shift(self):
        config = tiny_config()
        sig, _ = synth_signal(config)
        X, _, _ = extract_matrix(sig, config)
        y = labels_for(config, len(X))
        model = train_model(X, y, config, "carle")

        rng = np.random.default_rng(3)
        scale = rng.uniform(1.5, 3.0, X.shape[1])
        shift = rng.uniform(-2.0, 2.0, X.shape[1])
        target_X = X * scale + shift  # same windows, affinely warped domain

        aligned, unaligned = crossdomain_predictions(model, X, target_X, config)
        mae_aligned = MetricReport.compute(y, aligned).mae
        mae_unaligned = MetricReport.compute(y, unaligned).mae
        assert mae_aligned < mae_unaligned

    def test_logit_space_variant(self):
        config = tiny_config(**{"adapt.space": "logit"})
        sig, _ = synth_signal(config)
        X, _, _ = extract_matrix(sig, config)
        y = labels_for(config, len(X))
        model = train_model(X, y, config, "carle")
        target_X = X * 1.5 + 0.3
        aligned, unaligned = crossdomain_predictions(model, X, target_X, config)
        assert aligned.shape == unaligned.shape == y.shape


class TestNoiseReports:
    def test_three_reports_with_params_echoed(self):
        config = tiny_config()
        sig, _ = synth_signal(config)
        X, _, _ = extract_matrix(sig, config)
        y = labels_for(config, len(X))
        model = train_model(X, y, config, "carle")
        reports = noise_reports(model, sig, config)
        assert set(reports) == {"clean", "gaussian", "salt_pepper"}
        assert reports["gaussian"]["noise_params"]["std"] == 0.1
        assert reports["salt_pepper"]["noise_params"]["fraction"] == 0.1
        for rep in reports.values():
            assert {"mae", "rmse", "mse_alias", "score", "n"} <= set(rep)

    def test_zero_noise_equals_clean(self):
        config = tiny_config(**{"noise.gaussian_std": 0.0, "noise.gaussian_mean": 0.0})
        sig, _ = synth_signal(config)
        X, _, _ = extract_matrix(sig, config)
        y = labels_for(config, len(X))
        model = train_model(X, y, config, "carle")
        reports = noise_reports(model, sig, config)
        assert reports["clean"]["mae"] == reports["gaussian"]["mae"]
        assert reports["clean"]["rmse"] == reports["gaussian"]["rmse"]
