"""Experiment configuration and the end-to-end pipelines behind the CLI.

One resolved ExperimentConfig drives every command; its SHA-256 hash is
stamped into all emitted files. All randomness flows from the single root
seed, split into fixed per-subsystem streams.
"""

import dataclasses
import hashlib
import json
from dataclasses import dataclass, field

import numpy as np

from . import adapt as adapt_mod
from . import forest as forest_mod
from .checkpoint import CheckpointBundle, Scaler, load_checkpoint, save_checkpoint
from .errors import InputError, ParameterError
from .features import ExtractionConfig, extract_features, feature_matrix
from .labels import make_labels
from .metrics import MetricReport
from .nn.model import CarleNet, get_profile
from .nn.train import TrainConfig, train
from .signal import MultiChannelSignal, SynthConfig, inject_noise, snr_sweep, synth_run_to_failure

VARIANTS = ("carle", "carl", "crle", "cale")

_SEED_STREAMS = {"synth": 0, "synth_eval": 1, "noise": 2, "init": 3, "train": 4, "bootstrap": 5}


def derive_seed(root_seed: int, stream: str) -> int:
    """Deterministic per-subsystem seed derived from the one root seed."""
    try:
        key = _SEED_STREAMS[stream]
    except KeyError:
        raise ParameterError(f"unknown seed stream {stream!r}") from None
    return int(np.random.SeedSequence(root_seed, spawn_key=(key,)).generate_state(1)[0])


# ---------------------------------------------------------------------------
# Configuration sections
# ---------------------------------------------------------------------------


@dataclass
class ExtractionSection:
    sigma_g: float = 1.0
    window_len: int = 256
    stride: int | None = None
    f_o: float = 35.0
    n_scales: int = 64
    center_freq: float = 0.81
    two_pi_phase: bool = True

    def validate(self):
        if self.sigma_g <= 0:
            raise ParameterError(f"extraction.sigma_g must be positive, got {self.sigma_g}")
        if self.window_len < 4:
            raise ParameterError(f"extraction.window_len must be >= 4, got {self.window_len}")
        if self.stride is not None and self.stride < 1:
            raise ParameterError(f"extraction.stride must be >= 1, got {self.stride}")
        if self.f_o <= 0:
            raise ParameterError(f"extraction.f_o must be positive, got {self.f_o}")
        if self.n_scales < 2:
            raise ParameterError(f"extraction.n_scales must be >= 2, got {self.n_scales}")
        if self.center_freq <= 0:
            raise ParameterError(f"extraction.center_freq must be positive, got {self.center_freq}")


@dataclass
class LabelSection:
    scheme: str = "linear"
    knee_fraction: float = 0.6

    def validate(self):
        if self.scheme not in ("linear", "piecewise"):
            raise ParameterError(f"labels.scheme must be linear or piecewise, got {self.scheme!r}")
        if self.scheme == "piecewise" and not 0.0 < self.knee_fraction < 1.0:
            raise ParameterError(f"labels.knee_fraction must be in (0,1), got {self.knee_fraction}")


@dataclass
class ModelSection:
    profile: str = "toy"
    use_mha: bool = True
    use_residual: bool = True
    cross_block_residual: bool = False
    seq_len: int | None = None  # None -> profile default
    standardize: bool = True
    z_clip: float = 6.0

    def validate(self):
        get_profile(self.profile)
        if self.seq_len is not None and self.seq_len < 1:
            raise ParameterError(f"model.seq_len must be >= 1, got {self.seq_len}")
        if self.z_clip <= 0:
            raise ParameterError(f"model.z_clip must be positive, got {self.z_clip}")


@dataclass
class TrainingSection:
    batch_size: int = 16
    learning_rate: float = 2e-3
    decay: float = 0.9
    epsilon: float = 1e-8
    epochs: int = 300
    early_stop_patience: int = 25
    plateau_patience: int = 10
    plateau_factor: float = 0.5
    val_fraction: float = 0.0

    def validate(self):
        if self.batch_size < 1:
            raise ParameterError(f"training.batch_size must be >= 1, got {self.batch_size}")
        if self.learning_rate <= 0:
            raise ParameterError(f"training.learning_rate must be positive, got {self.learning_rate}")
        if not 0.0 <= self.decay < 1.0:
            raise ParameterError(f"training.decay must be in [0,1), got {self.decay}")
        if self.epsilon <= 0:
            raise ParameterError(f"training.epsilon must be positive, got {self.epsilon}")
        if self.epochs < 1:
            raise ParameterError(f"training.epochs must be >= 1, got {self.epochs}")
        if self.early_stop_patience < 0 or self.plateau_patience < 0:
            raise ParameterError("training patience values must be >= 0")
        if not 0.0 < self.plateau_factor <= 1.0:
            raise ParameterError(f"training.plateau_factor must be in (0,1], got {self.plateau_factor}")
        if not 0.0 <= self.val_fraction < 1.0:
            raise ParameterError(f"training.val_fraction must be in [0,1), got {self.val_fraction}")


@dataclass
class ForestSection:
    n_trees: int | None = None  # None -> profile default
    max_features: int | None = None
    min_samples_leaf: int = 2
    max_depth: int | None = None
    bootstrap: bool = True
    clamp_unit: bool = True

    def validate(self):
        if self.n_trees is not None and self.n_trees < 1:
            raise ParameterError(f"forest.n_trees must be >= 1, got {self.n_trees}")
        if self.min_samples_leaf < 1:
            raise ParameterError(f"forest.min_samples_leaf must be >= 1, got {self.min_samples_leaf}")


@dataclass
class NoiseSection:
    gaussian_mean: float = 0.0
    gaussian_std: float = 0.1
    salt_pepper_fraction: float = 0.1
    salt_pepper_amplitude: float = 0.5

    def validate(self):
        if self.gaussian_std < 0:
            raise ParameterError(f"noise.gaussian_std must be >= 0, got {self.gaussian_std}")
        if not 0.0 <= self.salt_pepper_fraction <= 1.0:
            raise ParameterError(
                f"noise.salt_pepper_fraction must be in [0,1], got {self.salt_pepper_fraction}"
            )
        if self.salt_pepper_amplitude <= 0:
            raise ParameterError(
                f"noise.salt_pepper_amplitude must be positive, got {self.salt_pepper_amplitude}"
            )


@dataclass
class SynthSection:
    rotation_hz: float | None = None  # None -> extraction.f_o
    duration_s: float = 20.0
    channel_count: int = 2
    onset_fraction: float = 0.1
    growth_rate: float = 1.0
    noise_std: float = 0.2
    burst_amp: float = 4.0
    burst_rate_hz: float = 12.0
    burst_decay_s: float = 0.01

    def validate(self):
        if self.duration_s <= 0:
            raise ParameterError(f"synth.duration_s must be positive, got {self.duration_s}")
        if self.channel_count < 1:
            raise ParameterError(f"synth.channel_count must be >= 1, got {self.channel_count}")
        if not 0.0 <= self.onset_fraction < 1.0:
            raise ParameterError(f"synth.onset_fraction must be in [0,1), got {self.onset_fraction}")
        if self.growth_rate < 0:
            raise ParameterError(f"synth.growth_rate must be >= 0, got {self.growth_rate}")


@dataclass
class AdaptSection:
    pca_components: int | None = None  # None -> full feature width
    ridge: float = 1e-8
    space: str = "feature"  # or "logit"

    def validate(self):
        if self.pca_components is not None and self.pca_components < 1:
            raise ParameterError(f"adapt.pca_components must be >= 1, got {self.pca_components}")
        if self.ridge < 0:
            raise ParameterError(f"adapt.ridge must be >= 0, got {self.ridge}")
        if self.space not in ("feature", "logit"):
            raise ParameterError(f"adapt.space must be 'feature' or 'logit', got {self.space!r}")


@dataclass
class ExperimentConfig:
    seed: int = 0
    sample_rate_hz: float = 1024.0
    snr_cap_db: float = 120.0
    extraction: ExtractionSection = field(default_factory=ExtractionSection)
    labels: LabelSection = field(default_factory=LabelSection)
    model: ModelSection = field(default_factory=ModelSection)
    training: TrainingSection = field(default_factory=TrainingSection)
    forest: ForestSection = field(default_factory=ForestSection)
    noise: NoiseSection = field(default_factory=NoiseSection)
    synth: SynthSection = field(default_factory=SynthSection)
    adapt: AdaptSection = field(default_factory=AdaptSection)

    _SECTIONS = {
        "extraction": ExtractionSection,
        "labels": LabelSection,
        "model": ModelSection,
        "training": TrainingSection,
        "forest": ForestSection,
        "noise": NoiseSection,
        "synth": SynthSection,
        "adapt": AdaptSection,
    }

    def validate(self) -> "ExperimentConfig":
        if self.sample_rate_hz <= 0:
            raise ParameterError(f"sample_rate_hz must be positive, got {self.sample_rate_hz}")
        for name in self._SECTIONS:
            getattr(self, name).validate()
        return self

    @classmethod
    def from_dict(cls, doc: dict) -> "ExperimentConfig":
        doc = dict(doc)
        kwargs = {}
        for name, section_cls in cls._SECTIONS.items():
            sub = doc.pop(name, {})
            if not isinstance(sub, dict):
                raise ParameterError(f"config section {name!r} must be an object")
            known = {f.name for f in dataclasses.fields(section_cls)}
            unknown = set(sub) - known
            if unknown:
                raise ParameterError(f"unknown keys in config section {name!r}: {sorted(unknown)}")
            kwargs[name] = section_cls(**sub)
        known_top = {f.name for f in dataclasses.fields(cls)} - set(cls._SECTIONS)
        unknown = set(doc) - known_top
        if unknown:
            raise ParameterError(f"unknown top-level config keys: {sorted(unknown)}")
        return cls(**doc, **kwargs).validate()

    @classmethod
    def from_file(cls, path) -> "ExperimentConfig":
        with open(path) as fh:
            try:
                doc = json.load(fh)
            except json.JSONDecodeError as exc:
                raise InputError(f"{path}: invalid JSON config: {exc}") from exc
        return cls.from_dict(doc)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def with_overrides(self, overrides: dict) -> "ExperimentConfig":
        """Apply dotted-key overrides like {'training.epochs': 50}."""
        doc = self.to_dict()
        for key, value in overrides.items():
            parts = key.split(".")
            node = doc
            for part in parts[:-1]:
                if part not in node or not isinstance(node[part], dict):
                    raise ParameterError(f"unknown config key {key!r}")
                node = node[part]
            if parts[-1] not in node:
                raise ParameterError(f"unknown config key {key!r}")
            node[parts[-1]] = value
        return type(self).from_dict(doc)

    def config_hash(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:12]

    # resolved helpers ------------------------------------------------------

    def profile(self):
        prof = get_profile(self.model.profile)
        if self.model.seq_len is not None:
            prof = dataclasses.replace(prof, seq_len=self.model.seq_len)
        return prof

    def extraction_config(self) -> ExtractionConfig:
        e = self.extraction
        return ExtractionConfig(
            sigma_g=e.sigma_g,
            window_len=e.window_len,
            stride=e.stride,
            f_o=e.f_o,
            n_scales=e.n_scales,
            center_freq=e.center_freq,
            two_pi_phase=e.two_pi_phase,
        )

    def forest_config(self) -> forest_mod.ForestConfig:
        f = self.forest
        return forest_mod.ForestConfig(
            n_trees=f.n_trees if f.n_trees is not None else self.profile().n_trees,
            max_features=f.max_features,
            min_samples_leaf=f.min_samples_leaf,
            max_depth=f.max_depth,
            bootstrap=f.bootstrap,
            clamp_unit=f.clamp_unit,
        )

    def train_config(self) -> TrainConfig:
        t = self.training
        return TrainConfig(
            batch_size=t.batch_size,
            learning_rate=t.learning_rate,
            decay=t.decay,
            epsilon=t.epsilon,
            epochs=t.epochs,
            early_stop_patience=t.early_stop_patience,
            plateau_patience=t.plateau_patience,
            plateau_factor=t.plateau_factor,
            val_fraction=t.val_fraction,
            seed=derive_seed(self.seed, "train"),
        )

    def synth_config(self, rotation_hz: float | None = None) -> SynthConfig:
        s = self.synth
        f_o = rotation_hz if rotation_hz is not None else (
            s.rotation_hz if s.rotation_hz is not None else self.extraction.f_o
        )
        return SynthConfig(
            rotation_hz=f_o,
            sample_rate_hz=self.sample_rate_hz,
            duration_s=s.duration_s,
            channel_count=s.channel_count,
            onset_fraction=s.onset_fraction,
            growth_rate=s.growth_rate,
            noise_std=s.noise_std,
            burst_amp=s.burst_amp,
            burst_rate_hz=s.burst_rate_hz,
            burst_decay_s=s.burst_decay_s,
        )


# ---------------------------------------------------------------------------
# Model-ready data assembly
# ---------------------------------------------------------------------------


def build_sequences(features: np.ndarray, seq_len: int) -> np.ndarray:
    """Trailing window of seq_len feature rows per labelled window.

    The left edge clamps to the first row, so every window keeps exactly one
    sequence (and later one logit row).
    """
    features = np.atleast_2d(np.asarray(features, dtype=np.float64))
    idx = np.arange(len(features))[:, None] - np.arange(seq_len - 1, -1, -1)[None, :]
    return features[np.clip(idx, 0, None)]


def extract_matrix(signal: MultiChannelSignal, config: ExperimentConfig):
    """Run extraction and return (matrix, names, window_index)."""
    vectors = extract_features(signal, config.extraction_config())
    if not vectors:
        raise InputError("extraction produced no usable windows")
    names = vectors[0].feature_names
    idx = np.asarray([v.window_index for v in vectors], dtype=np.int64)
    return feature_matrix(vectors), names, idx


def labels_for(config: ExperimentConfig, n_windows: int) -> np.ndarray:
    lbl = make_labels(n_windows, config.labels.scheme, config.labels.knee_fraction)
    return lbl.values


@dataclass
class TrainedModel:
    net: CarleNet
    forest: forest_mod.Forest | None
    scaler: Scaler | None
    report: object
    variant: str

    def predict(self, X: np.ndarray) -> np.ndarray:
        seqs = self._sequences(X)
        logits, scalar = self.net.forward(seqs)
        if self.forest is not None:
            return self.forest.predict(logits)
        # forest-less variant consumes the scalar head; labels are normalised
        return np.clip(scalar, 0.0, 1.0)

    def logits(self, X: np.ndarray) -> np.ndarray:
        return self.net.logits(self._sequences(X))

    def _sequences(self, X: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        if X.shape[1] != self.net.input_width:
            raise InputError(
                f"feature width mismatch: model expects {self.net.input_width}, got {X.shape[1]}"
            )
        if self.scaler is not None:
            X = self.scaler.transform(X)
        return build_sequences(X, self.net.profile.seq_len)


def variant_flags(variant: str, config: ExperimentConfig):
    if variant not in VARIANTS:
        raise ParameterError(f"unknown variant {variant!r}; choose from {VARIANTS}")
    use_mha = config.model.use_mha and variant != "crle"
    use_residual = config.model.use_residual and variant != "cale"
    return use_mha, use_residual


def train_model(X, y, config: ExperimentConfig, variant: str = "carle") -> TrainedModel:
    """Two-phase fit: the network on (features, labels), then the forest on
    the network's logit rows (skipped for the 'carl' variant)."""
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    y = np.asarray(y, dtype=np.float64).ravel()
    if len(X) != len(y):
        raise InputError(f"feature/label mismatch: {len(X)} rows vs {len(y)} labels")
    use_mha, use_residual = variant_flags(variant, config)
    profile = config.profile()

    scaler = Scaler.fit(X, clip=config.model.z_clip) if config.model.standardize else None
    Xs = scaler.transform(X) if scaler is not None else X
    seqs = build_sequences(Xs, profile.seq_len)

    net = CarleNet(
        X.shape[1],
        profile,
        use_mha=use_mha,
        use_residual=use_residual,
        cross_block_residual=config.model.cross_block_residual,
        seed=derive_seed(config.seed, "init"),
    )
    report = train(net, seqs, y, config.train_config())

    trained_forest = None
    if variant != "carl":
        logits = net.logits(seqs)
        trained_forest = forest_mod.fit(
            logits, y, config.forest_config(), seed=derive_seed(config.seed, "bootstrap")
        )
    return TrainedModel(net, trained_forest, scaler, report, variant)


def save_model(path, model: TrainedModel, config: ExperimentConfig):
    save_checkpoint(
        path,
        model.net,
        forest=model.forest,
        scaler=model.scaler,
        optimizer=model.report.optimizer,
        config=config.to_dict(),
        history=model.report.history,
        extra_meta={
            "variant": model.variant,
            "config_hash": config.config_hash(),
            "best_epoch": model.report.best_epoch,
            "diverged": model.report.diverged,
        },
    )


def load_model(path) -> TrainedModel:
    bundle: CheckpointBundle = load_checkpoint(path)
    return TrainedModel(
        bundle.net,
        bundle.forest,
        bundle.scaler,
        report=None,
        variant=bundle.meta.get("variant", "carle"),
    )


def config_from_checkpoint(path) -> ExperimentConfig:
    bundle = load_checkpoint(path)
    return ExperimentConfig.from_dict(bundle.meta.get("config", {}))


# ---------------------------------------------------------------------------
# Cross-domain alignment
# ---------------------------------------------------------------------------


def align_features(source_X, target_X, config: ExperimentConfig) -> np.ndarray:
    """Recolour target rows to the source's statistics in PCA space, then
    map back to feature space so a source-trained model can consume them."""
    source_X = np.atleast_2d(np.asarray(source_X, dtype=np.float64))
    target_X = np.atleast_2d(np.asarray(target_X, dtype=np.float64))
    d = source_X.shape[1]
    k = config.adapt.pca_components
    k = min(k, d, len(source_X) - 1) if k is not None else min(d, len(source_X) - 1)
    pca = adapt_mod.pca_fit(source_X, k)
    z_source = adapt_mod.pca_transform(pca, source_X)
    z_target = adapt_mod.pca_transform(pca, target_X)
    coral = adapt_mod.coral_fit(z_target, z_source, ridge=config.adapt.ridge)
    return adapt_mod.pca_inverse(pca, adapt_mod.coral_apply(coral, z_target))


def crossdomain_predictions(model: TrainedModel, source_X, target_X, config: ExperimentConfig):
    """(aligned, unaligned) predictions of a source-trained model on target features."""
    unaligned = model.predict(target_X)
    if config.adapt.space == "logit":
        logit_s = model.logits(source_X)
        logit_t = model.logits(target_X)
        aligned_logits = align_features(logit_s, logit_t, config)
        if model.forest is None:
            raise InputError("logit-space alignment needs a forest-bearing checkpoint")
        aligned = model.forest.predict(aligned_logits)
    else:
        aligned = model.predict(align_features(source_X, target_X, config))
    return aligned, unaligned


# ---------------------------------------------------------------------------
# Noise evaluation
# ---------------------------------------------------------------------------


def noise_reports(model: TrainedModel, signal: MultiChannelSignal, config: ExperimentConfig) -> dict:
    """Clean vs gaussian vs salt-and-pepper MetricReports through the full pipeline."""
    n = config.noise
    cases = {
        "clean": (None, {}),
        "gaussian": ("gaussian", {"mean": n.gaussian_mean, "std": n.gaussian_std}),
        "salt_pepper": (
            "salt_pepper",
            {"fraction": n.salt_pepper_fraction, "amplitude": n.salt_pepper_amplitude},
        ),
    }
    out = {}
    for name, (kind, params) in cases.items():
        sig = signal if kind is None else inject_noise(
            signal, kind, params, derive_seed(config.seed, "noise")
        )
        X, _, _ = extract_matrix(sig, config)
        y_true = labels_for(config, len(X))
        y_pred = model.predict(X)
        report = MetricReport.compute(y_true, y_pred).to_dict()
        report["noise_params"] = {"kind": kind, **params}
        out[name] = report
    return out


def snr_pairs(signal: MultiChannelSignal, sigmas, config: ExperimentConfig):
    return snr_sweep(signal, sigmas, cap_db=config.snr_cap_db)


def synth_signal(config: ExperimentConfig, rotation_hz: float | None = None, stream: str = "synth"):
    return synth_run_to_failure(
        config.synth_config(rotation_hz), derive_seed(config.seed, stream)
    )
