"""Combined model artifact: network weights, optimizer state, feature scaler,
and the forest, in one self-describing npz container with a versioned header."""

import json
from dataclasses import dataclass

import numpy as np

from .errors import InputError
from .forest import Forest, ForestConfig, RegressionTree
from .nn.model import CarleNet

FORMAT_MAGIC = "carle-checkpoint"
FORMAT_VERSION = 1


@dataclass
class Scaler:
    """Per-feature standardisation with clipped z-scores.

    Features that were constant at fit time carry no information, so their
    z-score is defined as 0 whatever the input; this keeps a shifted
    deployment domain from injecting huge clipped constants.
    """

    mean: np.ndarray
    std: np.ndarray
    clip: float = 6.0

    @classmethod
    def fit(cls, X, clip: float = 6.0) -> "Scaler":
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        std = X.std(axis=0)
        constant = std <= 1e-9 * (1.0 + np.abs(X.mean(axis=0)))
        std = np.where(constant, np.inf, std)
        return cls(X.mean(axis=0), std, clip)

    def transform(self, X) -> np.ndarray:
        z = (np.asarray(X, dtype=np.float64) - self.mean) / self.std
        return np.clip(z, -self.clip, self.clip)


def _pack_forest(forest: Forest, arrays: dict):
    feats, thrs, lefts, rights, vals, offsets = [], [], [], [], [], [0]
    for tree in forest.trees:
        feats.append(tree.feature)
        thrs.append(tree.threshold)
        lefts.append(tree.left)
        rights.append(tree.right)
        vals.append(tree.value)
        offsets.append(offsets[-1] + len(tree.feature))
    arrays["forest::feature"] = np.concatenate(feats)
    arrays["forest::threshold"] = np.concatenate(thrs)
    arrays["forest::left"] = np.concatenate(lefts)
    arrays["forest::right"] = np.concatenate(rights)
    arrays["forest::value"] = np.concatenate(vals)
    arrays["forest::offsets"] = np.asarray(offsets, dtype=np.int64)


def _unpack_forest(data, meta) -> Forest:
    offsets = data["forest::offsets"]
    trees = []
    for i in range(len(offsets) - 1):
        lo, hi = offsets[i], offsets[i + 1]
        trees.append(
            RegressionTree(
                data["forest::feature"][lo:hi],
                data["forest::threshold"][lo:hi],
                data["forest::left"][lo:hi],
                data["forest::right"][lo:hi],
                data["forest::value"][lo:hi],
            )
        )
    cfg = ForestConfig(**meta["forest_config"])
    return Forest(trees, meta["forest_n_features"], cfg)


def save_checkpoint(
    path,
    net: CarleNet,
    forest: Forest | None = None,
    scaler: Scaler | None = None,
    optimizer=None,
    config: dict | None = None,
    history: dict | None = None,
    extra_meta: dict | None = None,
):
    meta = {
        "magic": FORMAT_MAGIC,
        "version": FORMAT_VERSION,
        "profile": net.profile.name,
        "input_width": net.input_width,
        "use_mha": net.use_mha,
        "use_residual": net.use_residual,
        "cross_block_residual": net.cross_block_residual,
        "net_seed": net.seed,
        "param_shapes": {name: list(arr.shape) for name, arr in net.parameters()},
        "has_forest": forest is not None,
        "has_scaler": scaler is not None,
        "has_optimizer": optimizer is not None,
        "config": config or {},
        "history": history or {},
    }
    if extra_meta:
        meta.update(extra_meta)

    arrays = {}
    for name, arr in net.parameters():
        arrays[f"nn::{name}"] = arr
    if optimizer is not None:
        meta["optimizer"] = {
            "learning_rate": optimizer.learning_rate,
            "decay": optimizer.decay,
            "epsilon": optimizer.epsilon,
        }
        for name, acc in optimizer.accum.items():
            arrays[f"opt::{name}"] = acc
    if scaler is not None:
        arrays["scaler::mean"] = scaler.mean
        arrays["scaler::std"] = scaler.std
        meta["scaler_clip"] = scaler.clip
    if forest is not None:
        meta["forest_config"] = forest.config.__dict__
        meta["forest_n_features"] = forest.n_features
        _pack_forest(forest, arrays)

    np.savez_compressed(path, meta=np.frombuffer(json.dumps(meta).encode(), dtype=np.uint8), **arrays)


@dataclass
class CheckpointBundle:
    net: CarleNet
    forest: Forest | None
    scaler: Scaler | None
    meta: dict

    @property
    def config(self) -> dict:
        return self.meta.get("config", {})


def load_checkpoint(path) -> CheckpointBundle:
    with np.load(path) as data:
        try:
            meta = json.loads(bytes(data["meta"]).decode())
        except (KeyError, ValueError) as exc:
            raise InputError(f"{path}: not a model checkpoint (missing header)") from exc
        if meta.get("magic") != FORMAT_MAGIC:
            raise InputError(f"{path}: not a model checkpoint (bad magic)")
        if meta.get("version") != FORMAT_VERSION:
            raise InputError(
                f"{path}: unsupported checkpoint version {meta.get('version')}"
            )
        net = CarleNet(
            meta["input_width"],
            meta["profile"],
            use_mha=meta["use_mha"],
            use_residual=meta["use_residual"],
            cross_block_residual=meta["cross_block_residual"],
            seed=meta["net_seed"],
        )
        weights = {
            name[len("nn::"):]: data[name] for name in data.files if name.startswith("nn::")
        }
        net.set_weights(weights)
        forest = _unpack_forest(data, meta) if meta["has_forest"] else None
        scaler = None
        if meta["has_scaler"]:
            scaler = Scaler(data["scaler::mean"], data["scaler::std"], meta["scaler_clip"])
    return CheckpointBundle(net, forest, scaler, meta)
