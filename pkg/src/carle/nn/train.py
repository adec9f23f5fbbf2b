"""Network training: RMSProp updates, early stopping, LR plateau decay,
best-weight checkpointing, and state resets between epochs."""

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from ..errors import InputError, NumericalError

log = logging.getLogger(__name__)


@dataclass
class TrainConfig:
    batch_size: int = 32
    learning_rate: float = 1e-3
    decay: float = 0.9
    epsilon: float = 1e-8
    epochs: int = 200
    early_stop_patience: int = 25
    plateau_patience: int = 10
    plateau_factor: float = 0.5
    val_fraction: float = 0.0
    shuffle: bool = True
    seed: int = 0


class RmsProp:
    """Per-parameter squared-gradient accumulator: w -= lr * g / sqrt(E[g^2] + eps)."""

    def __init__(self, params, learning_rate, decay=0.9, epsilon=1e-8):
        self.learning_rate = learning_rate
        self.decay = decay
        self.epsilon = epsilon
        self.accum = {name: np.zeros_like(arr) for name, arr in params}

    def step(self, params, grads):
        grads = dict(grads)
        for name, p in params:
            g = grads[name]
            acc = self.accum[name]
            acc *= self.decay
            acc += (1.0 - self.decay) * g * g
            p -= self.learning_rate * g / np.sqrt(acc + self.epsilon)


@dataclass
class TrainReport:
    history: dict = field(default_factory=lambda: {"loss": [], "mae": [], "lr": []})
    best_epoch: int = -1
    best_loss: float = math.inf
    stopped_epoch: int = -1
    diverged: bool = False
    optimizer: object = None  # final RmsProp state, persisted into checkpoints

    @property
    def epochs_run(self) -> int:
        return len(self.history["loss"])


def _epoch_metrics(net, X, y):
    _, pred = net.forward(X)
    resid = pred - y
    return float(np.sqrt(np.mean(resid**2))), float(np.mean(np.abs(resid)))


def train(net, X, y, config: TrainConfig = None) -> TrainReport:
    """Fit the scalar head of ``net`` to targets ``y`` over sequences ``X``.

    Tracks RMSE (the per-epoch loss l_e) and MAE on the validation split
    when one is configured, otherwise on the training data. The weights at
    the minimal tracked loss are restored into the net before returning. A
    non-finite loss aborts training, keeping the last good checkpoint.
    """
    if config is None:
        config = TrainConfig()
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64).ravel()
    if len(X) == 0:
        raise InputError("empty training set")
    if len(X) != len(y):
        raise InputError(f"feature/label mismatch: {len(X)} vs {len(y)}")

    rng = np.random.default_rng(np.random.SeedSequence(config.seed))
    n = len(X)
    n_val = int(round(config.val_fraction * n))
    if n_val > 0:
        perm = rng.permutation(n)
        val_idx, train_idx = perm[:n_val], perm[n_val:]
    else:
        train_idx = np.arange(n)
        val_idx = None
    if len(train_idx) == 0:
        raise InputError("val_fraction leaves no training samples")
    X_train, y_train = X[train_idx], y[train_idx]
    X_mon = X[val_idx] if val_idx is not None else X_train
    y_mon = y[val_idx] if val_idx is not None else y_train

    opt = RmsProp(net.parameters(), config.learning_rate, config.decay, config.epsilon)
    report = TrainReport(optimizer=opt)
    best_weights = net.get_weights()
    epochs_since_best = 0
    plateau_counter = 0
    k = max(1, config.batch_size)

    for epoch in range(config.epochs):
        order = rng.permutation(len(X_train)) if config.shuffle else np.arange(len(X_train))
        aborted = False
        for start in range(0, len(order), k):
            batch = order[start:start + k]
            loss, _ = net.loss_and_grads(X_train[batch], y_train[batch])
            if not math.isfinite(loss):
                if report.best_epoch < 0:
                    raise NumericalError(
                        f"non-finite loss {loss} at epoch {epoch} before any checkpoint"
                    )
                log.warning("non-finite loss at epoch %d; keeping best checkpoint", epoch)
                report.diverged = True
                aborted = True
                break
            opt.step(net.parameters(), net.gradients())
        if aborted:
            break
        net.reset_states()

        l_e, mae_e = _epoch_metrics(net, X_mon, y_mon)
        report.history["loss"].append(l_e)
        report.history["mae"].append(mae_e)
        report.history["lr"].append(opt.learning_rate)

        if l_e < report.best_loss:
            report.best_loss = l_e
            report.best_epoch = epoch
            best_weights = net.get_weights()
            epochs_since_best = 0
            plateau_counter = 0
        else:
            epochs_since_best += 1
            plateau_counter += 1
            if plateau_counter > config.plateau_patience:
                opt.learning_rate *= config.plateau_factor
                plateau_counter = 0
                log.debug("plateau: lr reduced to %g at epoch %d", opt.learning_rate, epoch)
            if epochs_since_best > config.early_stop_patience:
                report.stopped_epoch = epoch
                break

    net.set_weights(best_weights)
    return report
