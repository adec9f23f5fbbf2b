"""CSV and JSON readers/writers for signals, features, labels, predictions.

Every emitted file carries the resolved config hash: CSVs in a leading
``# config_hash=...`` comment line, JSON files in a ``config_hash`` field.
Readers skip ``#`` comment lines.
"""

import csv
import json
from pathlib import Path

import numpy as np

from .errors import InputError
from .signal import MultiChannelSignal


def _data_lines(path):
    with open(path, newline="") as fh:
        for line in fh:
            if line.startswith("#") or not line.strip():
                continue
            yield line


def read_signal_csv(path, sample_rate_hz: float) -> MultiChannelSignal:
    """Load a raw-signal CSV: header row ``t,ch1,ch2,...`` or headerless
    numeric columns, one row per sample. A leading ``t`` column is ignored;
    the sample rate always comes from configuration."""
    rows = list(csv.reader(_data_lines(path)))
    if not rows:
        raise InputError(f"{path}: empty signal file")
    header = rows[0]
    has_header = any(not _is_number(tok) for tok in header)
    start = 1 if has_header else 0
    drop_first = has_header and header[0].strip().lower() in {"t", "time", "time_s"}
    data = []
    for i, row in enumerate(rows[start:], start=start):
        try:
            vals = [float(tok) for tok in row]
        except ValueError as exc:
            raise InputError(f"{path}: non-numeric value on line {i + 1}") from exc
        data.append(vals[1:] if drop_first else vals)
    arr = np.asarray(data, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[1] < 1:
        raise InputError(f"{path}: expected one column per channel")
    return MultiChannelSignal(arr.T, sample_rate_hz)


def _is_number(tok: str) -> bool:
    try:
        float(tok)
        return True
    except ValueError:
        return False


def write_signal_csv(path, signal: MultiChannelSignal, config_hash: str = ""):
    with open(path, "w", newline="") as fh:
        if config_hash:
            fh.write(f"# config_hash={config_hash}\n")
        writer = csv.writer(fh)
        writer.writerow(["t"] + [f"ch{i + 1}" for i in range(signal.channel_count)])
        t = np.arange(signal.length) / signal.sample_rate_hz
        for i in range(signal.length):
            writer.writerow([repr(float(t[i]))] + [repr(float(v)) for v in signal.channels[:, i]])


def write_features_csv(path, matrix, names, window_index=None, config_hash: str = ""):
    matrix = np.atleast_2d(matrix)
    if window_index is None:
        window_index = np.arange(len(matrix))
    with open(path, "w", newline="") as fh:
        if config_hash:
            fh.write(f"# config_hash={config_hash}\n")
        writer = csv.writer(fh)
        writer.writerow(["window_index"] + list(names))
        for idx, row in zip(window_index, matrix):
            writer.writerow([int(idx)] + [repr(float(v)) for v in row])


def read_features_csv(path):
    """Returns (matrix, names, window_index)."""
    rows = list(csv.reader(_data_lines(path)))
    if len(rows) < 2:
        raise InputError(f"{path}: need a header row and at least one feature row")
    header = rows[0]
    if header[0] != "window_index":
        raise InputError(f"{path}: first column must be window_index, got {header[0]!r}")
    names = tuple(header[1:])
    idx = []
    data = []
    for row in rows[1:]:
        idx.append(int(row[0]))
        data.append([float(v) for v in row[1:]])
    return np.asarray(data, dtype=np.float64), names, np.asarray(idx, dtype=np.int64)


def write_labels_csv(path, values, config_hash: str = ""):
    with open(path, "w", newline="") as fh:
        if config_hash:
            fh.write(f"# config_hash={config_hash}\n")
        fh.write("rul\n")
        for v in np.asarray(values).ravel():
            fh.write(f"{float(v)!r}\n")


def read_labels_csv(path) -> np.ndarray:
    lines = [ln.strip() for ln in _data_lines(path)]
    if not lines:
        raise InputError(f"{path}: empty label file")
    if lines[0] == "rul":
        lines = lines[1:]
    try:
        return np.asarray([float(v) for v in lines], dtype=np.float64)
    except ValueError as exc:
        raise InputError(f"{path}: labels must be numeric") from exc


def write_predictions_csv(path, window_index, y_true, y_pred, config_hash: str = ""):
    with open(path, "w", newline="") as fh:
        if config_hash:
            fh.write(f"# config_hash={config_hash}\n")
        writer = csv.writer(fh)
        writer.writerow(["window_index", "y_true", "y_pred"])
        for i, yt, yp in zip(window_index, y_true, y_pred):
            writer.writerow([int(i), repr(float(yt)), repr(float(yp))])


def write_history_csv(path, history: dict, config_hash: str = ""):
    with open(path, "w", newline="") as fh:
        if config_hash:
            fh.write(f"# config_hash={config_hash}\n")
        writer = csv.writer(fh)
        writer.writerow(["epoch", "loss", "mae", "lr"])
        for e, (loss, mae, lr) in enumerate(
            zip(history["loss"], history["mae"], history["lr"])
        ):
            writer.writerow([e, repr(float(loss)), repr(float(mae)), repr(float(lr))])


def write_metrics_json(path, payload: dict, config_hash: str = ""):
    doc = dict(payload)
    if config_hash:
        doc["config_hash"] = config_hash
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def read_json(path) -> dict:
    with open(path) as fh:
        return json.load(fh)


def write_snr_csv(path, pairs, config_hash: str = ""):
    with open(path, "w", newline="") as fh:
        if config_hash:
            fh.write(f"# config_hash={config_hash}\n")
        writer = csv.writer(fh)
        writer.writerow(["sigma", "snr_db"])
        for sigma, snr in pairs:
            writer.writerow([repr(float(sigma)), repr(float(snr))])


def ensure_dir(path) -> Path:
    p = Path(path)
    p.mkdir(parents=True, exist_ok=True)
    return p
