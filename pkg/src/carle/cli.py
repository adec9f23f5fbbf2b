"""Command-line harness: synth, extract, train, predict, ablate, noise,
crossdomain, snr-sweep.

Exit codes: 0 success, 2 usage/input error, 3 numerical failure.
"""

import argparse
import json
import sys

from . import dataio, pipeline
from .errors import InputError, NumericalError, ParameterError
from .metrics import MetricReport
from .pipeline import VARIANTS, ExperimentConfig


def _parse_set(values):
    overrides = {}
    for item in values or []:
        if "=" not in item:
            raise ParameterError(f"--set expects key=value, got {item!r}")
        key, raw = item.split("=", 1)
        try:
            overrides[key.strip()] = json.loads(raw)
        except json.JSONDecodeError:
            overrides[key.strip()] = raw
    return overrides


def _deep_merge(base: dict, extra: dict) -> dict:
    out = dict(base)
    for key, val in extra.items():
        if isinstance(val, dict) and isinstance(out.get(key), dict):
            out[key] = _deep_merge(out[key], val)
        else:
            out[key] = val
    return out


def resolve_config(args, checkpoint_path=None) -> ExperimentConfig:
    """Precedence: flags > --set overrides > config file > checkpoint > defaults."""
    base = ExperimentConfig().to_dict()
    if checkpoint_path is not None:
        base = _deep_merge(base, pipeline.config_from_checkpoint(checkpoint_path).to_dict())
    if getattr(args, "config", None):
        with open(args.config) as fh:
            try:
                base = _deep_merge(base, json.load(fh))
            except json.JSONDecodeError as exc:
                raise InputError(f"{args.config}: invalid JSON config: {exc}") from exc
    config = ExperimentConfig.from_dict(base)
    overrides = _parse_set(getattr(args, "set", None))
    if getattr(args, "profile", None):
        overrides["model.profile"] = args.profile
    if getattr(args, "seed", None) is not None:
        overrides["seed"] = args.seed
    if overrides:
        config = config.with_overrides(overrides)
    return config.validate()


def _add_common(parser):
    parser.add_argument("--config", help="JSON config file (nested sections)")
    parser.add_argument(
        "--set",
        action="append",
        metavar="KEY=VALUE",
        help="override one config key, e.g. --set training.epochs=50",
    )
    parser.add_argument("--seed", type=int, help="root seed (splits per subsystem)")
    parser.add_argument("--profile", help="model profile: xjtu, pronostia, toy")


def _load_features(args, config):
    """Feature matrix + labels from --features/--labels or a raw --signal."""
    if getattr(args, "features", None):
        X, names, idx = dataio.read_features_csv(args.features)
    elif getattr(args, "signal", None):
        sig = dataio.read_signal_csv(args.signal, config.sample_rate_hz)
        X, names, idx = pipeline.extract_matrix(sig, config)
    else:
        raise InputError("provide --features or --signal")
    if getattr(args, "labels", None):
        y = dataio.read_labels_csv(args.labels)
        if len(y) != len(X):
            raise InputError(f"label count {len(y)} does not match {len(X)} feature rows")
    else:
        y = pipeline.labels_for(config, len(X))
    return X, y, names, idx


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------


def cmd_synth(args) -> int:
    config = resolve_config(args)
    signal, meta = pipeline.synth_signal(config, rotation_hz=args.rotation_hz)
    dataio.write_signal_csv(args.out, signal, config.config_hash())
    if args.meta:
        dataio.write_metrics_json(args.meta, meta, config.config_hash())
    print(f"wrote {signal.channel_count}x{signal.length} samples to {args.out}")
    return 0


def cmd_extract(args) -> int:
    config = resolve_config(args)
    sig = dataio.read_signal_csv(args.signal, config.sample_rate_hz)
    X, names, idx = pipeline.extract_matrix(sig, config)
    dataio.write_features_csv(args.out, X, names, idx, config.config_hash())
    if args.labels_out:
        y = pipeline.labels_for(config, len(X))
        dataio.write_labels_csv(args.labels_out, y, config.config_hash())
    print(f"wrote {X.shape[0]} windows x {X.shape[1]} features to {args.out}")
    return 0


def _train_and_report(X, y, config, variant):
    model = pipeline.train_model(X, y, config, variant)
    y_pred = model.predict(X)
    report = MetricReport.compute(y, y_pred)
    return model, y_pred, report


def cmd_train(args) -> int:
    config = resolve_config(args)
    X, y, _, idx = _load_features(args, config)
    model, y_pred, report = _train_and_report(X, y, config, args.variant)

    out_dir = dataio.ensure_dir(args.out_dir)
    chash = config.config_hash()
    pipeline.save_model(out_dir / "checkpoint.npz", model, config)
    dataio.write_metrics_json(out_dir / "metrics.json", {"train": report.to_dict()}, chash)
    dataio.write_history_csv(out_dir / "history.csv", model.report.history, chash)
    dataio.write_predictions_csv(out_dir / "predictions.csv", idx, y, y_pred, chash)
    print(
        f"trained {args.variant} ({model.report.epochs_run} epochs): "
        f"train mae={report.mae:.5f} rmse={report.rmse:.5f} score={report.score:.4f}"
    )
    if model.report.diverged:
        print("warning: training aborted on non-finite loss; best checkpoint retained")
    return 0


def cmd_predict(args) -> int:
    config = resolve_config(args, checkpoint_path=args.checkpoint)
    model = pipeline.load_model(args.checkpoint)
    X, y, _, idx = _load_features(args, config)
    y_pred = model.predict(X)
    dataio.write_predictions_csv(args.out, idx, y, y_pred, config.config_hash())
    if args.metrics:
        report = MetricReport.compute(y, y_pred)
        dataio.write_metrics_json(args.metrics, {"eval": report.to_dict()}, config.config_hash())
        print(f"eval mae={report.mae:.5f} rmse={report.rmse:.5f} score={report.score:.4f}")
    print(f"wrote {len(y_pred)} predictions to {args.out}")
    return 0


def cmd_ablate(args) -> int:
    config = resolve_config(args)
    X, y, _, _ = _load_features(args, config)
    eval_X, eval_y = X, y
    if args.eval_features:
        eval_X, _, _ = dataio.read_features_csv(args.eval_features)
        if args.eval_labels:
            eval_y = dataio.read_labels_csv(args.eval_labels)
        else:
            eval_y = pipeline.labels_for(config, len(eval_X))

    out_dir = dataio.ensure_dir(args.out_dir)
    chash = config.config_hash()
    rows = []
    for variant in VARIANTS:
        model = pipeline.train_model(X, y, config, variant)
        y_pred = model.predict(eval_X)
        report = MetricReport.compute(eval_y, y_pred)
        pipeline.save_model(out_dir / f"{variant}.npz", model, config)
        rows.append((variant, report))
        print(
            f"{variant}: mae={report.mae:.5f} rmse={report.rmse:.5f} score={report.score:.4f}"
        )

    with open(out_dir / "ablation.csv", "w") as fh:
        fh.write(f"# config_hash={chash}\n")
        fh.write("variant,mae,rmse,score\n")
        for variant, report in rows:
            fh.write(f"{variant},{report.mae!r},{report.rmse!r},{report.score!r}\n")
    return 0


def cmd_noise(args) -> int:
    config = resolve_config(args, checkpoint_path=args.checkpoint)
    model = pipeline.load_model(args.checkpoint)
    sig = dataio.read_signal_csv(args.signal, config.sample_rate_hz)
    reports = pipeline.noise_reports(model, sig, config)
    dataio.write_metrics_json(args.out, reports, config.config_hash())
    for name in ("clean", "gaussian", "salt_pepper"):
        print(f"{name}: mae={reports[name]['mae']:.5f} rmse={reports[name]['rmse']:.5f}")
    return 0


def cmd_crossdomain(args) -> int:
    config = resolve_config(args, checkpoint_path=args.checkpoint)
    model = pipeline.load_model(args.checkpoint)
    source_X, _, _ = dataio.read_features_csv(args.source_features)
    target_X, _, _ = dataio.read_features_csv(args.target_features)
    if args.target_labels:
        target_y = dataio.read_labels_csv(args.target_labels)
    else:
        target_y = pipeline.labels_for(config, len(target_X))
    aligned, unaligned = pipeline.crossdomain_predictions(model, source_X, target_X, config)
    payload = {
        "aligned": MetricReport.compute(target_y, aligned).to_dict(),
        "unaligned": MetricReport.compute(target_y, unaligned).to_dict(),
        "adapt": {
            "space": config.adapt.space,
            "pca_components": config.adapt.pca_components,
            "ridge": config.adapt.ridge,
        },
    }
    dataio.write_metrics_json(args.out, payload, config.config_hash())
    print(
        f"aligned mae={payload['aligned']['mae']:.5f} vs "
        f"unaligned mae={payload['unaligned']['mae']:.5f}"
    )
    return 0


def cmd_snr_sweep(args) -> int:
    config = resolve_config(args)
    sig = dataio.read_signal_csv(args.signal, config.sample_rate_hz)
    sigmas = [float(tok) for tok in args.sigmas.split(",")]
    pairs = pipeline.snr_pairs(sig, sigmas, config)
    dataio.write_snr_csv(args.out, pairs, config.config_hash())
    for sigma, snr in pairs:
        print(f"sigma={sigma:g}: {snr:.3f} dB")
    return 0


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="carle", description="Bearing remaining-useful-life estimation harness"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic run-to-failure signal CSV")
    _add_common(p)
    p.add_argument("--out", required=True, help="output raw-signal CSV")
    p.add_argument("--meta", help="optional metadata JSON")
    p.add_argument("--rotation-hz", type=float, help="override the rotation frequency")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("extract", help="extract the per-window feature matrix")
    _add_common(p)
    p.add_argument("--signal", required=True, help="raw-signal CSV")
    p.add_argument("--out", required=True, help="output feature CSV")
    p.add_argument("--labels-out", help="also write aligned RUL labels")
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("train", help="train the model (network phase then forest phase)")
    _add_common(p)
    p.add_argument("--features", help="feature CSV input")
    p.add_argument("--labels", help="label CSV aligned with the features")
    p.add_argument("--signal", help="raw-signal CSV input (extraction runs first)")
    p.add_argument("--out-dir", required=True, help="artifact directory")
    p.add_argument("--variant", default="carle", choices=VARIANTS)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("predict", help="predict RUL with a trained checkpoint")
    _add_common(p)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--features", help="feature CSV input")
    p.add_argument("--labels", help="true labels for the prediction CSV")
    p.add_argument("--signal", help="raw-signal CSV input")
    p.add_argument("--out", required=True, help="output prediction CSV")
    p.add_argument("--metrics", help="optional metrics JSON")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("ablate", help="train and compare all four model variants")
    _add_common(p)
    p.add_argument("--features", help="feature CSV input")
    p.add_argument("--labels", help="label CSV")
    p.add_argument("--signal", help="raw-signal CSV input")
    p.add_argument("--eval-features", help="held-out feature CSV for the comparison")
    p.add_argument("--eval-labels", help="held-out label CSV")
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_ablate)

    p = sub.add_parser("noise", help="evaluate robustness to injected noise")
    _add_common(p)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--signal", required=True, help="clean raw-signal CSV")
    p.add_argument("--out", required=True, help="output metrics JSON")
    p.set_defaults(func=cmd_noise)

    p = sub.add_parser("crossdomain", help="aligned vs unaligned cross-domain evaluation")
    _add_common(p)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--source-features", required=True, help="training-domain feature CSV")
    p.add_argument("--target-features", required=True, help="target-domain feature CSV")
    p.add_argument("--target-labels", help="target-domain label CSV")
    p.add_argument("--out", required=True, help="output metrics JSON")
    p.set_defaults(func=cmd_crossdomain)

    p = sub.add_parser("snr-sweep", help="SNR versus smoothing width")
    _add_common(p)
    p.add_argument("--signal", required=True)
    p.add_argument("--sigmas", default="0.25,0.5,0.75,1.0,1.25,1.5,1.75,2.0")
    p.add_argument("--out", required=True, help="output CSV of (sigma, snr_db)")
    p.set_defaults(func=cmd_snr_sweep)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ParameterError, InputError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
