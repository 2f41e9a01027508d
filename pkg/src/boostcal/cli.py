"""Command line entry point: ``boostcal <command> [flags]``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .boost import BaseSpec, BoostConfig
from .dataset import Dataset
from .harness import (CURVE_COLUMNS, CURVE_TRIAL_COLUMNS, DESK_GRID, METRIC_COLUMNS,
                      SUMMARY_COLUMNS, DataSource, ExperimentConfig, ModelBundle,
                      derive_seed, dump_json, fit_calibrator, load_model,
                      rows_to_csv, run_calibration_experiment, run_learning_curve,
                      save_model, train_bundle)
from .metrics import (brier_score, cross_entropy, prediction_histogram,
                      reliability_diagram, roc_auc)

LOSS_NAMES = {"exp": "exponential", "log": "logloss"}


def _int_list(text: str) -> tuple:
    try:
        return tuple(int(v) for v in text.replace(" ", "").split(",") if v)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers: {text!r}")


def _parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    g = common.add_argument_group("data")
    g.add_argument("--data", help="CSV or LIBSVM file")
    g.add_argument("--format", choices=("csv", "libsvm"), default="csv")
    g.add_argument("--label", default="-1",
                   help="label column name or 0-based index (CSV only)")
    g.add_argument("--positive", default=None, help="raw label treated as positive")
    g.add_argument("--synthetic", choices=("gaussians", "additive"),
                   help="use a generated task instead of --data")
    g.add_argument("--n-samples", type=int, default=10000)
    m = common.add_argument_group("model")
    m.add_argument("--seed", type=int, default=0)
    m.add_argument("--base", choices=("stump", "tree"), default="stump")
    m.add_argument("--depth", type=int, default=4, help="tree depth limit")
    m.add_argument("--loss", choices=("exp", "log"), default="exp")
    m.add_argument("--rounds", type=_int_list, default=DESK_GRID,
                   help="iteration grid, e.g. 2,4,8,16 (train uses the largest)")
    m.add_argument("--method", choices=("none", "logistic", "platt", "isotonic"),
                   default="none")
    m.add_argument("--folds", type=int, default=3)
    m.add_argument("--bins", type=int, default=10)
    m.add_argument("--hist-bins", type=int, default=20)
    m.add_argument("--model", help="model.json from train/calibrate")
    m.add_argument("--trials", type=int, default=10)
    m.add_argument("--sizes", type=_int_list, default=(32, 64, 128, 256, 512, 1024))
    m.add_argument("--clip-eps", type=float, default=1e-6)
    m.add_argument("--out", default=".", help="output directory")
    m.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="boostcal",
                                description="Boosted ensembles with calibrated probabilities.")
    sub = p.add_subparsers(dest="command", required=True)
    for name, help_ in [
        ("train", "train a boosted ensemble; writes model.json"),
        ("calibrate", "fit a calibrator (held-out data with --model, else CV)"),
        ("predict", "write predictions.csv for --data"),
        ("evaluate", "write metrics.csv for --data"),
        ("reliability", "write reliability.csv and histogram.csv for --data"),
        ("experiment", "compare RAW/PLATT/ISO/LOGIST/LOGLOSS; writes metrics.csv"),
        ("learning-curve", "Brier score against calibration-set size; writes curve.csv"),
    ]:
        sub.add_parser(name, parents=[common], help=help_)
    return p


def _label(text: str):
    return int(text) if text.lstrip("-").isdigit() else text


def _source(args) -> DataSource:
    return DataSource(path=args.data, format=args.format, label=_label(args.label),
                      positive_label=args.positive, synthetic=args.synthetic,
                      n_samples=args.n_samples)


def _load(args) -> Dataset:
    return _source(args).load(derive_seed(args.seed, 0xDA7A))


def _base(args) -> BaseSpec:
    return BaseSpec("stump") if args.base == "stump" else BaseSpec("tree", args.depth)


def _boost_config(args) -> BoostConfig:
    return BoostConfig(rounds=max(args.rounds), loss=LOSS_NAMES[args.loss], base=_base(args))


def _write(out: Path, name: str, text: str) -> None:
    out.mkdir(parents=True, exist_ok=True)
    (out / name).write_text(text)


def _model(args) -> ModelBundle:
    if not args.model:
        raise ValueError("--model is required for this command")
    return load_model(args.model)


def cmd_train(args, out: Path):
    d = _load(args)
    b = train_bundle(d, _boost_config(args), "none", args.folds, args.seed)
    save_model(b, out / "model.json")


def cmd_calibrate(args, out: Path):
    d = _load(args)
    if args.model:
        b = load_model(args.model)
        if args.method in ("platt", "isotonic"):
            cal = fit_calibrator(args.method, b.ensemble.normalized_score(d.features),
                                 d.labels)
        else:
            cal = None
        b = ModelBundle(b.ensemble, args.method, cal,
                        dict(b.metadata, calibration_data=d.name, n_calibration=len(d)))
    else:
        b = train_bundle(d, _boost_config(args), args.method, args.folds, args.seed)
    save_model(b, out / "model.json")


def cmd_predict(args, out: Path):
    b = _model(args)
    d = _load(args)
    p = b.predict(d.features)
    rows = [{"row": i, "probability": float(v), "label": int(y)}
            for i, (v, y) in enumerate(zip(p, d.labels))]
    _write(out, "predictions.csv", rows_to_csv(rows, ("row", "probability", "label")))


def _evaluation(b: ModelBundle, d: Dataset, clip_eps: float) -> dict:
    p = b.predict(d.features)
    res = {"dataset": d.name, "method": b.method, "n": len(d),
           "brier": brier_score(p, d.labels),
           "cross_entropy": cross_entropy(p, d.labels, clip_eps),
           "auc": None}
    if 0 < d.n_positive < len(d):
        res["auc"] = roc_auc(p, d.labels)
    return res


def cmd_evaluate(args, out: Path):
    b = _model(args)
    d = _load(args)
    res = _evaluation(b, d, args.clip_eps)
    cols = ("dataset", "method", "n", "brier", "cross_entropy", "auc")
    _write(out, "metrics.csv", rows_to_csv([res], cols))
    _write(out, "metrics.json", dump_json(res))


def cmd_reliability(args, out: Path):
    b = _model(args)
    d = _load(args)
    p = b.predict(d.features)
    rd = reliability_diagram(p, d.labels, args.bins)
    hist = prediction_histogram(p, args.hist_bins)
    _write(out, "reliability.csv", rd.to_csv())
    _write(out, "reliability.json", rd.to_json() + "\n")
    _write(out, "histogram.csv", hist.to_csv())
    _write(out, "histogram.json", hist.to_json() + "\n")


def _experiment_config(args) -> ExperimentConfig:
    methods = ("none", "logistic", "platt", "isotonic")
    return ExperimentConfig(data=_source(args), base=_base(args), grid=args.rounds,
                            methods=methods, include_logloss=True, folds=args.folds,
                            calibration_sizes=args.sizes, trials=args.trials,
                            seed=args.seed, clip_eps=args.clip_eps)


def cmd_experiment(args, out: Path):
    res = run_calibration_experiment(_experiment_config(args))
    _write(out, "metrics.csv", rows_to_csv(res["rows"], METRIC_COLUMNS))
    _write(out, "summary.csv", rows_to_csv(res["summary"], SUMMARY_COLUMNS))
    _write(out, "metrics.json", dump_json(res))


def cmd_learning_curve(args, out: Path):
    res = run_learning_curve(_experiment_config(args))
    _write(out, "curve.csv", rows_to_csv(res["aggregate"], CURVE_COLUMNS))
    _write(out, "curve_trials.csv", rows_to_csv(res["rows"], CURVE_TRIAL_COLUMNS))
    _write(out, "curve.json", dump_json(res))


COMMANDS = {
    "train": cmd_train,
    "calibrate": cmd_calibrate,
    "predict": cmd_predict,
    "evaluate": cmd_evaluate,
    "reliability": cmd_reliability,
    "experiment": cmd_experiment,
    "learning-curve": cmd_learning_curve,
}


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    out = Path(args.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
        COMMANDS[args.command](args, out)
    except Exception as exc:  # reported as JSON for scripted callers
        err = {"error": type(exc).__name__, "message": str(exc),
               "command": args.command}
        sys.stderr.write(json.dumps(err) + "\n")
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
