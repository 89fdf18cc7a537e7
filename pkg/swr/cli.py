"""
Command Line Module
=================

This module handles the command-line front end including:
- fit: train a model on a CSV dataset and write model, report and kernel files
- predict: apply a model to an input series
- simulate: generate a dataset from a sampled or given truth model
- study: run a grid of simulation cells
- evaluate: score a model on the training and test parts of a dataset

Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical failure.
"""

import argparse
import sys
from pathlib import Path
from typing import Any, Dict, Optional, Sequence

from config import (
    CRITERION,
    DW_ALPHA,
    DW_BOOTSTRAP,
    DW_TARGET,
    K_MAX,
    LOG_FILE,
    LOG_LEVEL,
    LOSS,
    MAX_AR_ORDER,
    MAX_LAG_FRACTION,
    SIM_INPUT_SEED,
    SIM_LENGTH,
    SIM_SPIKE_RATE,
    SIM_SPIKE_SCALE,
    SPLIT,
    STUDY_WORKERS,
)
from .autocorr import ArModel, fit_with_autocorr, transform_pair
from .base_manager import BaseManager
from .dataset_manager import DatasetFile, DatasetManager
from .errors import DataError, NumericalError, SwrError
from .logging import activity_log, setup_logging
from .metrics import EvalScores, evaluate, scores_table
from .model import SwrModel, TimeSeriesPair, predict
from .sim import (
    DESK_GRID,
    ErrorProcess,
    FileInput,
    GridSpec,
    SimSetup,
    StudyConfig,
    SyntheticInput,
    generate,
    run_study,
    sample_truth,
)
from .train import TrainConfig, fit
from .uncertainty import observed_information

ACTIVITY_FILE = "activity.jsonl"


class ArgumentParser(argparse.ArgumentParser):
    """Argument parser that reports usage errors with exit code 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _add_dataset_arguments(parser: argparse.ArgumentParser):
    parser.add_argument("data", help="CSV dataset")
    parser.add_argument("--input-column", default="x", help="Column of the input series (default x)")
    parser.add_argument("--target-column", default="y", help="Column of the target series (default y)")
    parser.add_argument("--time-column", default=None, help="Optional integer time column")
    parser.add_argument("--delimiter", default=",", help="Field separator (default comma)")
    parser.add_argument("--no-header", action="store_true", help="File has no header; columns are 0, 1, ...")


def _add_train_arguments(parser: argparse.ArgumentParser):
    parser.add_argument("--k-max", type=int, default=K_MAX, help=f"Maximum number of windows (default {K_MAX})")
    parser.add_argument("--criterion", choices=["aic", "bic"], default=CRITERION)
    parser.add_argument("--loss", choices=["nll", "rmse"], default=LOSS)
    parser.add_argument("--intercept", action="store_true", help="Fit a constant term")
    parser.add_argument("--fixed-k", action="store_true", help="Return the k-max model without criterion selection")
    parser.add_argument("--sequential", action="store_true", help="Optimize candidates one at a time")
    parser.add_argument("--max-lag", type=int, default=None,
                        help=f"Largest lag a window may reach (default {MAX_LAG_FRACTION:g} of the training length)")


def _add_autocorr_arguments(parser: argparse.ArgumentParser):
    parser.add_argument("--max-ar-order", type=int, default=MAX_AR_ORDER)
    parser.add_argument("--dw-alpha", type=float, default=DW_ALPHA, help="Durbin-Watson level triggering the correction")
    parser.add_argument("--dw-target", type=float, default=DW_TARGET, help="p-value the corrected residuals should reach")
    parser.add_argument("--n-boot", type=int, default=DW_BOOTSTRAP, help="Permutations per Durbin-Watson test")


def build_parser() -> ArgumentParser:
    parser = ArgumentParser(prog="swr", description="Gaussian sliding windows regression")
    parser.add_argument("--log-level", default=LOG_LEVEL, help=f"Console log level (default {LOG_LEVEL})")
    parser.add_argument("--log-file", default=LOG_FILE, help="Optional log file")
    subparsers = parser.add_subparsers(dest="command", required=True)

    fit_parser = subparsers.add_parser("fit", help="Train a model on a dataset")
    _add_dataset_arguments(fit_parser)
    _add_train_arguments(fit_parser)
    _add_autocorr_arguments(fit_parser)
    fit_parser.add_argument("--autocorr", action="store_true", help="Test residuals and apply the AR correction")
    fit_parser.add_argument("--split", type=float, default=SPLIT, help=f"Share of leading rows used (default {SPLIT})")
    fit_parser.add_argument("--seed", type=int, default=0, help="Seed of the Durbin-Watson permutations")
    fit_parser.add_argument("--uncertainty", action="store_true", help="Write standard errors")
    fit_parser.add_argument("--out-dir", default="swr_output")
    fit_parser.set_defaults(handler=cmd_fit)

    predict_parser = subparsers.add_parser("predict", help="Predict the target from an input series")
    predict_parser.add_argument("model", help="Model, fit report or truth JSON")
    _add_dataset_arguments(predict_parser)
    predict_parser.add_argument("--out-dir", default="swr_output")
    predict_parser.set_defaults(handler=cmd_predict)

    simulate_parser = subparsers.add_parser("simulate", help="Generate a synthetic dataset")
    truth_group = simulate_parser.add_mutually_exclusive_group()
    truth_group.add_argument("--k", type=int, default=1, help="Windows of a sampled truth model (default 1)")
    truth_group.add_argument("--truth", default=None, help="Model JSON used as the truth")
    simulate_parser.add_argument("--alpha", type=float, default=0.5, help="Noise level (default 0.5)")
    simulate_parser.add_argument("--phi", type=float, nargs="+", default=None, help="AR noise coefficients")
    simulate_parser.add_argument("--length", type=int, default=SIM_LENGTH)
    simulate_parser.add_argument("--spike-rate", type=float, default=SIM_SPIKE_RATE)
    simulate_parser.add_argument("--spike-scale", type=float, default=SIM_SPIKE_SCALE)
    simulate_parser.add_argument("--input-seed", type=int, default=SIM_INPUT_SEED)
    simulate_parser.add_argument("--input-file", default=None, help="CSV providing the input series")
    simulate_parser.add_argument("--input-column", default="x")
    simulate_parser.add_argument("--seed", type=int, default=0, help="Seed of the truth draw and the noise")
    simulate_parser.add_argument("--out-dir", default="swr_output")
    simulate_parser.set_defaults(handler=cmd_simulate)

    study_parser = subparsers.add_parser("study", help="Run a simulation grid")
    study_parser.add_argument("--grid", default=None, help="Grid JSON (default: the desk grid)")
    _add_train_arguments(study_parser)
    _add_autocorr_arguments(study_parser)
    study_parser.add_argument("--autocorr", choices=["auto", "on", "off"], default="auto",
                              help="Correction on AR cells only (auto), on all cells or never")
    study_parser.add_argument("--split", type=float, default=SPLIT)
    study_parser.add_argument("--seed", type=int, default=None, help="Seed base (overrides the grid file)")
    study_parser.add_argument("--workers", type=int, default=STUDY_WORKERS)
    study_parser.add_argument("--out-dir", default="swr_output")
    study_parser.set_defaults(handler=cmd_study)

    evaluate_parser = subparsers.add_parser("evaluate", help="Score a model on a dataset")
    evaluate_parser.add_argument("model", help="Model, fit report or truth JSON")
    _add_dataset_arguments(evaluate_parser)
    evaluate_parser.add_argument("--split", type=float, default=SPLIT)
    evaluate_parser.add_argument("--out-dir", default="swr_output")
    evaluate_parser.set_defaults(handler=cmd_evaluate)
    return parser


def _dataset(args) -> DatasetFile:
    return DatasetFile(
        path=args.data,
        input_column=args.input_column,
        target_column=args.target_column,
        time_column=args.time_column,
        delimiter=args.delimiter,
        header=not args.no_header,
    )


def _train_config(args) -> TrainConfig:
    try:
        return TrainConfig(
            k_max=args.k_max,
            criterion=args.criterion,
            loss=args.loss,
            intercept=args.intercept,
            select_k=not args.fixed_k,
            max_lag=args.max_lag,
            concurrent=not args.sequential,
        )
    except ValueError as e:
        raise DataError(f"Invalid training settings: {e}") from e


def _record(args) -> Path:
    return BaseManager.ensure_dir(args.out_dir) / ACTIVITY_FILE


def cmd_fit(args) -> int:
    """Fits a model; writes model.json, report.json, kernels.csv and optionally uncertainty.json."""
    record = _record(args)
    out_dir = Path(args.out_dir)
    data = DatasetManager.read_dataset(_dataset(args))
    train = data.head(data.split_point(args.split))
    config = _train_config(args)
    activity_log(f"Fitting {len(train)} of {len(data)} rows from {args.data}", 0, record)

    if args.autocorr:
        report = fit_with_autocorr(train, config, max_order=args.max_ar_order, dw_alpha=args.dw_alpha,
                                   dw_target=args.dw_target, n_boot=args.n_boot, seed=args.seed)
    else:
        report = fit(train, config)

    if args.uncertainty:
        # standard errors belong to the series the selected model was fitted on
        model = report.selected.model
        report.standard_errors = observed_information(model, report.training_data, config.variance_floor,
                                                      start=max(report.lag_limit, model.max_lag + 1))

    BaseManager.write_json(out_dir / "model.json", report.final_model.to_dict())
    BaseManager.write_json(out_dir / "report.json", report.to_dict())
    DatasetManager.write_kernels(out_dir / "kernels.csv", report.final_model)
    if report.standard_errors is not None:
        BaseManager.write_json(out_dir / "uncertainty.json", report.standard_errors.to_dict())

    print(report.summary_table())
    if report.standard_errors is not None:
        print()
        print(report.standard_errors.table())
    activity_log(f"Fit finished with k={report.selected_k}, outputs in {out_dir}", 3, record)
    return 0


def cmd_predict(args) -> int:
    """Writes predictions.csv with time, x, y (when present), y_hat and valid columns."""
    record = _record(args)
    model = DatasetManager.load_model(args.model)
    columns = DatasetManager.read_prediction_input(_dataset(args))
    prediction = predict(model, columns["x"])
    path = DatasetManager.write_predictions(Path(args.out_dir) / "predictions.csv", columns["index"],
                                            columns["x"], prediction, columns["y"])
    activity_log(f"Wrote {int(prediction.valid.sum())} valid predictions to {path}", 3, record)
    return 0


def cmd_simulate(args) -> int:
    """Writes dataset.csv and truth.json."""
    record = _record(args)
    out_dir = Path(args.out_dir)
    if args.truth is not None:
        truth = DatasetManager.load_model(args.truth)
    else:
        truth = sample_truth(args.k, seed=args.seed)
    process = ErrorProcess() if not args.phi else ErrorProcess(kind="ar", phi=tuple(args.phi))
    if args.input_file is not None:
        input_spec = FileInput(path=args.input_file, column=args.input_column)
    else:
        input_spec = SyntheticInput(args.length, args.spike_rate, args.spike_scale, args.input_seed)
    try:
        setup = SimSetup(truth=truth, alpha=args.alpha, error_process=process, seed=args.seed,
                         input_spec=input_spec)
    except ValueError as e:
        raise DataError(f"Invalid simulation settings: {e}") from e

    simulated = generate(setup)
    DatasetManager.write_dataset(out_dir / "dataset.csv", simulated.frame())
    BaseManager.write_json(out_dir / "truth.json", simulated.truth_dict())
    activity_log(
        f"Simulated {len(simulated.data)} points (k={truth.k}, alpha={args.alpha:g}, {process.label})", 3, record
    )
    return 0


def cmd_study(args) -> int:
    """Writes study.csv and study_summary.json."""
    record = _record(args)
    grid = DESK_GRID if args.grid is None else GridSpec.from_dict(BaseManager.read_json(args.grid))
    if args.seed is not None:
        grid = GridSpec.from_dict({**grid.to_dict(), "seed_base": args.seed})
    autocorr = {"auto": None, "on": True, "off": False}[args.autocorr]
    config = StudyConfig(
        train=_train_config(args),
        split=args.split,
        autocorr=autocorr,
        max_ar_order=args.max_ar_order,
        dw_alpha=args.dw_alpha,
        dw_target=args.dw_target,
        n_boot=args.n_boot,
        workers=args.workers,
    )
    cells = grid.cells()
    activity_log(f"Running a study of {len(cells)} cells", 0, record)
    report = run_study(cells, config, grid)
    paths = report.write(args.out_dir)
    aggregates = report.aggregates()
    for entry in aggregates["by_noise_level"]:
        print(
            f"k_gt={entry['k_gt']} alpha={entry['alpha']:<5g} n={entry['n']:<3} "
            f"overlap={_fmt(entry['mean_overlap'])} R2={_fmt(entry['mean_r2'])} bound={_fmt(entry['mean_r2_bound'])}"
        )
    status = 1 if aggregates["n_failed"] else 3
    activity_log(f"Study finished, {aggregates['n_failed']} failed cells, rows in {paths['rows']}", status, record)
    return 0


def _fmt(value: Optional[float]) -> str:
    return "n/a" if value is None else f"{value:.4f}"


def _transformed_model(model: SwrModel, ar: ArModel) -> SwrModel:
    if model.intercept is None:
        return model
    return SwrModel(windows=model.windows, betas=model.betas, intercept=model.intercept * (1.0 - sum(ar.phi)),
                    error_sd=model.error_sd)


def _report_ar(path) -> Optional[ArModel]:
    document = BaseManager.read_json(path)
    autocorr = document.get("autocorr") if isinstance(document, dict) else None
    if not autocorr or not autocorr.get("applied") or not autocorr.get("phi"):
        return None
    return ArModel(phi=tuple(autocorr["phi"]), innovation_sd=float(autocorr.get("innovation_sd") or 0.0))


def _split_scores(model: SwrModel, data: TimeSeriesPair, cut: int) -> Dict[str, EvalScores]:
    """Scores the rows before cut as train and the rows from cut on as test; the prediction spans both."""
    scores: Dict[str, EvalScores] = {}
    prediction = predict(model, data.x)
    if cut > prediction.start + 1:
        scores["train"] = evaluate(data.y[:cut], prediction.values[:cut])
    if cut < len(data):
        scores["test"] = evaluate(data.y[cut:], prediction.values[cut:])
    return scores


def cmd_evaluate(args) -> int:
    """
    Writes scores.json with train and test scores; a fit report with an applied
    autocorrelation correction also gets scores on the transformed series.
    """
    record = _record(args)
    model = DatasetManager.load_model(args.model)
    data = DatasetManager.read_dataset(_dataset(args))
    cut = data.split_point(args.split)
    scores = _split_scores(model, data, cut)
    if not scores:
        raise DataError("Nothing to score: no predictable training point and no test point")

    ar = _report_ar(args.model)
    output: Dict[str, Any] = {"split": args.split, **{name: s.to_dict() for name, s in scores.items()}}
    table = dict(scores)
    if ar is not None:
        transformed = transform_pair(data, ar)
        # the transform drops the first m rows
        transformed_scores = _split_scores(_transformed_model(model, ar), transformed, max(cut - ar.order, 0))
        output["transformed"] = {name: s.to_dict() for name, s in transformed_scores.items()}
        table.update({f"{name} (transformed)": s for name, s in transformed_scores.items()})

    path = BaseManager.write_json(Path(args.out_dir) / "scores.json", output)
    print(scores_table(table))
    activity_log(f"Scores written to {path}", 3, record)
    return 0


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    setup_logging(args.log_level.upper(), args.log_file)
    record = None
    try:
        record = _record(args)
        return args.handler(args)
    except SwrError as e:
        activity_log(f"{args.command} failed: {e}", 2, record)
        return e.exit_code
    except ValueError as e:
        activity_log(f"{args.command} failed: {e}", 2, record)
        return DataError.exit_code
    except ArithmeticError as e:
        activity_log(f"{args.command} failed: {e}", 2, record)
        return NumericalError.exit_code


if __name__ == "__main__":
    sys.exit(main())
