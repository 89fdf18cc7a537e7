"""
Training Module
=================

This module fits sliding windows regression models by incremental window addition:
- Iteration 1 starts a single window at beta = delta = sigma = 1
- Every later iteration adds one window, trying several start locations for it
  (midpoints between previous windows, lag 0, and the last location plus each offset)
  while the previous weights and widths are spread evenly over all windows
- Each start is optimized jointly over all parameters; the best start by the
  configured information criterion is kept
- The iteration with the lowest criterion is reported as the fitted model

No window may reach beyond a lag limit (a share of the series length by
default), and every candidate of every iteration is scored on the same time
points, from the lag limit to the end of the series, so likelihoods and
criteria are comparable across supports and across k.

Candidates of one iteration are independent and may be optimized concurrently.
"""

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
from threadedreturn import ThreadWithReturnValue

from config import (
    CONCURRENT_CANDIDATES,
    CRITERION,
    DELTA_MERGE_TOLERANCE,
    FIRST_WINDOW_START,
    FTOL_ABS,
    INCLUDE_MIDPOINTS,
    INCLUDE_ZERO_START,
    INTERCEPT,
    K_MAX,
    LOSS,
    MAX_EVALS_PER_DIM,
    MAX_LAG_FRACTION,
    VARIANCE_FLOOR,
    ZETA_OFFSETS,
)
from .errors import InsufficientDataError, OptimizerError, TrainingError
from .kernel import COVERAGE_SIGMAS, WindowParams, build_kernel, build_kernels
from .logging import logger
from .model import (
    SwrModel,
    TimeSeriesPair,
    aic_value,
    bic_value,
    gaussian_log_likelihood,
    predict_kernels,
    residuals,
)
from .optimize import OptProblem, minimize


class Criterion(str, Enum):
    AIC = "aic"
    BIC = "bic"


class Loss(str, Enum):
    NLL = "nll"
    RMSE = "rmse"


@dataclass(frozen=True)
class TrainConfig:
    """
    Settings for the incremental training procedure.

    Attributes:
        k_max: Maximum number of windows.
        criterion: Information criterion for candidate and iteration selection.
        loss: Optimizer objective, negative log-likelihood or RMSE.
        zeta_offsets: Offsets added to the last window location to form new starts.
        include_zero_start: Try lag 0 as a new window location.
        include_midpoints: Try midpoints between consecutive windows.
        intercept: Fit a constant term.
        select_k: Pick k by the criterion; when False the k_max iteration is returned.
        max_lag: Largest lag a window may reach; None derives it from max_lag_fraction.
        max_lag_fraction: Share of the training series length used as lag limit.
        ftol_abs: Absolute objective tolerance of the minimizer.
        max_evals_per_dim: Minimizer budget per parameter.
        variance_floor: Lower bound on the profiled error variance.
        concurrent: Optimize the candidates of one iteration in parallel threads.
    """

    k_max: int = K_MAX
    criterion: Criterion = Criterion(CRITERION)
    loss: Loss = Loss(LOSS)
    zeta_offsets: Tuple[float, ...] = tuple(ZETA_OFFSETS)
    include_zero_start: bool = INCLUDE_ZERO_START
    include_midpoints: bool = INCLUDE_MIDPOINTS
    intercept: bool = INTERCEPT
    select_k: bool = True
    max_lag: Optional[int] = None
    max_lag_fraction: float = MAX_LAG_FRACTION
    ftol_abs: float = FTOL_ABS
    max_evals_per_dim: int = MAX_EVALS_PER_DIM
    variance_floor: float = VARIANCE_FLOOR
    concurrent: bool = CONCURRENT_CANDIDATES

    def __post_init__(self):
        object.__setattr__(self, "criterion", Criterion(str(getattr(self.criterion, "value", self.criterion)).lower()))
        object.__setattr__(self, "loss", Loss(str(getattr(self.loss, "value", self.loss)).lower()))
        object.__setattr__(self, "zeta_offsets", tuple(float(z) for z in self.zeta_offsets))
        if int(self.k_max) < 1:
            raise ValueError(f"k_max must be at least 1, got {self.k_max}")
        if not self.zeta_offsets or any(not z > 0 for z in self.zeta_offsets):
            raise ValueError(f"zeta_offsets must be non-empty and positive, got {self.zeta_offsets}")
        if not self.ftol_abs > 0:
            raise ValueError(f"ftol_abs must be positive, got {self.ftol_abs}")
        if self.max_lag is not None and int(self.max_lag) < 0:
            raise ValueError(f"max_lag must be non-negative, got {self.max_lag}")
        if not 0 < self.max_lag_fraction < 1:
            raise ValueError(f"max_lag_fraction must be in (0, 1), got {self.max_lag_fraction}")

    def lag_limit(self, n_points: int) -> int:
        """Largest lag a window may reach on a training series of n_points."""
        if self.max_lag is not None:
            return int(self.max_lag)
        return int(math.floor(self.max_lag_fraction * n_points))

    def to_dict(self) -> Dict[str, Any]:
        return {
            "k_max": int(self.k_max),
            "criterion": self.criterion.value,
            "loss": self.loss.value,
            "zeta_offsets": list(self.zeta_offsets),
            "include_zero_start": self.include_zero_start,
            "include_midpoints": self.include_midpoints,
            "intercept": self.intercept,
            "select_k": self.select_k,
            "max_lag": self.max_lag,
            "max_lag_fraction": self.max_lag_fraction,
            "ftol_abs": self.ftol_abs,
        }


@dataclass
class CandidateRecord:
    """Outcome of optimizing one start point."""

    init_delta: float
    start: List[float]
    theta: Optional[List[float]] = None
    model: Optional[SwrModel] = None
    log_likelihood: Optional[float] = None
    aic: Optional[float] = None
    bic: Optional[float] = None
    n_valid: Optional[int] = None
    n_evals: int = 0
    converged: bool = False
    error: Optional[str] = None

    def criterion_value(self, criterion: Criterion) -> float:
        if self.error is not None:
            return math.inf
        return self.aic if criterion is Criterion.AIC else self.bic

    def to_dict(self) -> Dict[str, Any]:
        return {
            "init_delta": self.init_delta,
            "start": self.start,
            "model": None if self.model is None else self.model.to_dict(),
            "log_likelihood": self.log_likelihood,
            "aic": self.aic,
            "bic": self.bic,
            "n_valid": self.n_valid,
            "n_evals": self.n_evals,
            "converged": self.converged,
            "error": self.error,
        }


@dataclass
class IterationRecord:
    """All candidates of one iteration and the index of the chosen one."""

    iteration: int
    candidates: List[CandidateRecord]
    best: int

    @property
    def chosen(self) -> CandidateRecord:
        return self.candidates[self.best]

    @property
    def model(self) -> SwrModel:
        return self.chosen.model

    @property
    def n_evals(self) -> int:
        return sum(c.n_evals for c in self.candidates)

    def to_dict(self) -> Dict[str, Any]:
        chosen = self.chosen
        return {
            "iteration": self.iteration,
            "k": chosen.model.k,
            "init_delta": chosen.init_delta,
            "model": chosen.model.to_dict(),
            "log_likelihood": chosen.log_likelihood,
            "aic": chosen.aic,
            "bic": chosen.bic,
            "n_valid": chosen.n_valid,
            "n_evals": self.n_evals,
            "candidates": [c.to_dict() for c in self.candidates],
        }


@dataclass
class FitReport:
    """
    Training trace and result.

    Attributes:
        config: Settings used.
        n_points: Length of the training series.
        lag_limit: Largest lag a window may reach; likelihoods and criteria are
            computed on positions lag_limit..n_points-1.
        iterations: One record per iteration.
        selected_iteration: Zero-based index of the reported iteration.
        final_model: Model of the selected iteration.
        standard_errors: Optional UncertaintyReport.
        autocorr_info: Optional AutocorrInfo.
        training_data: Series the final model was fitted on (transformed when an
            autocorrelation correction was applied). Not serialized.
    """

    config: TrainConfig
    n_points: int
    lag_limit: Optional[int] = None
    iterations: List[IterationRecord] = field(default_factory=list)
    selected_iteration: Optional[int] = None
    final_model: Optional[SwrModel] = None
    standard_errors: Optional[Any] = None
    autocorr_info: Optional[Any] = None
    training_data: Optional[TimeSeriesPair] = field(default=None, repr=False)

    @property
    def selected_k(self) -> Optional[int]:
        return None if self.final_model is None else self.final_model.k

    @property
    def selected(self) -> Optional[CandidateRecord]:
        if self.selected_iteration is None:
            return None
        return self.iterations[self.selected_iteration].chosen

    def to_dict(self) -> Dict[str, Any]:
        selected = self.selected
        return {
            "config": self.config.to_dict(),
            "n_points": self.n_points,
            "lag_limit": self.lag_limit,
            "selected_k": self.selected_k,
            "selected_iteration": None if self.selected_iteration is None else self.selected_iteration + 1,
            "criterion": self.config.criterion.value,
            "criterion_value": None if selected is None else selected.criterion_value(self.config.criterion),
            "model": None if self.final_model is None else self.final_model.to_dict(),
            "iterations": [it.to_dict() for it in self.iterations],
            "standard_errors": None if self.standard_errors is None else self.standard_errors.to_dict(),
            "autocorr": None if self.autocorr_info is None else self.autocorr_info.to_dict(),
        }

    def summary_table(self) -> str:
        """Fixed-width table of k, log-likelihood, AIC, BIC and parameters per iteration."""
        lines = [f"{'':1} {'k':>2} {'log L':>14} {'AIC':>14} {'BIC':>14}  windows (beta, delta, sigma)"]
        for position, it in enumerate(self.iterations):
            chosen = it.chosen
            marker = "*" if position == self.selected_iteration else " "
            windows = "; ".join(
                f"({b:.4g}, {w.params.delta:.4g}, {w.params.sigma:.4g})"
                for b, w in zip(chosen.model.betas, chosen.model.windows)
            )
            if chosen.model.intercept is not None:
                windows += f"; intercept {chosen.model.intercept:.4g}"
            lines.append(
                f"{marker:1} {chosen.model.k:>2} {chosen.log_likelihood:>14.4f} "
                f"{chosen.aic:>14.4f} {chosen.bic:>14.4f}  {windows}"
            )
        return "\n".join(lines)


def pack_theta(betas: Sequence[float], deltas: Sequence[float], sigmas: Sequence[float],
               intercept: Optional[float] = None) -> np.ndarray:
    parts = [np.asarray(betas, dtype=float), np.asarray(deltas, dtype=float), np.asarray(sigmas, dtype=float)]
    if intercept is not None:
        parts.append(np.array([float(intercept)]))
    return np.concatenate(parts)


def unpack_theta(theta: np.ndarray, k: int, intercept: bool) -> Tuple[np.ndarray, np.ndarray, np.ndarray, Optional[float]]:
    theta = np.asarray(theta, dtype=float)
    return theta[:k], theta[k:2 * k], theta[2 * k:3 * k], (float(theta[3 * k]) if intercept else None)


def canonical_model(theta: np.ndarray, k: int, intercept: bool,
                    merge_tolerance: float = DELTA_MERGE_TOLERANCE) -> SwrModel:
    """
    Turns a raw parameter vector into a valid model.

    Windows are sorted by location; windows whose locations lie within
    merge_tolerance of each other are merged (betas summed, location and width
    of the member with the larger beta kept).
    """
    betas, deltas, sigmas, c = unpack_theta(theta, k, intercept)
    order = np.argsort(deltas, kind="stable")
    groups: List[List[int]] = []
    for j in order:
        if groups and deltas[j] - deltas[groups[-1][-1]] < merge_tolerance:
            groups[-1].append(int(j))
        else:
            groups.append([int(j)])

    merged_betas, merged_deltas, merged_sigmas = [], [], []
    for group in groups:
        lead = max(group, key=lambda j: (betas[j], -group.index(j)))
        merged_betas.append(float(sum(betas[j] for j in group)))
        merged_deltas.append(float(deltas[lead]))
        merged_sigmas.append(float(sigmas[lead]))
    return SwrModel.from_params(merged_betas, merged_deltas, merged_sigmas, intercept=c)


class SwrObjective:
    """
    Training loss of a k-window parameter vector, scored from a fixed start position.

    Evaluations whose windows reach beyond the start position raise
    InsufficientDataError, which the minimizer treats as +inf.
    """

    def __init__(self, data: TimeSeriesPair, k: int, config: TrainConfig, start: Optional[int] = None):
        self.x = data.x
        self.y = data.y
        self.k = k
        self.config = config
        self.start = config.lag_limit(len(data)) if start is None else int(start)

    def __call__(self, theta: np.ndarray) -> float:
        betas, deltas, sigmas, c = unpack_theta(theta, self.k, self.config.intercept)
        kernels = build_kernels(deltas, sigmas)
        reach = max(kernel.s_max for kernel in kernels)
        if reach > self.start:
            raise InsufficientDataError(f"Window support reaches lag {reach}, beyond the limit {self.start}")
        prediction = predict_kernels(kernels, betas, self.x, c)
        errors = self.y[self.start:] - prediction.values[self.start:]
        if self.config.loss is Loss.RMSE:
            if errors.size < 1:
                raise InsufficientDataError("No predictable time point")
            return math.sqrt(float(np.dot(errors, errors)) / errors.size)
        return -gaussian_log_likelihood(errors, self.config.variance_floor)


def evaluate_model(model: SwrModel, data: TimeSeriesPair, start: Optional[int] = None,
                   variance_floor: float = VARIANCE_FLOOR) -> Dict[str, float]:
    """
    Computes log-likelihood, AIC, BIC and error standard deviation from position start.

    Args:
        model: Model to score.
        data: Training series.
        start: First scored position (default: the model's predictable range).
        variance_floor: Floor of the profiled error variance.

    Returns:
        dict: keys log_likelihood, aic, bic, n_valid, error_sd
    """
    errors = residuals(model, data, start)
    loglik = gaussian_log_likelihood(errors, variance_floor)
    has_intercept = model.intercept is not None
    return {
        "log_likelihood": loglik,
        "aic": aic_value(loglik, model.k, has_intercept),
        "bic": bic_value(loglik, model.k, errors.size, has_intercept),
        "n_valid": int(errors.size),
        "error_sd": math.sqrt(float(np.dot(errors, errors)) / errors.size),
    }


def candidate_locations(previous: SwrModel, config: TrainConfig, max_lag: Optional[float] = None) -> List[float]:
    """
    Start locations for the next window: midpoints of consecutive windows,
    lag 0, and the last location plus each offset, without duplicates.
    Locations beyond max_lag are left out.
    """
    deltas = [float(d) for d in previous.deltas]
    locations: List[float] = []
    if config.include_midpoints and len(deltas) >= 2:
        locations.extend((a + b) / 2.0 for a, b in zip(deltas, deltas[1:]))
    if config.include_zero_start:
        locations.append(0.0)
    locations.extend(deltas[-1] + zeta for zeta in config.zeta_offsets)

    unique: List[float] = []
    for location in locations:
        if max_lag is not None and location > max_lag:
            continue
        if location not in unique:
            unique.append(location)
    return unique


def candidate_starts(previous: SwrModel, config: TrainConfig,
                     max_lag: Optional[int] = None) -> List[Tuple[float, np.ndarray]]:
    """
    Start vectors for the next iteration, one per candidate location.

    With max_lag given, starts whose new window would reach beyond it are skipped.
    """
    count = previous.k + 1
    beta0 = float(np.sum(previous.betas)) / count
    sigma0 = float(np.sum(previous.sigmas)) / count
    intercept0 = None
    if config.intercept:
        intercept0 = 0.0 if previous.intercept is None else previous.intercept
    starts = []
    for location in candidate_locations(previous, config, max_lag):
        deltas = list(previous.deltas) + [location]
        if max_lag is not None and max(k.s_max for k in build_kernels(deltas, [sigma0] * count)) > max_lag:
            logger.debug(f"Start location {location:g} reaches beyond lag {max_lag}; skipped")
            continue
        starts.append((location, pack_theta([beta0] * count, deltas, [sigma0] * count, intercept0)))
    return starts


def parameter_bounds(k: int, intercept: bool, max_lag: int) -> Tuple[np.ndarray, np.ndarray]:
    """Box bounds: betas >= 0, deltas in [0, max_lag], sigmas in [0, max_lag / 3], free intercept."""
    dim = 3 * k + (1 if intercept else 0)
    lower = np.zeros(dim)
    upper = np.full(dim, np.inf)
    upper[k:2 * k] = max_lag
    upper[2 * k:3 * k] = max_lag / COVERAGE_SIGMAS
    if intercept:
        lower[-1] = -np.inf
    return lower, upper


def _run_candidate(data: TimeSeriesPair, k: int, init_delta: float, start: np.ndarray,
                   config: TrainConfig, max_lag: int) -> CandidateRecord:
    record = CandidateRecord(init_delta=float(init_delta), start=[float(v) for v in start])
    dim = start.size
    lower, upper = parameter_bounds(k, config.intercept, max_lag)
    problem = OptProblem(
        dim=dim,
        objective=SwrObjective(data, k, config, start=max_lag),
        lower_bounds=lower,
        upper_bounds=upper,
        ftol_abs=config.ftol_abs,
        max_evals=config.max_evals_per_dim * dim,
    )
    try:
        result = minimize(problem, start)
        model = canonical_model(result.x, k, config.intercept)
        scores = evaluate_model(model, data, max_lag, config.variance_floor)
    except (OptimizerError, ArithmeticError, ValueError) as e:
        record.error = str(e)
        logger.warning(f"Candidate with start location {init_delta:g} failed: {e}")
        return record

    record.theta = [float(v) for v in result.x]
    record.model = model.with_error_sd(scores["error_sd"])
    record.log_likelihood = scores["log_likelihood"]
    record.aic = scores["aic"]
    record.bic = scores["bic"]
    record.n_valid = scores["n_valid"]
    record.n_evals = result.n_evals
    record.converged = result.converged
    return record


def _run_candidates(data: TimeSeriesPair, k: int, starts: List[Tuple[float, np.ndarray]],
                    config: TrainConfig, max_lag: int) -> List[CandidateRecord]:
    if not config.concurrent or len(starts) == 1:
        return [_run_candidate(data, k, location, start, config, max_lag) for location, start in starts]

    threads = [
        ThreadWithReturnValue(target=_run_candidate, args=(data, k, location, start, config, max_lag))
        for location, start in starts
    ]
    for thread in threads:
        thread.start()
    records = []
    for (location, start), thread in zip(starts, threads):
        record = thread.join()
        if record is None:
            record = CandidateRecord(init_delta=float(location), start=[float(v) for v in start],
                                     error="candidate thread terminated without a result")
        records.append(record)
    return records


def _select(records: Sequence, criterion: Criterion) -> int:
    values = [r.criterion_value(criterion) for r in records]
    return int(np.argmin(values))


def fit(data: TimeSeriesPair, config: Optional[TrainConfig] = None) -> FitReport:
    """
    Trains a sliding windows regression model.

    Every candidate is scored on the time points from the lag limit
    config.lag_limit(len(data)) to the end of the series.

    Args:
        data: Training input and target series.
        config: Training settings (defaults from config.py).

    Returns:
        FitReport: Per-iteration trace, selected model and criterion values.

    Raises:
        InsufficientDataError: If the series is too short for the first start window
            or leaves fewer than two scored points after the lag limit.
        TrainingError: If every candidate of an iteration failed; carries the partial report.
    """
    config = config or TrainConfig()
    first_kernel = build_kernel(WindowParams(FIRST_WINDOW_START, 1.0))
    max_lag = config.lag_limit(len(data))
    if max_lag < first_kernel.s_max or len(data) - max_lag < 2:
        raise InsufficientDataError(
            f"Training series of length {len(data)} is too short: the lag limit {max_lag} must cover lag "
            f"{first_kernel.s_max} and leave at least 2 scored points"
        )

    report = FitReport(config=config, n_points=len(data), lag_limit=max_lag, training_data=data)
    for iteration in range(1, int(config.k_max) + 1):
        if iteration == 1:
            intercept0 = 0.0 if config.intercept else None
            starts = [(FIRST_WINDOW_START, pack_theta([1.0], [FIRST_WINDOW_START], [1.0], intercept0))]
        else:
            starts = candidate_starts(report.iterations[-1].model, config, max_lag)
            if not starts:
                logger.warning(f"No start for window {iteration} fits within lag {max_lag}; stopping at k={iteration - 1}")
                break

        k = (starts[0][1].size - (1 if config.intercept else 0)) // 3
        records = _run_candidates(data, k, starts, config, max_lag)
        if all(r.error is not None for r in records):
            raise TrainingError(
                f"All {len(records)} candidates of iteration {iteration} failed: {records[0].error}",
                partial_report=report,
            )

        best = _select(records, config.criterion)
        record = IterationRecord(iteration=iteration, candidates=records, best=best)
        report.iterations.append(record)
        chosen = record.chosen
        logger.info(
            f"Iteration {iteration}: k={chosen.model.k}, start delta={chosen.init_delta:g}, "
            f"logL={chosen.log_likelihood:.4f}, AIC={chosen.aic:.4f}, BIC={chosen.bic:.4f}, "
            f"evaluations={record.n_evals}"
        )

    if config.select_k:
        report.selected_iteration = _select([it.chosen for it in report.iterations], config.criterion)
    else:
        report.selected_iteration = len(report.iterations) - 1
    report.final_model = report.iterations[report.selected_iteration].model
    logger.info(f"Selected k={report.selected_k} by {config.criterion.value.upper()}")
    return report
