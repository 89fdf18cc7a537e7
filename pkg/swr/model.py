"""
Model Module
=================

This module holds the multi-window sliding windows regression model:
- Aligned input/target series (TimeSeriesPair)
- The fitted model itself (SwrModel) and its JSON form
- Prediction by lagged convolution with a validity mask
- Residuals, profiled Gaussian log-likelihood, AIC and BIC

A prediction for time t needs the input at t - s for every lag s of every
window, so the first max(s_max) time points of any series are not predictable.
By default likelihood and criterion values use the model's own predictable range;
training passes one shared start position so that models with different
supports are scored on the same time points.
"""

import math
from dataclasses import dataclass, field
from typing import Dict, Optional, Sequence, Tuple

import numpy as np

from config import VARIANCE_FLOOR
from .errors import DataError, InsufficientDataError
from .kernel import WindowKernel, WindowParams, build_kernel, combine_kernels


def _as_series(values, name: str) -> np.ndarray:
    array = np.array(values, dtype=float)
    if array.ndim != 1:
        raise DataError(f"{name} must be one-dimensional, got shape {array.shape}")
    if not np.all(np.isfinite(array)):
        bad = int(np.flatnonzero(~np.isfinite(array))[0])
        raise DataError(f"{name} contains a non-finite value at position {bad}")
    array.setflags(write=False)
    return array


@dataclass(frozen=True)
class TimeSeriesPair:
    """
    Input series x and target series y on a common integer time axis.

    Attributes:
        x: Input series (e.g. precipitation), non-negative unless nonnegative_input is off.
        y: Target series (e.g. streamflow).
        index: Integer time stamps, defaults to 0..n-1.
        nonnegative_input: Reject negative inputs; quasi-differenced series turn it off.
    """

    x: np.ndarray = field(repr=False)
    y: np.ndarray = field(repr=False)
    index: Optional[np.ndarray] = field(default=None, repr=False)
    nonnegative_input: bool = True

    def __post_init__(self):
        x = _as_series(self.x, "x")
        y = _as_series(self.y, "y")
        if x.shape != y.shape:
            raise DataError(f"x and y must have equal lengths, got {x.size} and {y.size}")
        if self.nonnegative_input and np.any(x < 0):
            bad = int(np.flatnonzero(x < 0)[0])
            raise DataError(f"x must be non-negative, got {x[bad]:g} at position {bad}")
        index = np.arange(x.size) if self.index is None else np.asarray(self.index, dtype=int)
        if index.shape != x.shape:
            raise DataError(f"index must match the series length {x.size}, got {index.size}")
        index.setflags(write=False)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "index", index)

    def __len__(self) -> int:
        return int(self.x.size)

    def split_point(self, fraction: float) -> int:
        """Returns the number of leading points assigned to training."""
        if not 0 < fraction <= 1:
            raise ValueError(f"Split fraction must be in (0, 1], got {fraction}")
        return int(math.floor(fraction * len(self)))

    def _slice(self, part: slice) -> "TimeSeriesPair":
        return TimeSeriesPair(self.x[part], self.y[part], self.index[part], self.nonnegative_input)

    def head(self, count: int) -> "TimeSeriesPair":
        return self._slice(slice(None, count))

    def tail(self, count: int) -> "TimeSeriesPair":
        """Drops the first count points."""
        return self._slice(slice(count, None))

    def split(self, fraction: float) -> Tuple["TimeSeriesPair", "TimeSeriesPair"]:
        """
        Splits into a leading training part and a trailing test part.

        Args:
            fraction: Share of points in the training part.

        Returns:
            tuple: (train, test) pairs; the test part may be empty only when fraction is 1.
        """
        cut = self.split_point(fraction)
        return self.head(cut), self.tail(cut)


@dataclass(frozen=True)
class Prediction:
    """
    Model output over a whole input series.

    Attributes:
        values: Predicted values, NaN where not predictable.
        valid: Boolean mask of predictable time points.
        start: First predictable position (equals the largest kernel lag).
    """

    values: np.ndarray = field(repr=False)
    valid: np.ndarray = field(repr=False)
    start: int

    @property
    def valid_values(self) -> np.ndarray:
        return self.values[self.start:]


@dataclass(frozen=True)
class SwrModel:
    """
    Sliding windows regression model with k Gaussian windows.

    Attributes:
        windows: Window kernels ordered by strictly increasing delta.
        betas: Non-negative regression weight per window.
        intercept: Optional constant term (absent by default).
        error_sd: Fitted residual standard deviation.
    """

    windows: Tuple[WindowKernel, ...]
    betas: np.ndarray = field(repr=False)
    intercept: Optional[float] = None
    error_sd: float = 0.0

    def __post_init__(self):
        windows = tuple(self.windows)
        betas = np.array(self.betas, dtype=float).reshape(-1)
        if len(windows) < 1:
            raise ValueError("A model needs at least one window")
        if betas.size != len(windows):
            raise ValueError(f"Got {len(windows)} windows but {betas.size} betas")
        if not np.all(np.isfinite(betas)) or np.any(betas < 0):
            raise ValueError(f"Betas must be finite and non-negative, got {betas.tolist()}")
        deltas = [w.params.delta for w in windows]
        if any(b <= a for a, b in zip(deltas, deltas[1:])):
            raise ValueError(f"Window locations must be strictly increasing, got {deltas}")
        if self.intercept is not None and not math.isfinite(self.intercept):
            raise ValueError(f"Intercept must be finite, got {self.intercept}")
        if not (math.isfinite(self.error_sd) and self.error_sd >= 0):
            raise ValueError(f"error_sd must be finite and non-negative, got {self.error_sd}")
        betas.setflags(write=False)
        object.__setattr__(self, "windows", windows)
        object.__setattr__(self, "betas", betas)

    @classmethod
    def from_params(
        cls,
        betas: Sequence[float],
        deltas: Sequence[float],
        sigmas: Sequence[float],
        intercept: Optional[float] = None,
        error_sd: float = 0.0,
    ) -> "SwrModel":
        """Builds a model from parameter vectors (windows are built, not sorted)."""
        if not len(betas) == len(deltas) == len(sigmas):
            raise ValueError(f"Parameter vectors differ in length: {len(betas)}, {len(deltas)}, {len(sigmas)}")
        windows = tuple(build_kernel(WindowParams(float(d), float(s))) for d, s in zip(deltas, sigmas))
        return cls(windows=windows, betas=np.asarray(betas, dtype=float), intercept=intercept, error_sd=error_sd)

    @property
    def k(self) -> int:
        return len(self.windows)

    @property
    def deltas(self) -> np.ndarray:
        return np.array([w.params.delta for w in self.windows])

    @property
    def sigmas(self) -> np.ndarray:
        return np.array([w.params.sigma for w in self.windows])

    @property
    def max_lag(self) -> int:
        return max(w.s_max for w in self.windows)

    @property
    def theta(self) -> np.ndarray:
        """Parameter vector (beta_1..beta_k, delta_1..delta_k, sigma_1..sigma_k[, intercept])."""
        parts = [self.betas, self.deltas, self.sigmas]
        if self.intercept is not None:
            parts.append(np.array([self.intercept]))
        return np.concatenate(parts)

    def combined_kernel(self, normalize: bool = False) -> np.ndarray:
        return combine_kernels(self.windows, self.betas, normalize=normalize)

    def with_error_sd(self, error_sd: float) -> "SwrModel":
        return SwrModel(windows=self.windows, betas=self.betas, intercept=self.intercept, error_sd=float(error_sd))

    def to_dict(self) -> Dict:
        data = {}
        if self.intercept is not None:
            data["intercept"] = float(self.intercept)
        data["windows"] = [
            {"beta": float(b), "delta": float(w.params.delta), "sigma": float(w.params.sigma)}
            for b, w in zip(self.betas, self.windows)
        ]
        data["error_sd"] = float(self.error_sd)
        return data

    @classmethod
    def from_dict(cls, data: Dict) -> "SwrModel":
        """
        Rebuilds a model from its JSON form.

        Raises:
            DataError: If required keys are missing or malformed.
        """
        try:
            windows = data["windows"]
            return cls.from_params(
                betas=[float(w["beta"]) for w in windows],
                deltas=[float(w["delta"]) for w in windows],
                sigmas=[float(w["sigma"]) for w in windows],
                intercept=None if data.get("intercept") is None else float(data["intercept"]),
                error_sd=float(data.get("error_sd", 0.0)),
            )
        except (KeyError, TypeError, ValueError) as e:
            raise DataError(f"Invalid model description: {e}") from e


def predict_kernels(
    kernels: Sequence[WindowKernel],
    betas: Sequence[float],
    x: np.ndarray,
    intercept: Optional[float] = None,
) -> Prediction:
    """
    Convolves the input with beta-weighted kernels.

    Args:
        kernels: Window kernels (any order).
        betas: Weight per kernel.
        x: Input series.
        intercept: Optional constant added to every prediction.

    Returns:
        Prediction: Values for t >= max(s_max), NaN before.

    Raises:
        InsufficientDataError: If the series has no predictable time point.
    """
    x = np.asarray(x, dtype=float)
    combined = combine_kernels(kernels, betas)
    start = combined.size - 1
    if x.size < combined.size:
        raise InsufficientDataError(
            f"Series of length {x.size} is shorter than the kernel support of {combined.size} lags"
        )
    values = np.convolve(x, combined)[:x.size]
    if intercept is not None:
        values = values + intercept
    values[:start] = np.nan
    valid = np.zeros(x.size, dtype=bool)
    valid[start:] = True
    return Prediction(values=values, valid=valid, start=start)


def predict(model: SwrModel, x) -> Prediction:
    """
    Predicts the target series from an input series.

    Args:
        model: Fitted model.
        x: Finite input series.

    Returns:
        Prediction: Predicted series with validity mask.

    Raises:
        DataError: If x contains non-finite values.
        InsufficientDataError: If x is shorter than max(s_max) + 1.
    """
    x = _as_series(x, "x")
    return predict_kernels(model.windows, model.betas, x, model.intercept)


def residuals(model: SwrModel, data: TimeSeriesPair, start: Optional[int] = None) -> np.ndarray:
    """
    Returns y_t - y_hat_t from position start on.

    Args:
        model: Model to evaluate.
        data: Input and target series.
        start: First scored position, at least the model's largest lag
            (default: the model's own predictable range).

    Raises:
        InsufficientDataError: If start lies before the model's largest lag.
    """
    prediction = predict(model, data.x)
    if start is None:
        start = prediction.start
    elif start < prediction.start:
        raise InsufficientDataError(
            f"Scoring from position {start} needs lags up to {start}, but the model reaches lag {prediction.start}"
        )
    return data.y[start:] - prediction.values[start:]


def gaussian_log_likelihood(errors: np.ndarray, variance_floor: float = VARIANCE_FLOOR) -> float:
    """
    Gaussian log-likelihood with the error variance profiled at SSE / n.

    Args:
        errors: Residuals.
        variance_floor: Lower bound applied to SSE / n, keeping perfect fits finite.

    Returns:
        float: -(n/2) * (log(2 pi var) + 1).

    Raises:
        DataError: If fewer than two residuals are given.
    """
    n = errors.size
    if n < 2:
        raise DataError(f"At least 2 residuals are needed for a likelihood, got {n}")
    variance = max(float(np.dot(errors, errors)) / n, variance_floor)
    return -0.5 * n * (math.log(2.0 * math.pi * variance) + 1.0)


def log_likelihood(model: SwrModel, data: TimeSeriesPair, variance_floor: float = VARIANCE_FLOOR,
                   start: Optional[int] = None) -> float:
    """Profiled Gaussian log-likelihood of the model from position start (default: its predictable range)."""
    return gaussian_log_likelihood(residuals(model, data, start), variance_floor)


def aic_value(loglik: float, k: int, intercept: bool = False) -> float:
    """AIC = -2 log L + 6k (+2 with an intercept)."""
    return -2.0 * loglik + 6.0 * k + (2.0 if intercept else 0.0)


def bic_value(loglik: float, k: int, n: int, intercept: bool = False) -> float:
    """BIC = -2 log L + log(n) * 3k (+log(n) with an intercept)."""
    penalty = math.log(n) * (3 * k + (1 if intercept else 0))
    return -2.0 * loglik + penalty


def aic(model: SwrModel, data: TimeSeriesPair, start: Optional[int] = None) -> float:
    return aic_value(log_likelihood(model, data, start=start), model.k, model.intercept is not None)


def bic(model: SwrModel, data: TimeSeriesPair, start: Optional[int] = None) -> float:
    """BIC with n the number of scored points, len(data) - start."""
    n_scored = len(data) - (model.max_lag if start is None else start)
    return bic_value(log_likelihood(model, data, start=start), model.k, n_scored, model.intercept is not None)
