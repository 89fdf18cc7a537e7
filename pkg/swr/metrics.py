"""
Metrics Module
=================

This module scores predictions and bounds what a score can reach:
- RMSE, R^2 (Nash-Sutcliffe efficiency) and Kling-Gupta efficiency
- Overlap of two normalized lag-weight vectors
- Largest achievable R^2 under white or AR(1) noise of a given level

Scores are computed over the positions where both series are finite, so a
Prediction with NaN before its first predictable point can be passed as is.
"""

import math
from dataclasses import dataclass
from typing import Any, Dict, Mapping, Optional, Sequence, Tuple

import numpy as np

from .errors import DataError
from .logging import logger
from .model import SwrModel, TimeSeriesPair, predict

# Tolerance on the unit sum of overlap inputs
NORMALIZATION_TOLERANCE = 1e-9


def _joint(observed, predicted) -> Tuple[np.ndarray, np.ndarray]:
    observed = np.asarray(observed, dtype=float).reshape(-1)
    predicted = np.asarray(predicted, dtype=float).reshape(-1)
    if observed.shape != predicted.shape:
        raise DataError(f"Observed and predicted series differ in length: {observed.size} and {predicted.size}")
    mask = np.isfinite(observed) & np.isfinite(predicted)
    return observed[mask], predicted[mask]


def rmse(observed, predicted) -> float:
    """
    Root mean squared error over the jointly finite range.

    Raises:
        DataError: If no position has both values finite.
    """
    obs, pred = _joint(observed, predicted)
    if obs.size == 0:
        raise DataError("RMSE needs at least one jointly valid point")
    return math.sqrt(float(np.mean((obs - pred) ** 2)))


def r2(observed, predicted) -> float:
    """
    Coefficient of determination 1 - ||y - y_hat||^2 / ||y - mean(y)||^2.

    Args:
        observed: Observed series.
        predicted: Predicted series of the same length.

    Returns:
        float: R^2, at most 1.

    Raises:
        DataError: On fewer than 2 valid points or a constant observed series.
    """
    obs, pred = _joint(observed, predicted)
    if obs.size < 2:
        raise DataError(f"R^2 needs at least 2 jointly valid points, got {obs.size}")
    total = float(np.sum((obs - obs.mean()) ** 2))
    if total == 0:
        raise DataError("R^2 is undefined for a constant observed series")
    return 1.0 - float(np.sum((obs - pred) ** 2)) / total


def kge(observed, predicted) -> float:
    """
    Kling-Gupta efficiency 1 - sqrt((r - 1)^2 + (sd_pred / sd_obs - 1)^2 + (mean_pred / mean_obs - 1)^2).

    Raises:
        DataError: If the observed mean or standard deviation is zero, or the
            prediction is constant (correlation undefined).
    """
    obs, pred = _joint(observed, predicted)
    if obs.size < 2:
        raise DataError(f"KGE needs at least 2 jointly valid points, got {obs.size}")
    mean_obs, sd_obs = float(obs.mean()), float(obs.std())
    if mean_obs == 0 or sd_obs == 0:
        raise DataError("KGE is undefined for observations with zero mean or zero variance")
    sd_pred = float(pred.std())
    if sd_pred == 0:
        raise DataError("KGE is undefined for a constant prediction: correlation does not exist")
    r = float(np.corrcoef(obs, pred)[0, 1])
    return 1.0 - math.sqrt((r - 1.0) ** 2 + (sd_pred / sd_obs - 1.0) ** 2 + (float(pred.mean()) / mean_obs - 1.0) ** 2)


def kernel_overlap(w1: Sequence[float], w2: Sequence[float]) -> float:
    """
    Sum of element-wise minima of two normalized lag-weight vectors.

    The shorter vector is zero-padded to the common length.

    Raises:
        ValueError: On negative weights or vectors not summing to one.
    """
    a = np.asarray(w1, dtype=float).reshape(-1)
    b = np.asarray(w2, dtype=float).reshape(-1)
    for name, w in (("w1", a), ("w2", b)):
        if np.any(w < 0) or not np.all(np.isfinite(w)):
            raise ValueError(f"{name} must be finite and non-negative")
        if abs(float(w.sum()) - 1.0) > NORMALIZATION_TOLERANCE:
            raise ValueError(f"{name} must sum to 1, got {float(w.sum()):.12g}")
    length = max(a.size, b.size)
    a = np.pad(a, (0, length - a.size))
    b = np.pad(b, (0, length - b.size))
    return float(np.minimum(a, b).sum())


def model_overlap(fitted: SwrModel, truth: SwrModel) -> float:
    """Overlap of the normalized combined kernels of two models."""
    return kernel_overlap(fitted.combined_kernel(normalize=True), truth.combined_kernel(normalize=True))


def max_r2_iid(alpha: float) -> float:
    """Largest expected R^2 when white noise with sd alpha * sd(y_hat) is added: 1 - alpha^2 / (1 + alpha^2)."""
    if not alpha >= 0:
        raise ValueError(f"alpha must be non-negative, got {alpha}")
    return 1.0 - alpha * alpha / (1.0 + alpha * alpha)


def ar1_variance_factor(phi: float, t: int) -> float:
    """Variance inflation xi = (1 - phi^(2(t-1))) / (1 - phi^2) of an AR(1) error started from its innovation."""
    if not -1.0 < phi < 1.0:
        raise ValueError(f"phi must lie in (-1, 1), got {phi}")
    if int(t) < 2:
        raise ValueError(f"Series length must be at least 2, got {t}")
    if phi == 0:
        return 1.0
    return (1.0 - phi ** (2 * (int(t) - 1))) / (1.0 - phi * phi)


def max_r2_ar1(alpha: float, phi: float, t: int) -> float:
    """Largest expected R^2 under AR(1) noise whose innovations have sd alpha * sd(y_hat): 1 / (1 + xi alpha^2)."""
    if not alpha >= 0:
        raise ValueError(f"alpha must be non-negative, got {alpha}")
    return 1.0 / (1.0 + ar1_variance_factor(phi, t) * alpha * alpha)


@dataclass(frozen=True)
class EvalScores:
    """
    Scores of one prediction.

    Attributes:
        rmse: Root mean squared error in target units.
        r2: Coefficient of determination.
        kge: Kling-Gupta efficiency, None when undefined.
        n_points: Number of jointly valid points scored.
    """

    rmse: float
    r2: float
    kge: Optional[float]
    n_points: int

    def to_dict(self) -> Dict[str, Any]:
        return {"rmse": self.rmse, "r2": self.r2, "kge": self.kge, "n_points": self.n_points}


def evaluate(observed, predicted) -> EvalScores:
    """
    Scores a prediction with RMSE, R^2 and KGE over the jointly valid range.

    A KGE that is undefined (constant prediction, zero observed mean) is
    reported as None with a warning; R^2 and RMSE failures raise.
    """
    obs, pred = _joint(observed, predicted)
    try:
        kge_value = kge(obs, pred)
    except DataError as e:
        logger.warning(f"KGE unavailable: {e}")
        kge_value = None
    return EvalScores(rmse=rmse(obs, pred), r2=r2(obs, pred), kge=kge_value, n_points=int(obs.size))


def evaluate_split(model: SwrModel, data: TimeSeriesPair, fraction: float) -> EvalScores:
    """
    Scores a model on the trailing test part of a series.

    The prediction is made on the whole input series, so the test part may use
    inputs from before the split point; only time points at or after the split
    are scored.

    Args:
        model: Fitted model.
        data: Full series.
        fraction: Share of leading points used for training.

    Returns:
        EvalScores: Test scores.
    """
    cut = data.split_point(fraction)
    if cut >= len(data):
        raise DataError("Split leaves no test points")
    prediction = predict(model, data.x)
    return evaluate(data.y[cut:], prediction.values[cut:])


def scores_table(scores: Mapping[str, EvalScores]) -> str:
    """Fixed-width table with one row per named score set and columns R^2, KGE, RMSE."""
    width = max([len(name) for name in scores] + [5])
    lines = [f"{'':<{width}}  {'R2':>8}  {'KGE':>8}  {'RMSE':>10}  {'n':>7}"]
    for name, s in scores.items():
        kge_cell = "n/a" if s.kge is None else f"{s.kge:.3f}"
        lines.append(f"{name:<{width}}  {s.r2:>8.3f}  {kge_cell:>8}  {s.rmse:>10.4g}  {s.n_points:>7}")
    return "\n".join(lines)
