"""
Uncertainty Module
=================

Standard errors from the observed information, the Hessian of the negative
log-likelihood at the fitted parameters:
- Central finite differences with step max(min_step, relative_step * |theta_j|)
- Stencils shifted up by one step for coordinates closer than one step to their lower bound
- Parameters on the boundary (delta = 0 or sigma = 0) are reported as unavailable

Errors are conditional on the data the model was fitted on, so after a
Cochrane-Orcutt correction they are conditional on the estimated AR coefficients.
"""

import math
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional, Sequence

import numpy as np
import scipy.linalg

from config import HESSIAN_MIN_STEP, HESSIAN_RELATIVE_STEP, VARIANCE_FLOOR
from .errors import NumericalError
from .logging import logger
from .model import SwrModel, TimeSeriesPair
from .train import Loss, SwrObjective, TrainConfig


@dataclass
class UncertaintyReport:
    """
    Observed information and the standard errors derived from it.

    Attributes:
        parameter_names: beta_1..beta_k, delta_1..delta_k, sigma_1..sigma_k[, intercept].
        estimates: Parameter values in the same order.
        hessian: Symmetric Hessian of the negative log-likelihood (NaN rows for failed stencils).
        std_errors: One entry per parameter, None where unavailable.
    """

    parameter_names: List[str]
    estimates: np.ndarray = field(repr=False)
    hessian: np.ndarray = field(repr=False)
    std_errors: List[Optional[float]] = field(default_factory=list)

    def std_error(self, name: str) -> Optional[float]:
        return self.std_errors[self.parameter_names.index(name)]

    def to_dict(self) -> Dict[str, Any]:
        """Per window {beta, delta, sigma} with value and standard error."""
        entries = {name: {"value": float(value), "se": se}
                   for name, value, se in zip(self.parameter_names, self.estimates, self.std_errors)}
        k = sum(1 for name in self.parameter_names if name.startswith("beta_"))
        windows = [
            {kind: entries[f"{kind}_{i}"] for kind in ("beta", "delta", "sigma")}
            for i in range(1, k + 1)
        ]
        data = {"windows": windows}
        if "intercept" in entries:
            data["intercept"] = entries["intercept"]
        return data

    def table(self) -> str:
        """Text table of estimates as value +- standard error."""
        def cell(entry):
            se = "n/a" if entry["se"] is None else f"{entry['se']:.1e}"
            return f"{entry['value']:.4g} +- {se}"

        lines = [f"{'window':>6}  {'beta':>20}  {'delta':>20}  {'sigma':>20}"]
        for i, window in enumerate(self.to_dict()["windows"], start=1):
            lines.append(f"{i:>6}  {cell(window['beta']):>20}  {cell(window['delta']):>20}  {cell(window['sigma']):>20}")
        return "\n".join(lines)


def parameter_names(k: int, intercept: bool = False) -> List[str]:
    names = [f"{kind}_{i}" for kind in ("beta", "delta", "sigma") for i in range(1, k + 1)]
    if intercept:
        names.append("intercept")
    return names


def hessian_steps(theta: np.ndarray, min_step: float = HESSIAN_MIN_STEP,
                  relative_step: float = HESSIAN_RELATIVE_STEP) -> np.ndarray:
    return np.maximum(min_step, relative_step * np.abs(theta))


def finite_difference_hessian(
    fun: Callable[[np.ndarray], float],
    theta: Sequence[float],
    lower_bounds: Optional[Sequence[float]] = None,
    steps: Optional[Sequence[float]] = None,
) -> np.ndarray:
    """
    Central finite-difference Hessian, symmetrized as (H + H^T) / 2.

    Coordinates within one step of their lower bound are evaluated around a
    center shifted up by one step so that no stencil point leaves the box.
    Rows and columns whose stencils produced non-finite values are NaN.

    Args:
        fun: Scalar function of a parameter vector.
        theta: Point of evaluation.
        lower_bounds: Optional lower bounds (default none).
        steps: Per-coordinate steps (default max(1e-5, 1e-5 |theta_j|)).

    Returns:
        np.ndarray: Symmetric dim x dim matrix.
    """
    theta = np.asarray(theta, dtype=float)
    dim = theta.size
    steps = hessian_steps(theta) if steps is None else np.asarray(steps, dtype=float)
    lower = np.full(dim, -np.inf) if lower_bounds is None else np.asarray(lower_bounds, dtype=float)
    center = theta + np.where(theta - steps < lower, steps, 0.0)

    def value(offsets: Dict[int, float]) -> float:
        point = center.copy()
        for j, offset in offsets.items():
            point[j] += offset
        try:
            result = float(fun(point))
        except (ArithmeticError, ValueError):
            return math.nan
        return result if math.isfinite(result) else math.nan

    f0 = value({})
    hessian = np.full((dim, dim), np.nan)
    for j in range(dim):
        hj = steps[j]
        hessian[j, j] = (value({j: hj}) - 2.0 * f0 + value({j: -hj})) / (hj * hj)
        for i in range(j):
            hi = steps[i]
            hessian[i, j] = (
                value({i: hi, j: hj}) - value({i: hi, j: -hj})
                - value({i: -hi, j: hj}) + value({i: -hi, j: -hj})
            ) / (4.0 * hi * hj)
            hessian[j, i] = hessian[i, j]
    return (hessian + hessian.T) / 2.0


def _inverse_diagonal(matrix: np.ndarray) -> Optional[np.ndarray]:
    try:
        factor = scipy.linalg.cho_factor(matrix)
        return np.diag(scipy.linalg.cho_solve(factor, np.eye(matrix.shape[0])))
    except np.linalg.LinAlgError:
        pass
    try:
        lu = scipy.linalg.lu_factor(matrix, check_finite=True)
        if np.any(np.abs(np.diag(lu[0])) <= np.finfo(float).eps * np.abs(matrix).max()):
            return None
        return np.diag(scipy.linalg.lu_solve(lu, np.eye(matrix.shape[0])))
    except (np.linalg.LinAlgError, ValueError):
        return None


def standard_errors(hessian: np.ndarray, available: Sequence[bool]) -> List[Optional[float]]:
    """
    sqrt(diag(H^-1)) over the available coordinates; None elsewhere or where undefined.

    Coordinates whose Hessian rows contain NaN are dropped before inversion.
    """
    available = np.asarray(available, dtype=bool) & ~np.any(np.isnan(hessian), axis=1)
    result: List[Optional[float]] = [None] * hessian.shape[0]
    keep = np.flatnonzero(available)
    if keep.size == 0:
        return result
    diagonal = _inverse_diagonal(hessian[np.ix_(keep, keep)])
    if diagonal is None:
        logger.warning("Observed information is singular; standard errors unavailable")
        return result
    for position, value in zip(keep, diagonal):
        if value > 0 and math.isfinite(value):
            result[position] = math.sqrt(value)
    return result


def observed_information(model: SwrModel, data: TimeSeriesPair, variance_floor: float = VARIANCE_FLOOR,
                         start: Optional[int] = None) -> UncertaintyReport:
    """
    Observed information of the profiled negative log-likelihood at the model's parameters.

    Args:
        model: Fitted model, at or near a local likelihood maximum.
        data: Series the model was fitted on.
        variance_floor: Floor of the profiled error variance.
        start: First scored position; defaults to the training lag limit, moved past
            the model's largest lag so that every stencil point is scored on the same range.

    Returns:
        UncertaintyReport: Hessian and standard errors; boundary parameters and
            failed stencils are marked unavailable (None).
    """
    intercept = model.intercept is not None
    theta = model.theta
    names = parameter_names(model.k, intercept)
    config = TrainConfig(k_max=model.k, loss=Loss.NLL, intercept=intercept, variance_floor=variance_floor)
    if start is None:
        start = max(config.lag_limit(len(data)), model.max_lag + 1)
    objective = SwrObjective(data, model.k, config, start=start)

    lower = np.zeros(theta.size)
    if intercept:
        lower[-1] = -np.inf
    try:
        hessian = finite_difference_hessian(objective, theta, lower_bounds=lower)
    except ValueError as e:
        raise NumericalError(f"Hessian evaluation failed: {e}") from e

    # delta and sigma at 0 sit on the boundary of the parameter space
    available = np.ones(theta.size, dtype=bool)
    k = model.k
    available[k:3 * k] = theta[k:3 * k] > 0
    errors = standard_errors(hessian, available)
    for name, se in zip(names, errors):
        if se is None:
            logger.warning(f"Standard error of {name} is unavailable")
    return UncertaintyReport(parameter_names=names, estimates=theta, hessian=hessian, std_errors=errors)
