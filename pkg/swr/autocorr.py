"""
Autocorrelation Module
=================

This module handles autocorrelated model errors including:
- Durbin-Watson statistic with a seeded permutation p-value
- Yule-Walker estimation of AR(m) coefficients from residuals
- The Cochrane-Orcutt quasi-differencing transform of input and target series
- The fit / test / transform / refit loop with AR order escalation

Because the model is a convolution, transforming x and y with the same AR
filter keeps the window parameters unchanged while whitening the errors.
"""

import math
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence

import numpy as np
from statsmodels.regression.linear_model import yule_walker
from statsmodels.stats.stattools import durbin_watson as dw_statistic

from config import AR_ROOT_MARGIN, DW_ALPHA, DW_BOOTSTRAP, DW_CHUNK_SIZE, DW_TARGET, MAX_AR_ORDER
from .errors import DataError, StationarityError
from .logging import logger
from .model import SwrModel, TimeSeriesPair, residuals
from .train import FitReport, TrainConfig, fit


@dataclass(frozen=True)
class ArModel:
    """
    Autoregressive error process e_t = sum_j phi_j e_{t-j} + eta_t.

    Attributes:
        phi: Coefficients phi_1..phi_m.
        innovation_sd: Standard deviation of eta_t.
    """

    phi: tuple
    innovation_sd: float = 0.0

    def __post_init__(self):
        phi = tuple(float(p) for p in np.atleast_1d(self.phi))
        if len(phi) < 1:
            raise ValueError("An AR model needs at least one coefficient")
        if not all(math.isfinite(p) for p in phi):
            raise ValueError(f"AR coefficients must be finite, got {phi}")
        if not (math.isfinite(self.innovation_sd) and self.innovation_sd >= 0):
            raise ValueError(f"innovation_sd must be finite and non-negative, got {self.innovation_sd}")
        object.__setattr__(self, "phi", phi)
        root = smallest_root(phi)
        if root is not None and abs(root) <= 1.0:
            raise StationarityError(f"AR coefficients {phi} are not stationary: root {root:.6g} lies on or inside the unit circle")

    @property
    def order(self) -> int:
        return len(self.phi)

    def to_dict(self) -> Dict[str, Any]:
        return {"order": self.order, "phi": list(self.phi), "innovation_sd": self.innovation_sd}


@dataclass(frozen=True)
class DurbinWatson:
    statistic: float
    p_value: float

    def to_dict(self) -> Dict[str, float]:
        return {"d": self.statistic, "p": self.p_value}


@dataclass
class AutocorrStage:
    """One transform-and-refit attempt."""

    ar: ArModel
    durbin_watson: DurbinWatson
    selected_k: int

    def to_dict(self) -> Dict[str, Any]:
        return {**self.ar.to_dict(), "dw": self.durbin_watson.to_dict(), "selected_k": self.selected_k}


@dataclass
class AutocorrInfo:
    """
    Record of the Cochrane-Orcutt procedure.

    Attributes:
        dw_before: Test on the residuals of the untransformed fit.
        applied: Whether a transform was applied.
        stages: One entry per AR order tried.
        passed: Whether the final residuals passed the target p-value.
    """

    dw_before: DurbinWatson
    applied: bool = False
    stages: List[AutocorrStage] = field(default_factory=list)
    passed: bool = True

    @property
    def ar(self) -> Optional[ArModel]:
        return self.stages[-1].ar if self.stages else None

    @property
    def dw_after(self) -> Optional[DurbinWatson]:
        return self.stages[-1].durbin_watson if self.stages else None

    def to_dict(self) -> Dict[str, Any]:
        ar = self.ar
        return {
            "applied": self.applied,
            "order": None if ar is None else ar.order,
            "phi": None if ar is None else list(ar.phi),
            "innovation_sd": None if ar is None else ar.innovation_sd,
            "dw_before": self.dw_before.to_dict(),
            "dw_after": None if self.dw_after is None else self.dw_after.to_dict(),
            "passed": self.passed,
            "stages": [stage.to_dict() for stage in self.stages],
        }


def smallest_root(phi: Sequence[float]) -> Optional[complex]:
    """Root of 1 - phi_1 z - ... - phi_m z^m with the smallest modulus (None if all phi are 0)."""
    coefficients = np.concatenate([-np.asarray(phi, dtype=float)[::-1], [1.0]])
    nonzero = np.flatnonzero(coefficients)
    coefficients = coefficients[nonzero[0]:]
    if coefficients.size < 2:
        return None
    roots = np.roots(coefficients)
    root = roots[np.argmin(np.abs(roots))]
    return complex(root) if abs(root.imag) > 0 else float(root.real)


def durbin_watson(residuals_: Sequence[float], n_boot: int = DW_BOOTSTRAP, seed: int = 0,
                  chunk_size: int = DW_CHUNK_SIZE) -> DurbinWatson:
    """
    Durbin-Watson statistic with a one-sided permutation p-value.

    The p-value is the share of random permutations of the residuals whose
    statistic is at most the observed one (small values signal positive
    autocorrelation). Permutations are drawn chunk_size at a time.

    Args:
        residuals_: Model residuals in time order.
        n_boot: Number of permutations.
        seed: Seed of the permutation generator.
        chunk_size: Permutations held in memory at once.

    Returns:
        DurbinWatson: Statistic d in [0, 4] and p-value.

    Raises:
        DataError: On fewer than 3 residuals or all-zero residuals.
    """
    errors = np.asarray(residuals_, dtype=float)
    if errors.size < 3:
        raise DataError(f"Durbin-Watson needs at least 3 residuals, got {errors.size}")
    if not np.any(errors):
        raise DataError("Durbin-Watson is undefined for all-zero residuals")
    if int(n_boot) < 1:
        raise ValueError(f"n_boot must be positive, got {n_boot}")
    if int(chunk_size) < 1:
        raise ValueError(f"chunk_size must be positive, got {chunk_size}")

    observed = float(dw_statistic(errors))
    rng = np.random.default_rng(seed)
    at_most = 0
    remaining = int(n_boot)
    while remaining > 0:
        rows = min(remaining, int(chunk_size))
        permuted = rng.permuted(np.tile(errors, (rows, 1)), axis=1)
        at_most += int(np.count_nonzero(dw_statistic(permuted, axis=1) <= observed))
        remaining -= rows
    return DurbinWatson(statistic=observed, p_value=at_most / int(n_boot))


def fit_ar(residuals_: Sequence[float], order: int, root_margin: float = AR_ROOT_MARGIN) -> ArModel:
    """
    Yule-Walker estimate of an AR(order) process.

    Autocovariances are taken about zero (model residuals are the error process
    itself) with the biased 1/n normalization.

    Args:
        residuals_: Residual series.
        order: AR order m.
        root_margin: Roots with modulus below 1 + root_margin count as non-stationary.

    Returns:
        ArModel: Coefficients and innovation standard deviation.

    Raises:
        DataError: If the series is too short or identically zero.
        StationarityError: If the estimate has a root near or inside the unit circle.
    """
    errors = np.asarray(residuals_, dtype=float)
    order = int(order)
    if order < 1:
        raise ValueError(f"AR order must be positive, got {order}")
    if errors.size <= order + 1:
        raise DataError(f"AR({order}) needs more than {order + 1} points, got {errors.size}")
    if not np.any(errors):
        raise DataError("Cannot fit an AR model to an all-zero series")

    phi, innovation_sd = yule_walker(errors, order=order, method="mle", demean=False)
    phi = np.atleast_1d(phi)
    root = smallest_root(phi)
    if root is not None and abs(root) < 1.0 + root_margin:
        raise StationarityError(
            f"AR({order}) estimate {np.round(phi, 6).tolist()} is not stationary: root {root:.6g} "
            f"has modulus {abs(root):.6g}"
        )
    # statsmodels reports nan when the innovation variance is not positive
    innovation_sd = float(innovation_sd) if np.isfinite(innovation_sd) else 0.0
    return ArModel(phi=tuple(phi), innovation_sd=innovation_sd)


def cochrane_orcutt_transform(z: Sequence[float], ar: ArModel) -> np.ndarray:
    """
    Quasi-differences a series: z~_t = z_t - sum_j phi_j z_{t-j} for t = m..n-1.

    Raises:
        DataError: If the series has no more than m points.
    """
    z = np.asarray(z, dtype=float)
    m = ar.order
    if z.size <= m:
        raise DataError(f"Series of length {z.size} is too short for an AR({m}) transform")
    n = z.size
    out = z[m:].copy()
    for j, phi in enumerate(ar.phi, start=1):
        out -= phi * z[m - j:n - j]
    return out


def transform_pair(data: TimeSeriesPair, ar: ArModel) -> TimeSeriesPair:
    """Applies the Cochrane-Orcutt transform to both series; the first m time stamps are dropped."""
    return TimeSeriesPair(
        x=cochrane_orcutt_transform(data.x, ar),
        y=cochrane_orcutt_transform(data.y, ar),
        index=data.index[ar.order:],
        nonnegative_input=False,
    )


def _restore_intercept(model: SwrModel, ar: ArModel) -> SwrModel:
    if model.intercept is None:
        return model
    scale = 1.0 - sum(ar.phi)
    return SwrModel(windows=model.windows, betas=model.betas, intercept=model.intercept / scale,
                    error_sd=model.error_sd)


def fit_with_autocorr(
    data: TimeSeriesPair,
    config: Optional[TrainConfig] = None,
    max_order: int = MAX_AR_ORDER,
    dw_alpha: float = DW_ALPHA,
    dw_target: float = DW_TARGET,
    n_boot: int = DW_BOOTSTRAP,
    seed: int = 0,
) -> FitReport:
    """
    Fits, tests residuals for autocorrelation and refits on transformed series when needed.

    Process:
    1. Fit on the raw series and run the Durbin-Watson test on the residuals
    2. If p < dw_alpha, estimate AR(m) from those residuals starting at m = 1,
       transform x and y and refit
    3. Raise m until the refit residuals reach p >= dw_target or m = max_order

    Args:
        data: Training series.
        config: Training settings.
        max_order: Largest AR order tried.
        dw_alpha: Significance level that triggers the correction.
        dw_target: p-value the corrected residuals should reach.
        n_boot: Permutations per Durbin-Watson test.
        seed: Seed for the Durbin-Watson permutations.

    Returns:
        FitReport: Report of the final fit with autocorr_info attached.
    """
    config = config or TrainConfig()
    report = fit(data, config)
    raw_residuals = residuals(report.final_model, data)
    before = durbin_watson(raw_residuals, n_boot=n_boot, seed=seed)
    info = AutocorrInfo(dw_before=before)
    logger.info(f"Durbin-Watson before correction: d={before.statistic:.4f}, p={before.p_value:.4f}")

    if before.p_value >= dw_alpha:
        report.autocorr_info = info
        return report

    info.applied = True
    final = report
    for order in range(1, int(max_order) + 1):
        ar = fit_ar(raw_residuals, order)
        transformed = transform_pair(data, ar)
        refit = fit(transformed, config)
        after = durbin_watson(residuals(refit.final_model, transformed), n_boot=n_boot, seed=seed)
        info.stages.append(AutocorrStage(ar=ar, durbin_watson=after, selected_k=refit.selected_k))
        logger.info(
            f"AR({order}) phi={[round(p, 4) for p in ar.phi]}: Durbin-Watson d={after.statistic:.4f}, "
            f"p={after.p_value:.4f}"
        )
        final = refit
        if after.p_value >= dw_target:
            break

    info.passed = info.dw_after.p_value >= dw_target
    if not info.passed:
        logger.warning(f"Residuals still autocorrelated after AR({info.ar.order}) correction")
    final.final_model = _restore_intercept(final.final_model, info.ar)
    final.autocorr_info = info
    return final
