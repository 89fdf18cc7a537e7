"""
Kernel Module
=================

This module builds the lag-weight vectors used by the sliding windows model:
- Discretized Gaussian window kernels over integer time lags
- Truncation of lags that would point into the future
- Combination of several weighted kernels into one dense lag-weight vector

A kernel with location delta and width sigma spans the lags
floor(delta - 3 sigma) .. ceil(delta + 3 sigma); negative lags are dropped and
the remaining cell masses are renormalized to sum to one.
"""

import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence

import numpy as np
from scipy.special import ndtr

# Half-width of a window in units of sigma
COVERAGE_SIGMAS = 3.0


@dataclass(frozen=True)
class WindowParams:
    """
    Location and width of one window, both in time steps.

    Attributes:
        delta: Lag of the kernel mode (expected input-to-target delay).
        sigma: Gaussian standard deviation of the lag distribution.
    """

    delta: float
    sigma: float

    def __post_init__(self):
        if not (math.isfinite(self.delta) and math.isfinite(self.sigma)):
            raise ValueError(f"Window parameters must be finite, got delta={self.delta}, sigma={self.sigma}")
        if self.delta < 0 or self.sigma < 0:
            raise ValueError(f"Window parameters must be non-negative, got delta={self.delta}, sigma={self.sigma}")


@dataclass(frozen=True)
class WindowKernel:
    """
    A discretized, possibly truncated Gaussian kernel.

    Attributes:
        params: The (delta, sigma) pair the kernel was built from.
        s_min: Smallest lag carrying weight.
        s_max: Largest lag carrying weight.
        weights: Read-only weights for lags s_min..s_max, summing to one.
        tau: Number of negative lags removed by truncation.
    """

    params: WindowParams
    s_min: int
    s_max: int
    weights: np.ndarray = field(repr=False, compare=False)
    tau: int = 0

    @property
    def lags(self) -> np.ndarray:
        return np.arange(self.s_min, self.s_max + 1)

    @property
    def mode(self) -> int:
        return int(self.s_min + np.argmax(self.weights))

    def dense(self, length: Optional[int] = None) -> np.ndarray:
        """
        Embeds the weights into a vector indexed by lag 0..length-1.

        Args:
            length: Output length, at least s_max + 1 (default s_max + 1).

        Returns:
            np.ndarray: Dense lag-weight vector.
        """
        length = self.s_max + 1 if length is None else int(length)
        if length < self.s_max + 1:
            raise ValueError(f"Dense length {length} cannot hold lag {self.s_max}")
        out = np.zeros(length)
        out[self.s_min:self.s_max + 1] = self.weights
        return out

    def to_dict(self) -> Dict:
        return {
            "delta": self.params.delta,
            "sigma": self.params.sigma,
            "s_min": self.s_min,
            "s_max": self.s_max,
            "weights": [float(w) for w in self.weights],
        }


def _frozen(values: np.ndarray) -> np.ndarray:
    values = np.ascontiguousarray(values, dtype=float)
    values.setflags(write=False)
    return values


def build_kernel(params: WindowParams) -> WindowKernel:
    """
    Builds the discretized Gaussian kernel for one window.

    Each lag s receives the Gaussian mass of the cell [s - 1/2, s + 1/2]
    (computed from the standard normal CDF), negative lags are dropped and the
    weights are renormalized. For sigma = 0 all mass sits on the integer lag
    nearest delta, ties going to the smaller lag.

    Args:
        params: Window location and width.

    Returns:
        WindowKernel: The normalized kernel.

    Raises:
        ValueError: If params is not a WindowParams (values are validated on construction).
    """
    if not isinstance(params, WindowParams):
        raise ValueError(f"Expected WindowParams, got {type(params).__name__}")
    delta, sigma = params.delta, params.sigma

    if sigma == 0:
        return _point_mass(params)

    lower = math.floor(delta - COVERAGE_SIGMAS * sigma)
    upper = math.ceil(delta + COVERAGE_SIGMAS * sigma)
    s_min = max(0, lower)
    tau = max(0, -lower)

    lags = np.arange(s_min, upper + 1, dtype=float)
    left = (lags - 0.5 - delta) / sigma
    right = (lags + 0.5 - delta) / sigma
    # upper tail through the mirrored CDF so both sides lose the same precision
    mass = np.where(left > 0, ndtr(-left) - ndtr(-right), ndtr(right) - ndtr(left))

    total = mass.sum()
    if not total > 0:
        return _point_mass(params)
    return WindowKernel(params=params, s_min=s_min, s_max=upper, weights=_frozen(mass / total), tau=tau)


def _point_mass(params: WindowParams) -> WindowKernel:
    lag = max(0, math.ceil(params.delta - 0.5))
    return WindowKernel(params=params, s_min=lag, s_max=lag, weights=_frozen(np.ones(1)), tau=0)


def build_kernels(deltas: Sequence[float], sigmas: Sequence[float]) -> List[WindowKernel]:
    """Builds one kernel per (delta, sigma) pair."""
    if len(deltas) != len(sigmas):
        raise ValueError(f"Got {len(deltas)} locations but {len(sigmas)} widths")
    return [build_kernel(WindowParams(float(d), float(s))) for d, s in zip(deltas, sigmas)]


def combine_kernels(kernels: Sequence[WindowKernel], betas: Sequence[float], normalize: bool = False) -> np.ndarray:
    """
    Sums beta-weighted kernels into one dense lag-weight vector.

    Args:
        kernels: Window kernels.
        betas: Non-negative regression weight per kernel.
        normalize: Divide the result by its L1 norm (used for overlap comparison).

    Returns:
        np.ndarray: Vector indexed by lag 0..max(s_max).

    Raises:
        ValueError: On empty input, length mismatch, negative or non-finite betas,
            or normalization of an all-zero combination.
    """
    if len(kernels) == 0:
        raise ValueError("At least one kernel is required")
    betas = np.asarray(betas, dtype=float)
    if betas.shape != (len(kernels),):
        raise ValueError(f"Got {len(kernels)} kernels but betas of shape {betas.shape}")
    if not np.all(np.isfinite(betas)) or np.any(betas < 0):
        raise ValueError(f"Betas must be finite and non-negative, got {betas.tolist()}")

    length = max(kernel.s_max for kernel in kernels) + 1
    combined = np.zeros(length)
    for kernel, beta in zip(kernels, betas):
        combined[kernel.s_min:kernel.s_max + 1] += beta * kernel.weights

    if normalize:
        total = combined.sum()
        if not total > 0:
            raise ValueError("Cannot normalize a combined kernel with zero total weight")
        combined = combined / total
    return combined
