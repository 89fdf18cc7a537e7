"""
Optimize Module
=================

Bound-constrained, derivative-free local minimization for the training loop.

The minimizer runs scipy's bounded Nelder-Mead simplex search and restarts it
from the best point found until one restart improves the objective by less
than the absolute tolerance. Every evaluated point is clipped to the bounds,
and the best (point, value) pair over all evaluations is returned, so the
result is always feasible and never worse than the start.
"""

import math
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import minimize as scipy_minimize

from config import FTOL_ABS, INITIAL_STEP, INITIAL_STEP_RELATIVE, MAX_EVALS_PER_DIM, XTOL_ABS
from .errors import OptimizerError
from .logging import logger


@dataclass
class OptProblem:
    """
    A bound-constrained minimization problem.

    Attributes:
        dim: Number of parameters.
        objective: Pure function mapping a parameter vector to a real value.
        lower_bounds: Lower bounds (default all 0).
        upper_bounds: Upper bounds (default all +inf).
        ftol_abs: Absolute tolerance on successive best objective values.
        max_evals: Evaluation budget (default 5000 * dim).
    """

    dim: int
    objective: Callable[[np.ndarray], float]
    lower_bounds: Optional[Sequence[float]] = None
    upper_bounds: Optional[Sequence[float]] = None
    ftol_abs: float = FTOL_ABS
    max_evals: Optional[int] = None

    def __post_init__(self):
        if int(self.dim) < 1:
            raise ValueError(f"Problem dimension must be positive, got {self.dim}")
        self.dim = int(self.dim)
        lower = np.zeros(self.dim) if self.lower_bounds is None else np.asarray(self.lower_bounds, dtype=float)
        upper = np.full(self.dim, np.inf) if self.upper_bounds is None else np.asarray(self.upper_bounds, dtype=float)
        if lower.shape != (self.dim,) or upper.shape != (self.dim,):
            raise ValueError(f"Bounds must have length {self.dim}")
        if np.any(lower > upper):
            raise ValueError("Lower bounds must not exceed upper bounds")
        if not self.ftol_abs > 0:
            raise ValueError(f"ftol_abs must be positive, got {self.ftol_abs}")
        if self.max_evals is None:
            self.max_evals = MAX_EVALS_PER_DIM * self.dim
        if int(self.max_evals) < 1:
            raise ValueError(f"max_evals must be positive, got {self.max_evals}")
        self.lower_bounds = lower
        self.upper_bounds = upper

    def clip(self, x: np.ndarray) -> np.ndarray:
        return np.clip(np.asarray(x, dtype=float), self.lower_bounds, self.upper_bounds)


@dataclass
class OptResult:
    """
    Outcome of a minimization.

    Attributes:
        x: Best feasible point.
        fun: Objective value at x (minimum over all evaluations).
        n_evals: Number of objective evaluations.
        converged: True when the last restart improved by less than ftol_abs.
        n_restarts: Number of simplex runs.
        trace: (evaluation count, best value) after every improvement.
    """

    x: np.ndarray
    fun: float
    n_evals: int
    converged: bool
    n_restarts: int = 0
    trace: List[Tuple[int, float]] = field(default_factory=list, repr=False)


class _BudgetExhausted(Exception):
    pass


class _RecordingObjective:
    """Clips, counts and records every evaluation of the objective."""

    def __init__(self, problem: OptProblem):
        self.problem = problem
        self.n_evals = 0
        self.best_x = None
        self.best_f = math.inf
        self.trace: List[Tuple[int, float]] = []

    def __call__(self, x: np.ndarray) -> float:
        if self.n_evals >= self.problem.max_evals:
            raise _BudgetExhausted()
        point = self.problem.clip(x)
        try:
            value = float(self.problem.objective(point))
        except (ArithmeticError, ValueError) as e:
            logger.debug(f"Objective failed at {point.tolist()}: {e}")
            value = math.inf
        if not math.isfinite(value):
            value = math.inf
        self.n_evals += 1
        if value < self.best_f:
            self.best_f = value
            self.best_x = point.copy()
            self.trace.append((self.n_evals, value))
        return value


def initial_simplex(x: np.ndarray, lower: np.ndarray, upper: np.ndarray) -> np.ndarray:
    """
    Builds a feasible starting simplex around x.

    Each vertex moves one coordinate by max(INITIAL_STEP, INITIAL_STEP_RELATIVE * |x_j|),
    downwards when the upward move would leave the box.
    """
    dim = x.size
    simplex = np.tile(x, (dim + 1, 1))
    for j in range(dim):
        step = max(INITIAL_STEP, INITIAL_STEP_RELATIVE * abs(x[j]))
        if x[j] + step > upper[j]:
            step = -step
        simplex[j + 1, j] = np.clip(x[j] + step, lower[j], upper[j])
    return simplex


def minimize(problem: OptProblem, x0: Sequence[float]) -> OptResult:
    """
    Minimizes a bound-constrained objective without derivatives.

    Args:
        problem: Objective, bounds, tolerance and budget.
        x0: Start vector; clipped to the bounds before use.

    Returns:
        OptResult: Best point found, its value, evaluation count and convergence flag.

    Raises:
        OptimizerError: If x0 has the wrong length or the objective is non-finite at x0.
    """
    x0 = np.asarray(x0, dtype=float).reshape(-1)
    if x0.size != problem.dim:
        raise OptimizerError(f"Start vector has length {x0.size}, problem dimension is {problem.dim}")

    recorder = _RecordingObjective(problem)
    start = problem.clip(x0)
    f0 = recorder(start)
    if not math.isfinite(f0):
        raise OptimizerError(f"Objective is not finite at the start point {start.tolist()}")

    bounds = list(zip(problem.lower_bounds, problem.upper_bounds))
    converged = False
    n_restarts = 0
    while True:
        before = recorder.best_f
        remaining = problem.max_evals - recorder.n_evals
        if remaining <= problem.dim + 1:
            break
        n_restarts += 1
        try:
            scipy_minimize(
                recorder,
                recorder.best_x,
                method="Nelder-Mead",
                bounds=bounds,
                options={
                    "initial_simplex": initial_simplex(recorder.best_x, problem.lower_bounds, problem.upper_bounds),
                    "fatol": problem.ftol_abs,
                    "xatol": XTOL_ABS,
                    "maxfev": remaining,
                    "adaptive": problem.dim > 2,
                },
            )
        except _BudgetExhausted:
            break
        if before - recorder.best_f < problem.ftol_abs:
            converged = True
            break

    logger.debug(
        f"Minimizer finished: f={recorder.best_f:.10g} after {recorder.n_evals} evaluations, "
        f"{n_restarts} restarts, converged={converged}"
    )
    return OptResult(
        x=recorder.best_x,
        fun=recorder.best_f,
        n_evals=recorder.n_evals,
        converged=converged,
        n_restarts=n_restarts,
        trace=recorder.trace,
    )
