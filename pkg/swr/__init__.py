"""
SWR Package
==============

This package fits, applies and studies Gaussian sliding windows regression models,
which predict a target series from lagged values of an input series through a few
Gaussian-shaped windows of lags.

Key Modules:
- kernel: Discretized Gaussian window kernels
- model: Model type, prediction, likelihood and information criteria
- optimize: Bound-constrained derivative-free minimization
- train: Incremental window addition with criterion-based selection
- autocorr: Durbin-Watson test and Cochrane-Orcutt correction
- uncertainty: Standard errors from the observed information
- metrics: RMSE, R^2, KGE, kernel overlap and R^2 bounds
- sim: Synthetic data and simulation studies
- base_manager / dataset_manager: JSON and CSV files
- cli: Command-line front end
- logging / errors: Shared logger and exception hierarchy
"""

from .errors import (
    DataError,
    InsufficientDataError,
    NumericalError,
    OptimizerError,
    StationarityError,
    SwrError,
    TrainingError,
)
from .kernel import WindowKernel, WindowParams, build_kernel, build_kernels, combine_kernels
from .model import (
    Prediction,
    SwrModel,
    TimeSeriesPair,
    aic,
    bic,
    log_likelihood,
    predict,
    residuals,
)
from .optimize import OptProblem, OptResult, minimize
from .train import Criterion, FitReport, Loss, TrainConfig, fit
from .autocorr import ArModel, AutocorrInfo, cochrane_orcutt_transform, durbin_watson, fit_ar, fit_with_autocorr
from .uncertainty import UncertaintyReport, observed_information
from .metrics import EvalScores, evaluate, evaluate_split, kernel_overlap, kge, max_r2_ar1, max_r2_iid, r2, rmse
from .sim import ErrorProcess, GridSpec, SimSetup, StudyConfig, StudyReport, generate, run_study, sample_truth
from .base_manager import BaseManager
from .dataset_manager import DatasetFile, DatasetManager
from .logging import activity_log, logger, setup_logging

__all__ = [
    # Errors
    'SwrError',
    'DataError',
    'InsufficientDataError',
    'NumericalError',
    'OptimizerError',
    'StationarityError',
    'TrainingError',
    # Kernel
    'WindowParams',
    'WindowKernel',
    'build_kernel',
    'build_kernels',
    'combine_kernels',
    # Model
    'TimeSeriesPair',
    'Prediction',
    'SwrModel',
    'predict',
    'residuals',
    'log_likelihood',
    'aic',
    'bic',
    # Optimize
    'OptProblem',
    'OptResult',
    'minimize',
    # Train
    'Criterion',
    'Loss',
    'TrainConfig',
    'FitReport',
    'fit',
    # Autocorrelation
    'ArModel',
    'AutocorrInfo',
    'durbin_watson',
    'fit_ar',
    'cochrane_orcutt_transform',
    'fit_with_autocorr',
    # Uncertainty
    'UncertaintyReport',
    'observed_information',
    # Metrics
    'EvalScores',
    'r2',
    'kge',
    'rmse',
    'kernel_overlap',
    'max_r2_iid',
    'max_r2_ar1',
    'evaluate',
    'evaluate_split',
    # Simulation
    'ErrorProcess',
    'SimSetup',
    'GridSpec',
    'StudyConfig',
    'StudyReport',
    'sample_truth',
    'generate',
    'run_study',
    # Files
    'BaseManager',
    'DatasetFile',
    'DatasetManager',
    # Logging
    'logger',
    'setup_logging',
    'activity_log',
]
