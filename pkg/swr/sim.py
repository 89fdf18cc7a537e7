"""
Simulation Module
=================

This module handles simulation studies including:
- Sampling ground-truth window models
- Synthetic rainfall (sparse exponential spikes) or a file as the input series
- Noise scaled to the clean model output, white or autoregressive
- Grids of setups and noise levels, run cell by cell with train/test scoring

The clean output uses zero history before the first input point, so every
time point has a target value; noise variance is set from the predictable
range only.
"""

import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from scipy.signal import lfilter
from threadedreturn import ThreadWithReturnValue

from config import (
    DW_ALPHA,
    DW_BOOTSTRAP,
    DW_TARGET,
    MAX_AR_ORDER,
    SIM_ALPHAS,
    SIM_BETA_RANGE,
    SIM_DELTA_RANGE,
    SIM_INPUT_SEED,
    SIM_LENGTH,
    SIM_MIN_DELTA_GAP,
    SIM_SIGMA_RANGE,
    SIM_SPIKE_RATE,
    SIM_SPIKE_SCALE,
    SPLIT,
    STUDY_WORKERS,
)
from .autocorr import ArModel, fit_with_autocorr
from .base_manager import BaseManager
from .dataset_manager import DatasetManager
from .errors import DataError, InsufficientDataError, SwrError
from .logging import logger
from .metrics import ar1_variance_factor, evaluate_split, max_r2_ar1, max_r2_iid, model_overlap
from .model import SwrModel, TimeSeriesPair
from .train import TrainConfig, fit


@dataclass(frozen=True)
class ErrorProcess:
    """
    Noise process of a simulation: white noise, or AR noise driven by white innovations.

    Attributes:
        kind: "iid" or "ar".
        phi: AR coefficients (empty for iid).
    """

    kind: str = "iid"
    phi: Tuple[float, ...] = ()

    def __post_init__(self):
        kind = str(self.kind).lower()
        phi = tuple(float(p) for p in self.phi)
        if kind not in ("iid", "ar"):
            raise ValueError(f"Unknown error process {self.kind!r}")
        if kind == "iid" and phi:
            raise ValueError("An iid error process takes no AR coefficients")
        if kind == "ar":
            if not phi:
                raise ValueError("An AR error process needs at least one coefficient")
            # raises StationarityError for explosive coefficients
            ArModel(phi=phi)
        object.__setattr__(self, "kind", kind)
        object.__setattr__(self, "phi", phi)

    @classmethod
    def ar1(cls, phi: float) -> "ErrorProcess":
        return cls(kind="ar", phi=(phi,))

    @property
    def label(self) -> str:
        if self.kind == "iid":
            return "iid"
        return f"ar{len(self.phi)}(" + ",".join(f"{p:g}" for p in self.phi) + ")"

    def variance_factor(self, length: int) -> float:
        """Var(noise) / Var(innovation) at the end of a series of the given length, started from zero."""
        if self.kind == "iid":
            return 1.0
        if len(self.phi) == 1:
            return ar1_variance_factor(self.phi[0], length)
        impulse = np.zeros(max(int(length) - 1, 1))
        impulse[0] = 1.0
        response = lfilter([1.0], np.concatenate([[1.0], -np.asarray(self.phi)]), impulse)
        return float(np.sum(response ** 2))

    def to_dict(self) -> Dict[str, Any]:
        return {"kind": self.kind, "phi": list(self.phi)}

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "ErrorProcess":
        return cls(kind=data.get("kind", "iid"), phi=tuple(data.get("phi", ())))


@dataclass(frozen=True)
class SyntheticInput:
    """Zero-inflated exponential spikes, the stand-in for observed daily rainfall."""

    length: int = SIM_LENGTH
    spike_rate: float = SIM_SPIKE_RATE
    spike_scale: float = SIM_SPIKE_SCALE
    seed: int = SIM_INPUT_SEED

    def load(self) -> np.ndarray:
        return synthetic_rainfall(self.length, self.spike_rate, self.spike_scale, self.seed)

    def to_dict(self) -> Dict[str, Any]:
        return {"kind": "synthetic", "length": self.length, "spike_rate": self.spike_rate,
                "spike_scale": self.spike_scale, "seed": self.seed}


@dataclass(frozen=True)
class FileInput:
    """Input series read from one column of a CSV file."""

    path: str
    column: str = "x"
    delimiter: str = ","

    def load(self) -> np.ndarray:
        return DatasetManager.read_input(self.path, self.column, self.delimiter)

    def to_dict(self) -> Dict[str, Any]:
        return {"kind": "file", "path": str(self.path), "column": self.column}


@dataclass(frozen=True)
class SimSetup:
    """
    One simulated dataset.

    Attributes:
        truth: Ground-truth model.
        alpha: Noise level; innovation sd = alpha * sd(clean output).
        error_process: White or AR noise.
        seed: Seed of the noise generator.
        input_spec: Where the input series comes from.
    """

    truth: SwrModel
    alpha: float
    error_process: ErrorProcess = field(default_factory=ErrorProcess)
    seed: int = 0
    input_spec: Union[SyntheticInput, FileInput] = field(default_factory=SyntheticInput)

    def __post_init__(self):
        if not (math.isfinite(self.alpha) and self.alpha >= 0):
            raise ValueError(f"alpha must be finite and non-negative, got {self.alpha}")


@dataclass
class SimulatedData:
    """
    A generated dataset with its ground-truth record.

    Attributes:
        setup: Setup it was generated from.
        data: Input and noisy target.
        clean: Noiseless model output.
        noise: Added noise.
        innovations: White innovations driving the noise.
        rho: Innovation standard deviation.
    """

    setup: SimSetup
    data: TimeSeriesPair
    clean: np.ndarray = field(repr=False)
    noise: np.ndarray = field(repr=False)
    innovations: np.ndarray = field(repr=False)
    rho: float = 0.0

    def truth_dict(self) -> Dict[str, Any]:
        return {
            "truth": self.setup.truth.to_dict(),
            "alpha": self.setup.alpha,
            "error_process": self.setup.error_process.to_dict(),
            "seed": self.setup.seed,
            "rho": self.rho,
            "input": self.setup.input_spec.to_dict(),
            "n_points": len(self.data),
        }

    def frame(self) -> pd.DataFrame:
        return pd.DataFrame({
            "time": self.data.index,
            "x": self.data.x,
            "y": self.data.y,
            "y_clean": self.clean,
            "noise": self.noise,
        })


def synthetic_rainfall(length: int, spike_rate: float = SIM_SPIKE_RATE, spike_scale: float = SIM_SPIKE_SCALE,
                       seed: int = SIM_INPUT_SEED) -> np.ndarray:
    """
    Sparse non-negative input: each step is wet with probability spike_rate and
    then carries an exponential amount with mean spike_scale.
    """
    if int(length) < 1:
        raise ValueError(f"length must be positive, got {length}")
    if not 0 < spike_rate <= 1:
        raise ValueError(f"spike_rate must be in (0, 1], got {spike_rate}")
    if not spike_scale > 0:
        raise ValueError(f"spike_scale must be positive, got {spike_scale}")
    rng = np.random.default_rng(seed)
    wet = rng.random(int(length)) < spike_rate
    amounts = rng.exponential(spike_scale, int(length))
    return np.where(wet, amounts, 0.0)


def sample_truth(k: int, seed: Optional[int] = None, min_gap: float = SIM_MIN_DELTA_GAP,
                 rng: Optional[np.random.Generator] = None) -> SwrModel:
    """
    Draws a ground-truth model with k windows.

    Locations come from U(0, 20) and widths and weights from U(0, 5). Locations
    are sorted, and the whole draw is repeated while two locations are closer
    than min_gap.

    Args:
        k: Number of windows.
        seed: Seed used when no generator is given.
        min_gap: Smallest allowed distance between locations.
        rng: Optional generator to draw from.

    Returns:
        SwrModel: Model with strictly increasing locations.
    """
    if int(k) < 1:
        raise ValueError(f"k must be at least 1, got {k}")
    rng = rng or np.random.default_rng(seed)
    while True:
        deltas = np.sort(rng.uniform(*SIM_DELTA_RANGE, int(k)))
        sigmas = rng.uniform(*SIM_SIGMA_RANGE, int(k))
        betas = rng.uniform(*SIM_BETA_RANGE, int(k))
        if k == 1 or np.min(np.diff(deltas)) >= min_gap:
            return SwrModel.from_params(betas, deltas, sigmas)


def generate(setup: SimSetup) -> SimulatedData:
    """
    Builds the input series, the clean output and the noisy target of a setup.

    Args:
        setup: Truth, noise level, noise process, seed and input source.

    Returns:
        SimulatedData: Dataset and its components.

    Raises:
        InsufficientDataError: If the input is too short for the truth's kernel support.
    """
    x = np.asarray(setup.input_spec.load(), dtype=float)
    truth = setup.truth
    combined = truth.combined_kernel()
    start = combined.size - 1
    if x.size < start + 2:
        raise InsufficientDataError(
            f"Input of length {x.size} is too short for a truth model with largest lag {start}"
        )

    clean = np.convolve(x, combined)[:x.size]
    if truth.intercept is not None:
        clean = clean + truth.intercept
    clean_sd = float(np.std(clean[start:], ddof=1))
    rho = setup.alpha * clean_sd

    rng = np.random.default_rng(setup.seed)
    innovations = rng.normal(0.0, 1.0, x.size) * rho
    if setup.error_process.kind == "iid":
        noise = innovations
    else:
        noise = lfilter([1.0], np.concatenate([[1.0], -np.asarray(setup.error_process.phi)]), innovations)

    data = TimeSeriesPair(x=x, y=clean + noise)
    return SimulatedData(setup=setup, data=data, clean=clean, noise=noise, innovations=innovations, rho=rho)


def r2_bound(alpha: float, process: ErrorProcess, length: int) -> float:
    """Largest expected R^2 for a cell."""
    if process.kind == "iid":
        return max_r2_iid(alpha)
    if len(process.phi) == 1:
        return max_r2_ar1(alpha, process.phi[0], length)
    return 1.0 / (1.0 + process.variance_factor(length) * alpha * alpha)


@dataclass(frozen=True)
class StudyCell:
    """One grid cell: a setup with its identifiers."""

    index: int
    setup_id: str
    k_gt: int
    setup: SimSetup


@dataclass(frozen=True)
class GridSpec:
    """
    Shape of a simulation grid.

    setups_per_k truth models are drawn for every k in ks; each is run at every
    noise level and error process. Truth seeds depend only on (k, setup number),
    noise seeds are seed_base + cell index.
    """

    ks: Tuple[int, ...] = (1, 2, 3)
    setups_per_k: int = 5
    alphas: Tuple[float, ...] = tuple(SIM_ALPHAS)
    processes: Tuple[ErrorProcess, ...] = (ErrorProcess(),)
    length: int = SIM_LENGTH
    seed_base: int = 0
    spike_rate: float = SIM_SPIKE_RATE
    spike_scale: float = SIM_SPIKE_SCALE
    input_seed: int = SIM_INPUT_SEED
    min_gap: float = SIM_MIN_DELTA_GAP

    def cells(self) -> List[StudyCell]:
        input_spec = SyntheticInput(self.length, self.spike_rate, self.spike_scale, self.input_seed)
        cells: List[StudyCell] = []
        for k in self.ks:
            for number in range(1, int(self.setups_per_k) + 1):
                truth = sample_truth(int(k), seed=self.seed_base + 1000 * int(k) + number, min_gap=self.min_gap)
                setup_id = f"k{k}-s{number}"
                for process in self.processes:
                    for alpha in self.alphas:
                        index = len(cells)
                        setup = SimSetup(truth=truth, alpha=float(alpha), error_process=process,
                                         seed=self.seed_base + index, input_spec=input_spec)
                        cells.append(StudyCell(index=index, setup_id=setup_id, k_gt=int(k), setup=setup))
        return cells

    def to_dict(self) -> Dict[str, Any]:
        return {
            "ks": list(self.ks),
            "setups_per_k": self.setups_per_k,
            "alphas": list(self.alphas),
            "processes": [p.to_dict() for p in self.processes],
            "length": self.length,
            "seed_base": self.seed_base,
            "spike_rate": self.spike_rate,
            "spike_scale": self.spike_scale,
            "input_seed": self.input_seed,
            "min_gap": self.min_gap,
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "GridSpec":
        """
        Builds a grid from its JSON form; missing keys keep their defaults.

        Raises:
            DataError: On unknown keys or malformed values.
        """
        unknown = set(data) - set(cls().to_dict())
        if unknown:
            raise DataError(f"Unknown grid settings: {sorted(unknown)}")
        try:
            kwargs = dict(data)
            for key in ("ks", "alphas"):
                if key in kwargs:
                    kwargs[key] = tuple(kwargs[key])
            if "processes" in kwargs:
                kwargs["processes"] = tuple(ErrorProcess.from_dict(p) for p in kwargs["processes"])
            return cls(**kwargs)
        except (TypeError, ValueError, ArithmeticError) as e:
            raise DataError(f"Invalid grid settings: {e}") from e


DESK_GRID = GridSpec(ks=(1, 2, 3), setups_per_k=3, alphas=(0.05, 0.5))


@dataclass(frozen=True)
class StudyConfig:
    """
    How each cell is fitted and scored.

    Attributes:
        train: Training settings; with select_k off each cell is fitted with k_max = k_gt.
        split: Share of leading points used for training.
        autocorr: Apply the autocorrelation correction; None applies it to AR cells only.
        max_ar_order: Largest AR order of the correction.
        dw_alpha: Durbin-Watson level that triggers the correction.
        dw_target: Durbin-Watson p-value the corrected residuals should reach.
        n_boot: Permutations per Durbin-Watson test.
        workers: Cells run at the same time.
    """

    train: TrainConfig = field(default_factory=TrainConfig)
    split: float = SPLIT
    autocorr: Optional[bool] = None
    max_ar_order: int = MAX_AR_ORDER
    dw_alpha: float = DW_ALPHA
    dw_target: float = DW_TARGET
    n_boot: int = DW_BOOTSTRAP
    workers: int = STUDY_WORKERS

    def uses_autocorr(self, process: ErrorProcess) -> bool:
        return process.kind == "ar" if self.autocorr is None else bool(self.autocorr)

    def train_config(self, k_gt: int) -> TrainConfig:
        """Training settings of a cell; without k selection the cell is fitted with its true k."""
        if self.train.select_k:
            return self.train
        return replace(self.train, k_max=int(k_gt))

    def to_dict(self) -> Dict[str, Any]:
        return {
            "train": self.train.to_dict(),
            "split": self.split,
            "autocorr": self.autocorr,
            "max_ar_order": self.max_ar_order,
            "dw_alpha": self.dw_alpha,
            "dw_target": self.dw_target,
            "n_boot": self.n_boot,
        }


ROW_COLUMNS = [
    "setup_id", "k_gt", "alpha", "process", "seed", "overlap", "r2", "kge", "rmse",
    "k_selected", "delta_k", "phi_true", "phi_hat", "r2_bound", "error",
]


def run_cell(cell: StudyCell, config: StudyConfig) -> Dict[str, Any]:
    """
    Generates, fits and scores one cell.

    Failures are returned in the row's error field instead of being raised.
    """
    setup = cell.setup
    process = setup.error_process
    row: Dict[str, Any] = {column: None for column in ROW_COLUMNS}
    row.update({
        "setup_id": cell.setup_id,
        "k_gt": cell.k_gt,
        "alpha": setup.alpha,
        "process": process.label,
        "seed": setup.seed,
        "phi_true": process.phi[0] if process.phi else None,
    })
    try:
        simulated = generate(setup)
        train, _ = simulated.data.split(config.split)
        train_config = config.train_config(cell.k_gt)
        if config.uses_autocorr(process):
            report = fit_with_autocorr(train, train_config, max_order=config.max_ar_order,
                                       dw_alpha=config.dw_alpha, dw_target=config.dw_target,
                                       n_boot=config.n_boot, seed=setup.seed)
        else:
            report = fit(train, train_config)
        model = report.final_model
        scores = evaluate_split(model, simulated.data, config.split)
    except (SwrError, ArithmeticError, ValueError) as e:
        logger.warning(f"Cell {cell.index} ({cell.setup_id}, alpha={setup.alpha:g}, {process.label}) failed: {e}")
        row["error"] = str(e)
        return row

    info = report.autocorr_info
    row.update({
        "overlap": model_overlap(model, setup.truth),
        "r2": scores.r2,
        "kge": scores.kge,
        "rmse": scores.rmse,
        "k_selected": model.k,
        "delta_k": model.k - cell.k_gt,
        "phi_hat": info.ar.phi[0] if info is not None and info.ar is not None else None,
        "r2_bound": r2_bound(setup.alpha, process, len(simulated.data)),
    })
    logger.info(
        f"Cell {cell.index} ({cell.setup_id}, alpha={setup.alpha:g}, {process.label}): "
        f"k={model.k}, overlap={row['overlap']:.4f}, test R2={scores.r2:.4f}"
    )
    return row


def _failed_row(cell: StudyCell, message: str) -> Dict[str, Any]:
    row: Dict[str, Any] = {column: None for column in ROW_COLUMNS}
    row.update({"setup_id": cell.setup_id, "k_gt": cell.k_gt, "alpha": cell.setup.alpha,
                "process": cell.setup.error_process.label, "seed": cell.setup.seed, "error": message})
    return row


@dataclass
class StudyReport:
    """One row per cell plus the settings that produced them."""

    rows: List[Dict[str, Any]]
    grid: Optional[GridSpec] = None
    config: Optional[StudyConfig] = None

    def frame(self) -> pd.DataFrame:
        frame = pd.DataFrame(self.rows, columns=ROW_COLUMNS)
        for column in ("overlap", "r2", "kge", "rmse", "phi_true", "phi_hat", "r2_bound", "alpha"):
            frame[column] = pd.to_numeric(frame[column], errors="coerce")
        return frame

    def aggregates(self) -> Dict[str, Any]:
        """
        Summaries of the successful cells.

        Returns:
            dict: keys n_cells, n_failed, by_noise_level (means per k_gt and alpha),
                delta_k_histogram and fraction_correct_k (per k_gt), mean_abs_phi_error
        """
        frame = self.frame()
        ok = frame[frame["error"].isna()].copy()
        aggregates: Dict[str, Any] = {"n_cells": int(len(frame)), "n_failed": int(len(frame) - len(ok))}

        by_level = []
        if len(ok):
            grouped = ok.groupby(["k_gt", "alpha"], sort=True)
            for (k_gt, alpha), group in grouped:
                entry = {"k_gt": int(k_gt), "alpha": float(alpha), "n": int(len(group))}
                for column in ("overlap", "r2", "kge", "rmse", "r2_bound"):
                    entry[f"mean_{column}"] = _number(group[column].mean())
                by_level.append(entry)
        aggregates["by_noise_level"] = by_level

        histogram: Dict[str, Dict[str, int]] = {}
        correct: Dict[str, float] = {}
        for k_gt, group in ok.groupby("k_gt", sort=True):
            counts = group["delta_k"].astype(int).value_counts().sort_index()
            histogram[str(int(k_gt))] = {str(int(dk)): int(n) for dk, n in counts.items()}
            correct[str(int(k_gt))] = float((group["delta_k"] == 0).mean())
        aggregates["delta_k_histogram"] = histogram
        aggregates["fraction_correct_k"] = correct

        phi_rows = ok.dropna(subset=["phi_hat", "phi_true"])
        aggregates["mean_abs_phi_error"] = (
            _number((phi_rows["phi_hat"] - phi_rows["phi_true"]).abs().mean()) if len(phi_rows) else None
        )
        return aggregates

    def write(self, out_dir: Union[str, Path]) -> Dict[str, Path]:
        """Writes study.csv and study_summary.json to out_dir and returns their paths."""
        out_dir = BaseManager.ensure_dir(out_dir)
        csv_path = DatasetManager.write_rows(out_dir / "study.csv", self.rows, ROW_COLUMNS)
        summary = {
            "grid": None if self.grid is None else self.grid.to_dict(),
            "config": None if self.config is None else self.config.to_dict(),
            "aggregates": self.aggregates(),
        }
        json_path = BaseManager.write_json(out_dir / "study_summary.json", summary)
        return {"rows": csv_path, "summary": json_path}


def _number(value) -> Optional[float]:
    value = float(value)
    return value if math.isfinite(value) else None


def run_study(cells: Sequence[StudyCell], config: Optional[StudyConfig] = None,
              grid: Optional[GridSpec] = None) -> StudyReport:
    """
    Runs every cell, several at a time, and collects one row per cell.

    Rows keep the cell order whatever the scheduling, and seeds are fixed per
    cell, so a study is reproducible for any worker count.

    Args:
        cells: Grid cells, e.g. from GridSpec.cells().
        config: Fit and scoring settings.
        grid: Grid the cells came from, recorded in the report.

    Returns:
        StudyReport: Rows in cell order.
    """
    config = config or StudyConfig()
    workers = max(1, int(config.workers))
    rows: List[Dict[str, Any]] = []
    logger.info(f"Running {len(cells)} simulation cells with {workers} workers")
    for batch_start in range(0, len(cells), workers):
        batch = cells[batch_start:batch_start + workers]
        if workers == 1:
            rows.extend(run_cell(cell, config) for cell in batch)
            continue
        threads = [ThreadWithReturnValue(target=run_cell, args=(cell, config)) for cell in batch]
        for thread in threads:
            thread.start()
        for cell, thread in zip(batch, threads):
            row = thread.join()
            rows.append(row if row is not None else _failed_row(cell, "cell thread terminated without a result"))

    failed = sum(1 for row in rows if row["error"] is not None)
    if failed:
        logger.warning(f"{failed} of {len(rows)} simulation cells failed")
    return StudyReport(rows=rows, grid=grid, config=config)
