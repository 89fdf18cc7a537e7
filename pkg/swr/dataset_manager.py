"""
Dataset Manager Module
===================

This module provides the DatasetManager class that handles all tabular file operations.
It reads input/target series from CSV files with line-level diagnostics and writes
datasets, predictions, study rows and kernel tables back as CSV.
"""

from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Union

import numpy as np
import pandas as pd

from .base_manager import BaseManager
from .errors import DataError
from .model import Prediction, SwrModel, TimeSeriesPair


@dataclass(frozen=True)
class DatasetFile:
    """
    Location and column mapping of a dataset.

    Attributes:
        path: CSV file.
        input_column: Column of the input series.
        target_column: Column of the target series (optional for prediction).
        time_column: Optional integer time column; rows must be in increasing time order.
        delimiter: Field separator.
        header: Whether the first line holds column names. Without a header,
            columns are addressed by zero-based position ("0", "1", ...).
    """

    path: Union[str, Path]
    input_column: str = "x"
    target_column: Optional[str] = "y"
    time_column: Optional[str] = None
    delimiter: str = ","
    header: bool = True


class DatasetManager(BaseManager):
    """
    Manages dataset files: reading series with diagnostics and writing result tables.
    """

    @classmethod
    def _read_frame(cls, path: Union[str, Path], delimiter: str, header: bool) -> pd.DataFrame:
        try:
            frame = pd.read_csv(
                path,
                sep=delimiter,
                header=0 if header else None,
                dtype=str,
                keep_default_na=False,
                skip_blank_lines=False,
            )
        except FileNotFoundError as e:
            raise DataError(f"Dataset {path} does not exist") from e
        except pd.errors.EmptyDataError as e:
            raise DataError(f"{path}: file is empty") from e
        except pd.errors.ParserError as e:
            raise DataError(f"{path}: {e}") from e
        except (OSError, UnicodeDecodeError) as e:
            raise DataError(f"Cannot read {path}: {e}") from e
        if not header:
            frame.columns = [str(c) for c in frame.columns]
        return frame

    @classmethod
    def _numeric_column(cls, frame: pd.DataFrame, column: str, path, header: bool) -> np.ndarray:
        """
        Parses one column as finite floats.

        Raises:
            DataError: Naming file, line and column of the first bad cell.
        """
        if column not in frame.columns:
            raise DataError(f"{path}: column {column!r} not found (available: {list(frame.columns)})")
        raw = frame[column]
        values = pd.to_numeric(raw, errors="coerce").to_numpy(dtype=float)
        bad = np.flatnonzero(~np.isfinite(values))
        if bad.size:
            position = int(bad[0])
            line = position + (2 if header else 1)
            cell = raw.iloc[position]
            cell = "" if pd.isna(cell) else cell
            raise DataError(f"{path}, line {line}, column {column!r}: cannot parse {cell!r} as a finite number")
        return values

    @classmethod
    def read_dataset(cls, dataset: DatasetFile) -> TimeSeriesPair:
        """
        Reads an input/target pair from CSV.

        Args:
            dataset: File and column mapping; the target column is required.

        Returns:
            TimeSeriesPair: Series with the time column (or row numbers) as index.

        Raises:
            DataError: On parse errors, missing columns or rows out of time order.
        """
        if dataset.target_column is None:
            raise DataError("A target column is required to read a training dataset")
        frame = cls._read_frame(dataset.path, dataset.delimiter, dataset.header)
        if len(frame) == 0:
            raise DataError(f"{dataset.path}: no data rows")
        x = cls._numeric_column(frame, dataset.input_column, dataset.path, dataset.header)
        y = cls._numeric_column(frame, dataset.target_column, dataset.path, dataset.header)
        index = cls._time_index(frame, dataset)
        return TimeSeriesPair(x=x, y=y, index=index)

    @classmethod
    def read_input(cls, path: Union[str, Path], column: str = "x", delimiter: str = ",",
                   header: bool = True) -> np.ndarray:
        """Reads a single input column as a float array."""
        frame = cls._read_frame(path, delimiter, header)
        if len(frame) == 0:
            raise DataError(f"{path}: no data rows")
        return cls._numeric_column(frame, column, path, header)

    @classmethod
    def read_prediction_input(cls, dataset: DatasetFile) -> Dict[str, Any]:
        """
        Reads what prediction needs: the input, the time index and the target when present.

        Returns:
            dict: keys x, index, y (None when the target column is absent)
        """
        frame = cls._read_frame(dataset.path, dataset.delimiter, dataset.header)
        if len(frame) == 0:
            raise DataError(f"{dataset.path}: no data rows")
        x = cls._numeric_column(frame, dataset.input_column, dataset.path, dataset.header)
        y = None
        if dataset.target_column is not None and dataset.target_column in frame.columns:
            y = cls._numeric_column(frame, dataset.target_column, dataset.path, dataset.header)
        return {"x": x, "y": y, "index": cls._time_index(frame, dataset)}

    @classmethod
    def _time_index(cls, frame: pd.DataFrame, dataset: DatasetFile) -> np.ndarray:
        if dataset.time_column is None:
            return np.arange(len(frame))
        times = cls._numeric_column(frame, dataset.time_column, dataset.path, dataset.header)
        if not np.all(times == np.round(times)):
            position = int(np.flatnonzero(times != np.round(times))[0])
            raise DataError(
                f"{dataset.path}, line {position + (2 if dataset.header else 1)}, column {dataset.time_column!r}: "
                f"time stamps must be integers"
            )
        steps = np.diff(times)
        if np.any(steps <= 0):
            position = int(np.flatnonzero(steps <= 0)[0]) + 1
            raise DataError(
                f"{dataset.path}, line {position + (2 if dataset.header else 1)}: rows are not in increasing time order"
            )
        return times.astype(int)

    @classmethod
    def write_dataset(cls, path: Union[str, Path], data: Union[TimeSeriesPair, pd.DataFrame]) -> Path:
        """Writes a pair (time, x, y) or a ready frame as CSV."""
        frame = data if isinstance(data, pd.DataFrame) else pd.DataFrame(
            {"time": data.index, "x": data.x, "y": data.y}
        )
        return cls._write_frame(path, frame)

    @classmethod
    def write_predictions(cls, path: Union[str, Path], index: Sequence[int], x: Sequence[float],
                          prediction: Prediction, y: Optional[Sequence[float]] = None) -> Path:
        """
        Writes predictions with columns time, x, y (when known), y_hat and valid.

        Invalid rows carry an empty y_hat.
        """
        columns: Dict[str, Any] = {"time": np.asarray(index), "x": np.asarray(x)}
        if y is not None:
            columns["y"] = np.asarray(y)
        columns["y_hat"] = prediction.values
        columns["valid"] = prediction.valid.astype(int)
        return cls._write_frame(path, pd.DataFrame(columns))

    @classmethod
    def write_rows(cls, path: Union[str, Path], rows: List[Dict[str, Any]], columns: Sequence[str]) -> Path:
        return cls._write_frame(path, pd.DataFrame(rows, columns=list(columns)))

    @classmethod
    def write_kernels(cls, path: Union[str, Path], model: SwrModel) -> Path:
        """
        Writes the plot-ready kernel table: lag, beta_i * kernel_i per window,
        the combined kernel and its normalized form.
        """
        combined = model.combined_kernel()
        length = combined.size
        columns: Dict[str, Any] = {"lag": np.arange(length)}
        for i, (beta, window) in enumerate(zip(model.betas, model.windows), start=1):
            columns[f"window_{i}"] = beta * window.dense(length)
        columns["combined"] = combined
        total = combined.sum()
        columns["normalized"] = combined / total if total > 0 else np.zeros(length)
        return cls._write_frame(path, pd.DataFrame(columns))

    @classmethod
    def _write_frame(cls, path: Union[str, Path], frame: pd.DataFrame) -> Path:
        path = Path(path)
        try:
            frame.to_csv(path, index=False, float_format="%.17g")
        except OSError as e:
            raise DataError(f"Writing {path} failed: {e}") from e
        return path

    @classmethod
    def load_model(cls, path: Union[str, Path]) -> SwrModel:
        """
        Loads a model from a model JSON, a fit report JSON or a simulation truth JSON.

        Raises:
            DataError: If the document holds no model.
        """
        document = cls.read_json(path)
        if isinstance(document, dict) and "windows" in document:
            return SwrModel.from_dict(document)
        for key in ("model", "truth"):
            if isinstance(document, dict) and isinstance(document.get(key), dict):
                return SwrModel.from_dict(document[key])
        raise DataError(f"{path} holds no model, fit report or simulation truth")
