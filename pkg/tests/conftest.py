import sys
from pathlib import Path

import numpy as np
import pytest

# Ensure project root is on sys.path so `config` and `swr.*` import when running from anywhere
PROJECT_ROOT = Path(__file__).resolve().parents[1]
if str(PROJECT_ROOT) not in sys.path:
    sys.path.insert(0, str(PROJECT_ROOT))

from swr.model import SwrModel, TimeSeriesPair  # noqa: E402
from swr.sim import synthetic_rainfall  # noqa: E402


@pytest.fixture
def rainfall():
    return synthetic_rainfall(2000, seed=11)


@pytest.fixture
def one_window_truth():
    return SwrModel.from_params([2.0], [4.0], [1.5])


@pytest.fixture
def noisy_one_window(rainfall, one_window_truth):
    """One-window data with white noise of sd 0.2."""
    clean = np.convolve(rainfall, one_window_truth.combined_kernel())[:rainfall.size]
    rng = np.random.default_rng(5)
    return TimeSeriesPair(x=rainfall, y=clean + rng.normal(0.0, 0.2, rainfall.size))


@pytest.fixture
def noiseless_one_window(rainfall, one_window_truth):
    clean = np.convolve(rainfall, one_window_truth.combined_kernel())[:rainfall.size]
    return TimeSeriesPair(x=rainfall, y=clean)
