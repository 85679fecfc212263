from pathlib import Path

import numpy as np
import pytest

from rsmopt.cli import fit_from_config, ingest_csv_wide, load_config

ROOT = Path(__file__).resolve().parents[1]
CONFIG_PATH = ROOT / "configs" / "example.json"
WIDE_CSV = ROOT / "data" / "experiment_wide.csv"
LONG_CSV = ROOT / "data" / "experiment_long.csv"

# Table of the worked example: 8 two-level runs, 4 replicates, 2 responses.
RAW_RUNS = [
    (8, (1, 1, 1), [104.45, 105.03, 99.79, 104.92], [76.90, 77.03, 67.99, 75.77]),
    (4, (1, 1, -1), [104.12, 104.80, 104.20, 104.34], [72.99, 74.25, 73.94, 73.28]),
    (6, (1, -1, 1), [98.73, 99.36, 102.84, 94.24], [67.10, 63.61, 68.65, 62.42]),
    (2, (1, -1, -1), [100.19, 99.63, 100.27, 100.60], [67.03, 66.18, 66.58, 67.94]),
    (7, (-1, 1, 1), [103.15, 106.96, 107.62, 103.44], [71.68, 76.27, 77.50, 76.37]),
    (3, (-1, 1, -1), [106.08, 105.64, 105.67, 105.39], [72.94, 72.85, 72.58, 72.38]),
    (5, (-1, -1, 1), [113.52, 111.12, 112.85, 106.67], [68.29, 68.47, 68.96, 64.71]),
    (1, (-1, -1, -1), [109.90, 109.76, 110.70, 109.77], [67.70, 67.24, 67.96, 66.93]),
]

TAU = np.array([103.0, 73.0])
WEIGHTS = np.array([0.285, 0.715])


@pytest.fixture(scope="session")
def run_config():
    return load_config(CONFIG_PATH)


@pytest.fixture(scope="session")
def example_data():
    return ingest_csv_wide(WIDE_CSV, response_order=["Y1", "Y2"])


@pytest.fixture(scope="session")
def example_model(run_config, example_data):
    return fit_from_config(run_config, example_data)
