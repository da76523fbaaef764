"""Shared fixtures and data builders for the test suite."""

from __future__ import annotations

import csv
from pathlib import Path

import numpy as np
import pytest

from mps.datasets import DataMatrix


def write_csv(path: Path, header, rows) -> Path:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([repr(float(v)) for v in row])
    return path


def random_regression(seed: int, n: int, p: int, snr: float = 4.0) -> DataMatrix:
    rng = np.random.default_rng(seed)
    x = rng.standard_normal((n, p))
    beta = np.zeros(p)
    beta[: max(1, p // 3)] = rng.uniform(0.5, 2.0, max(1, p // 3))
    signal = x @ beta
    noise = rng.standard_normal(n) * np.sqrt(signal.var() / snr)
    return DataMatrix(x, signal + noise, [f"x{j + 1}" for j in range(p)])


def breast_cancer_surrogate(seed: int = 1, n: int = 699) -> DataMatrix:
    """Stand-in for the original 9-feature cytology dataset (integer 1-10 scales).

    The real file is not redistributable here; this surrogate reproduces its
    documented structure: ~34.5% positives, strongly correlated ordinal
    features that each separate the classes well, and a small label-noise
    floor so no feature is perfect on the full sample.
    """
    rng = np.random.default_rng(seed)
    y = (rng.random(n) < 0.345).astype(float)
    z = np.where(y == 1, rng.normal(6.3, 1.5, n), rng.normal(1.9, 0.8, n))
    x = np.empty((n, 9))
    for j in range(9):
        x[:, j] = np.clip(np.round(z + rng.normal(0, 1.1, n)), 1, 10)
    yy = np.where(rng.random(n) < 0.015, 1 - y, y)
    names = ["clump_thickness", "size_uniformity", "shape_uniformity",
             "marginal_adhesion", "epithelial_size", "bare_nuclei",
             "bland_chromatin", "normal_nucleoli", "mitoses"]
    return DataMatrix(x, yy, names)


@pytest.fixture(scope="session")
def diabetes_csv(tmp_path_factory) -> Path:
    """The 442-patient disease-progression dataset (10 baseline covariates)."""
    sklearn_datasets = pytest.importorskip("sklearn.datasets")
    d = sklearn_datasets.load_diabetes(scaled=False)
    path = tmp_path_factory.mktemp("data") / "diabetes.csv"
    rows = [list(row) + [float(t)] for row, t in zip(d.data, d.target)]
    return write_csv(path, list(d.feature_names) + ["y"], rows)


@pytest.fixture(scope="session")
def breast_csv(tmp_path_factory) -> Path:
    dm = breast_cancer_surrogate(seed=1)
    path = tmp_path_factory.mktemp("data") / "breast.csv"
    rows = [list(row) + [yy] for row, yy in zip(dm.x, dm.y)]
    return write_csv(path, dm.names + ["y"], rows)
