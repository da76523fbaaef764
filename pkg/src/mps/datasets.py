"""Data ingestion, standardization, and synthetic generators.

Covers CSV loading with optional second-order expansion, the Toeplitz-design
linear generator used throughout the simulation study, and the 18-covariate
grouped motivating model.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

__all__ = [
    "DataMatrix",
    "SyntheticSpec",
    "TrainTestPair",
    "load_csv",
    "toeplitz_cov",
    "make_beta",
    "gen_linear",
    "gen_motivating",
    "standardize",
    "apply_standardization",
]

MEAN_TOL = 1e-8
SD_TOL = 1e-6


@dataclass
class DataMatrix:
    """An n x p covariate matrix with its response vector and column names.

    Parameters
    ----------
    x : ndarray, shape (n, p)
        Covariates, float64.
    y : ndarray, shape (n,)
        Response, float64.
    names : list of str
        Unique column labels, one per covariate.
    standardized : bool
        True when every non-constant column has sample mean 0 and sample
        standard deviation 1.
    constant_columns : tuple of int
        Indices of zero-variance columns (exempt from the standardization
        invariant, flagged rather than rejected).
    """

    x: np.ndarray
    y: np.ndarray
    names: list[str]
    standardized: bool = False
    constant_columns: tuple[int, ...] = ()

    def __post_init__(self):
        self.x = np.ascontiguousarray(self.x, dtype=np.float64)
        self.y = np.ascontiguousarray(self.y, dtype=np.float64)
        if self.x.ndim != 2:
            raise ValueError("x must be 2-dimensional")
        n, p = self.x.shape
        if n < 2:
            raise ValueError(f"need at least 2 rows, got {n}")
        if p < 1:
            raise ValueError("need at least 1 covariate")
        if self.y.shape != (n,):
            raise ValueError(f"y must have shape ({n},), got {self.y.shape}")
        if not np.isfinite(self.x).all() or not np.isfinite(self.y).all():
            raise ValueError("non-finite entries in data")
        self.names = list(self.names)
        if len(self.names) != p:
            raise ValueError(f"expected {p} names, got {len(self.names)}")
        if len(set(self.names)) != p:
            dupes = sorted({c for c in self.names if self.names.count(c) > 1})
            raise ValueError(f"duplicate column names: {dupes}")
        if self.standardized:
            exempt = set(self.constant_columns)
            mu = self.x.mean(axis=0)
            sd = self.x.std(axis=0)
            for j in range(p):
                if j in exempt:
                    continue
                if abs(mu[j]) > MEAN_TOL or abs(sd[j] - 1.0) > SD_TOL:
                    raise ValueError(
                        f"column {self.names[j]} violates the standardization "
                        f"invariant (mean {mu[j]:.3g}, sd {sd[j]:.3g})")

    @property
    def n(self) -> int:
        return self.x.shape[0]

    @property
    def p(self) -> int:
        return self.x.shape[1]

    def take(self, rows) -> "DataMatrix":
        """Row subset as a new DataMatrix (standardization flag is dropped)."""
        rows = np.asarray(rows)
        return DataMatrix(self.x[rows], self.y[rows], list(self.names),
                          standardized=False,
                          constant_columns=self.constant_columns)


@dataclass(frozen=True)
class SyntheticSpec:
    """Settings for one synthetic linear-model dataset."""

    n: int
    p: int
    s: int
    rho: float
    snr: float
    beta_type: int
    seed: int

    def __post_init__(self):
        if not 1 <= self.s <= self.p:
            raise ValueError(f"need 1 <= s <= p, got s={self.s}, p={self.p}")
        if self.snr <= 0:
            raise ValueError("snr must be positive")
        if not 0.0 <= self.rho < 1.0:
            raise ValueError("rho must lie in [0, 1)")
        if self.beta_type not in (1, 2, 3):
            raise ValueError("beta_type must be 1, 2, or 3")

    def to_json(self) -> str:
        return json.dumps({"n": self.n, "p": self.p, "s": self.s,
                           "rho": self.rho, "snr": self.snr,
                           "beta_type": self.beta_type, "seed": self.seed})

    @classmethod
    def from_json(cls, text: str) -> "SyntheticSpec":
        d = json.loads(text)
        return cls(n=int(d["n"]), p=int(d["p"]), s=int(d["s"]),
                   rho=float(d["rho"]), snr=float(d["snr"]),
                   beta_type=int(d["beta_type"]), seed=int(d["seed"]))


@dataclass
class TrainTestPair:
    train: DataMatrix
    test: DataMatrix
    beta_true: np.ndarray = field(default_factory=lambda: np.zeros(0))

    def __post_init__(self):
        self.beta_true = np.asarray(self.beta_true, dtype=np.float64)
        if self.train.p != self.test.p:
            raise ValueError("train and test column counts differ")
        if self.beta_true.shape != (self.train.p,):
            raise ValueError("beta_true length must equal p")


class CsvFormatError(ValueError):
    """Raised when an input CSV violates the expected format."""


def _expand_second_order(x: np.ndarray, names: list[str]):
    """Append squares and all pairwise products.

    Squares of columns with at most two distinct values are skipped: for a
    binary column the square is an affine duplicate of the column itself.
    """
    p = x.shape[1]
    cols = [x]
    out_names = list(names)
    for j in range(p):
        if len(np.unique(x[:, j])) > 2:
            cols.append((x[:, j] ** 2)[:, None])
            out_names.append(f"{names[j]}^2")
    for i in range(p):
        for j in range(i + 1, p):
            cols.append((x[:, i] * x[:, j])[:, None])
            out_names.append(f"{names[i]}:{names[j]}")
    return np.hstack(cols), out_names


def standardize(x: np.ndarray):
    """Column-wise standardization statistics and transform.

    Returns (standardized x, mean, sd, constant column indices); constant
    columns keep sd 1 so they pass through unchanged (centered).
    """
    mu = x.mean(axis=0)
    sd = x.std(axis=0)
    constant = tuple(int(j) for j in np.flatnonzero(sd == 0.0))
    sd_safe = np.where(sd == 0.0, 1.0, sd)
    return (x - mu) / sd_safe, mu, sd_safe, constant


def apply_standardization(x: np.ndarray, mu: np.ndarray, sd: np.ndarray) -> np.ndarray:
    return (x - mu) / sd


def load_csv(path, response: str, standardize_columns: bool = False,
             expand_second_order: bool = False) -> DataMatrix:
    """Load a numeric CSV (RFC-4180, header row required) into a DataMatrix.

    Parameters
    ----------
    path : str or Path
        CSV file with a header row and '.'-decimal numeric cells.
    response : str
        Name of the response column.
    standardize_columns : bool
        Standardize every covariate column to mean 0, sd 1 using full-data
        statistics.  Zero-variance columns are flagged, not rejected.
    expand_second_order : bool
        Append squares and pairwise products before standardizing.
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"no such file: {path}")
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise CsvFormatError(f"{path}: empty file") from None
        header = [h.strip() for h in header]
        if len(set(header)) != len(header):
            dupes = sorted({h for h in header if header.count(h) > 1})
            raise CsvFormatError(f"{path}: duplicate column names {dupes}")
        if response not in header:
            raise CsvFormatError(f"{path}: response column {response!r} not found")
        rows = []
        for lineno, rec in enumerate(reader, start=2):
            if not rec:
                continue
            if len(rec) != len(header):
                raise CsvFormatError(
                    f"{path}: row {lineno} has {len(rec)} cells, expected {len(header)}")
            vals = []
            for col, cell in zip(header, rec):
                try:
                    vals.append(float(cell))
                except ValueError:
                    raise CsvFormatError(
                        f"{path}: non-numeric cell at row {lineno}, "
                        f"column {col!r}: {cell!r}") from None
            rows.append(vals)
    if len(rows) < 2:
        raise CsvFormatError(f"{path}: need at least 2 data rows")
    data = np.asarray(rows, dtype=np.float64)
    ycol = header.index(response)
    y = data[:, ycol]
    x = np.delete(data, ycol, axis=1)
    names = [h for h in header if h != response]

    if expand_second_order:
        x, names = _expand_second_order(x, names)

    constant: tuple[int, ...] = ()
    is_std = False
    if standardize_columns:
        x, _, _, constant = standardize(x)
        is_std = True
    return DataMatrix(x, y, names, standardized=is_std, constant_columns=constant)


def toeplitz_cov(p: int, rho: float) -> np.ndarray:
    """Toeplitz covariance with entry (i, j) = rho^|i-j|."""
    if not 0.0 <= rho < 1.0:
        raise ValueError(f"rho must lie in [0, 1), got {rho}")
    idx = np.arange(p)
    return rho ** np.abs(idx[:, None] - idx[None, :]).astype(np.float64)


def make_beta(p: int, s: int, beta_type: int) -> np.ndarray:
    """Sparse coefficient vector for the three simulation sparsity patterns.

    Type 1 places s ones at (approximately) equally spaced positions over
    1..p, using round-half-up of 1 + (k-1)(p-1)/(s-1); type 2 places s ones
    in the first s positions; type 3 fills the first s positions with values
    equally spaced from 10 down to 0.5.
    """
    if not 1 <= s <= p:
        raise ValueError(f"need 1 <= s <= p, got s={s}, p={p}")
    beta = np.zeros(p)
    if beta_type == 1:
        if s == 1:
            beta[0] = 1.0
        else:
            for k in range(s):
                pos = 1.0 + k * (p - 1) / (s - 1)
                beta[int(np.floor(pos + 0.5)) - 1] = 1.0
    elif beta_type == 2:
        beta[:s] = 1.0
    elif beta_type == 3:
        if s == 1:
            beta[0] = 10.0
        else:
            beta[:s] = 10.0 - np.arange(s) * (9.5 / (s - 1))
    else:
        raise ValueError("beta_type must be 1, 2, or 3")
    return beta


def _sample_pair(sigma: np.ndarray, beta: np.ndarray, snr: float,
                 n: int, n_test: int, seed: int, names: list[str]) -> TrainTestPair:
    # X rows are N(0, sigma) via Cholesky; noise variance is beta' sigma beta / snr
    chol = np.linalg.cholesky(sigma)
    signal_var = float(beta @ sigma @ beta)
    noise_sd = np.sqrt(signal_var / snr)
    rng = np.random.default_rng(seed)
    p = len(beta)

    def draw(rows: int) -> DataMatrix:
        x = rng.standard_normal((rows, p)) @ chol.T
        eps = noise_sd * rng.standard_normal(rows)
        return DataMatrix(x, x @ beta + eps, list(names))

    train = draw(n)
    test = draw(n_test)
    return TrainTestPair(train, test, beta)


def gen_linear(spec: SyntheticSpec, n_test: int) -> TrainTestPair:
    """Train/test pair from Y = X beta + eps with Toeplitz-correlated X.

    Deterministic given the settings (including the seed); the test set is
    drawn from the same stream after the training set.
    """
    sigma = toeplitz_cov(spec.p, spec.rho)
    beta = make_beta(spec.p, spec.s, spec.beta_type)
    names = [f"x{j + 1}" for j in range(spec.p)]
    return _sample_pair(sigma, beta, spec.snr, spec.n, n_test, spec.seed, names)


MOTIVATING_BETA = np.array([3.0] * 3 + [2.0] * 3 + [1.0] * 3 + [0.0] * 9)


def gen_motivating(n: int, snr: float, seed: int, n_test: int = 10_000) -> TrainTestPair:
    """Grouped 18-covariate model: three correlated signal groups, one noise group.

    Groups of sizes (3, 3, 3, 9) are mutually independent; within each of the
    three signal groups the pairwise correlation is 0.9; the nine noise
    covariates are mutually independent.  Coefficients are
    (3,3,3, 2,2,2, 1,1,1, 0 x 9) and the noise is scaled to the requested SNR.
    """
    if n < 2:
        raise ValueError("need n >= 2")
    block = np.full((3, 3), 0.9)
    np.fill_diagonal(block, 1.0)
    sigma = np.zeros((18, 18))
    for g in range(3):
        sigma[3 * g:3 * g + 3, 3 * g:3 * g + 3] = block
    sigma[9:, 9:] = np.eye(9)
    names = [f"x{j + 1}" for j in range(18)]
    return _sample_pair(sigma, MOTIVATING_BETA, snr, n, n_test, seed, names)
