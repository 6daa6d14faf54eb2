"""Shared data model: datasets, standardized designs, estimates, ground truth.

All containers are frozen dataclasses holding read-only numpy arrays, so they
can be shared freely between threads and worker processes.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
from scipy import linalg

from .exceptions import DataError, LengthMismatch, RankDeficient

PIVOT_TOL = 1e-10


def _frozen(a, dtype=float) -> np.ndarray:
    arr = np.array(a, dtype=dtype, copy=True)
    arr.setflags(write=False)
    return arr


def floor_n_over_log_n(n: int, factor: float = 1.0) -> int:
    """``[factor * n / log n]`` with natural log and floor (n=200 -> 37)."""
    return int(math.floor(factor * n / math.log(n)))


@dataclass(frozen=True)
class Dataset:
    """Response vector ``y`` (length n) and raw design ``X`` (n x p)."""

    y: np.ndarray
    X: np.ndarray
    feature_names: Optional[tuple] = None

    def __post_init__(self):
        y = np.asarray(self.y, dtype=float)
        X = np.asarray(self.X, dtype=float)
        if y.ndim != 1:
            raise DataError("y must be one-dimensional")
        if X.ndim != 2:
            raise DataError("X must be two-dimensional")
        n, p = X.shape
        if y.shape[0] != n:
            raise DataError(f"y has length {y.shape[0]} but X has {n} rows")
        if n < 2:
            raise DataError("need at least two observations")
        if p < 1:
            raise DataError("need at least one predictor")
        if not (np.all(np.isfinite(y)) and np.all(np.isfinite(X))):
            raise DataError("non-finite entries in dataset")
        names = self.feature_names
        if names is not None:
            names = tuple(str(s) for s in names)
            if len(names) != p:
                raise DataError(f"{len(names)} feature names for {p} columns")
        object.__setattr__(self, "y", _frozen(y))
        object.__setattr__(self, "X", _frozen(X))
        object.__setattr__(self, "feature_names", names)

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def p(self) -> int:
        return self.X.shape[1]


@dataclass(frozen=True)
class StandardizedDesign:
    """Column-standardized design with the statistics needed to undo it.

    ``Z = (X - col_means) / col_scales``. Constant columns have scale 1, an
    all-zero ``Z`` column and ``constant[j] = True``.
    """

    Z: np.ndarray
    col_means: np.ndarray
    col_scales: np.ndarray
    y_centered: np.ndarray
    constant: np.ndarray
    y_mean: float = 0.0

    def __post_init__(self):
        for name in ("Z", "col_means", "col_scales", "y_centered"):
            object.__setattr__(self, name, _frozen(getattr(self, name)))
        object.__setattr__(self, "constant", _frozen(self.constant, dtype=bool))

    @property
    def n(self) -> int:
        return self.Z.shape[0]

    @property
    def p(self) -> int:
        return self.Z.shape[1]

    def columns(self, idx, response=None) -> "StandardizedDesign":
        """Restrict to columns ``idx``, optionally swapping in a new centered response."""
        idx = np.asarray(idx, dtype=np.intp)
        return StandardizedDesign(
            Z=self.Z[:, idx],
            col_means=self.col_means[idx],
            col_scales=self.col_scales[idx],
            y_centered=self.y_centered if response is None else response,
            constant=self.constant[idx],
            y_mean=self.y_mean,
        )

    def unstandardize(self) -> np.ndarray:
        return self.Z * self.col_scales + self.col_means

    def to_raw_coef(self, beta: np.ndarray) -> np.ndarray:
        """Map standardized-scale coefficients to raw predictor units."""
        return np.asarray(beta, dtype=float) / self.col_scales


@dataclass(frozen=True)
class ModelEstimate:
    """Sparse coefficient vector plus fit diagnostics.

    ``support`` is derived from ``beta`` and is never passed in.
    """

    beta: np.ndarray
    objective: float = 0.0
    iterations: int = 0
    converged: bool = True
    support: np.ndarray = field(init=False)

    def __post_init__(self):
        beta = _frozen(self.beta)
        if beta.ndim != 1:
            raise DataError("beta must be one-dimensional")
        if not math.isfinite(self.objective):
            raise DataError("objective must be finite")
        object.__setattr__(self, "beta", beta)
        object.__setattr__(self, "support", _frozen(np.flatnonzero(beta), dtype=np.intp))

    @property
    def size(self) -> int:
        return int(self.support.size)


@dataclass(frozen=True)
class GroundTruth:
    beta_true: np.ndarray
    sigma: float
    true_model: np.ndarray = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "beta_true", _frozen(self.beta_true))
        object.__setattr__(
            self, "true_model", _frozen(np.flatnonzero(self.beta_true), dtype=np.intp)
        )

    @property
    def s(self) -> int:
        return int(self.true_model.size)


def standardize(d: Dataset, ddof: int = 1) -> StandardizedDesign:
    """Center and scale every predictor; center the response.

    Parameters
    ----------
    d : Dataset
    ddof : int
        Delta degrees of freedom of the scale (1 gives the n-1 denominator,
        0 the n denominator).
    """
    X = d.X
    means = X.mean(axis=0)
    Xc = X - means
    scales = np.sqrt(np.sum(Xc * Xc, axis=0) / (d.n - ddof))
    # relative test so that columns like (5, 5, 5) + rounding noise count as constant
    constant = scales <= 1e-12 * np.maximum(np.abs(means), 1.0)
    scales = np.where(constant, 1.0, scales)
    Z = Xc / scales
    Z[:, constant] = 0.0
    y_mean = float(d.y.mean())
    return StandardizedDesign(
        Z=Z,
        col_means=means,
        col_scales=scales,
        y_centered=d.y - y_mean,
        constant=constant,
        y_mean=y_mean,
    )


def ols_fit(Z_sub: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Least-squares coefficients through a column-pivoted QR factorization.

    Raises
    ------
    RankDeficient
        If a pivot falls below ``1e-10`` times the largest pivot.
    """
    Z_sub = np.asarray(Z_sub, dtype=float)
    y = np.asarray(y, dtype=float)
    if Z_sub.ndim != 2 or Z_sub.shape[0] != y.shape[0]:
        raise LengthMismatch("Z_sub rows must match len(y)")
    n, d = Z_sub.shape
    if d == 0:
        return np.zeros(0)
    if d > n:
        raise RankDeficient(f"{d} columns exceed {n} rows")
    Q, R, piv = linalg.qr(Z_sub, mode="economic", pivoting=True)
    diag = np.abs(np.diag(R))
    if diag[0] == 0.0 or diag[-1] <= PIVOT_TOL * diag[0]:
        bad = int(np.argmax(diag <= PIVOT_TOL * max(diag[0], 1e-300)))
        raise RankDeficient(f"column {int(piv[bad])} is collinear with earlier columns")
    coef_piv = linalg.solve_triangular(R, Q.T @ y)
    coef = np.empty(d)
    coef[piv] = coef_piv
    return coef


def l2_error(est, gt: GroundTruth) -> float:
    """Euclidean distance between an estimate (or raw vector) and the true coefficients."""
    beta = est.beta if isinstance(est, ModelEstimate) else np.asarray(est, dtype=float)
    if beta.shape != gt.beta_true.shape:
        raise LengthMismatch(f"estimate length {beta.shape} vs truth {gt.beta_true.shape}")
    return float(np.linalg.norm(beta - gt.beta_true))


def read_dataset_csv(path) -> Dataset:
    """Load a dataset CSV: header row, a column named exactly ``y``, predictors otherwise."""
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: empty file") from None
        if header.count("y") != 1:
            raise DataError(f"{path}: need exactly one column named 'y'")
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise DataError(f"{path}:{lineno}: expected {len(header)} cells, got {len(row)}")
            try:
                rows.append([float(c) for c in row])
            except ValueError as exc:
                raise DataError(f"{path}:{lineno}: {exc}") from None
    if not rows:
        raise DataError(f"{path}: no data rows")
    table = np.array(rows)
    if not np.all(np.isfinite(table)):
        raise DataError(f"{path}: non-finite cell")
    yi = header.index("y")
    xcols = [i for i in range(len(header)) if i != yi]
    return Dataset(
        y=table[:, yi],
        X=table[:, xcols],
        feature_names=tuple(header[i] for i in xcols),
    )


def write_dataset_csv(d: Dataset, path, names: Optional[Sequence[str]] = None) -> None:
    names = names or d.feature_names or tuple(f"x{j + 1}" for j in range(d.p))
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["y", *names])
        for yi, row in zip(d.y, d.X):
            w.writerow([repr(float(yi)), *(repr(float(v)) for v in row)])
