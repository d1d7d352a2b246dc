"""Data containers, design matrices and companion-form algebra for the VAR

    y_t = b0 + B_1 y_{t-1} + ... + B_p y_{t-p} + L f_t + v_t.
"""
from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .errors import DegenerateColumnError, DimensionError, DomainError, RankError


@dataclass(frozen=True)
class Dataset:
    """Raw observations: ``values`` is ``T_raw x n`` with one name per column."""

    values: np.ndarray
    names: tuple
    transforms: tuple = ()

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.ndim == 1:
            values = values[:, None]
        if values.ndim != 2:
            raise DimensionError("dataset values must be a 2-D array")
        names = tuple(self.names)
        if len(names) != values.shape[1]:
            raise DimensionError(
                f"{len(names)} names for {values.shape[1]} columns"
            )
        if not np.all(np.isfinite(values)):
            raise DomainError("dataset contains missing or non-finite values")
        transforms = tuple(self.transforms) or ("none",) * len(names)
        if len(transforms) != len(names):
            raise DimensionError("one transform tag per column required")
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "names", names)
        object.__setattr__(self, "transforms", transforms)

    @property
    def n(self) -> int:
        return self.values.shape[1]

    @property
    def T_raw(self) -> int:
        return self.values.shape[0]

    def column(self, name: str) -> np.ndarray:
        return self.values[:, self.names.index(name)]

    def select(self, names: Sequence[str]) -> "Dataset":
        idx = [self.names.index(nm) for nm in names]
        return Dataset(self.values[:, idx], tuple(names), tuple(self.transforms[i] for i in idx))


def read_csv(path, proxy_column: Optional[str] = None):
    """Load a CSV whose first row holds variable names.

    Returns ``(dataset, proxy)``; ``proxy`` is the flagged column (removed
    from the dataset) or ``None``.
    """
    path = Path(path)
    with path.open(newline="") as fh:
        rows = [row for row in csv.reader(fh) if row and not row[0].startswith("#")]
    if len(rows) < 2:
        raise DimensionError(f"{path} has no data rows")
    header = [h.strip() for h in rows[0]]
    try:
        values = np.array([[float(x) for x in row] for row in rows[1:]])
    except ValueError as exc:
        raise DomainError(f"{path}: non-numeric entry ({exc})") from None
    if values.shape[1] != len(header):
        raise DimensionError(f"{path}: header has {len(header)} names, rows have {values.shape[1]}")
    proxy = None
    if proxy_column is not None:
        if proxy_column not in header:
            raise DimensionError(f"proxy column {proxy_column!r} not in {path}")
        j = header.index(proxy_column)
        proxy = values[:, j].copy()
        values = np.delete(values, j, axis=1)
        header.pop(j)
    return Dataset(values, tuple(header)), proxy


@dataclass(frozen=True)
class ScaleInfo:
    mean: np.ndarray
    sd: np.ndarray

    def destandardize(self, values: np.ndarray) -> np.ndarray:
        return np.asarray(values) * self.sd + self.mean


def standardize(data: Dataset, trim: int = 0) -> tuple[Dataset, ScaleInfo]:
    """Scale every column to mean 0 and sd 1.

    Statistics use rows ``trim:`` (the estimation sample once ``trim`` lags are
    removed) and are then applied to all rows.
    """
    sample = data.values[trim:]
    mean = sample.mean(axis=0)
    sd = sample.std(axis=0, ddof=1) if sample.shape[0] > 1 else np.zeros(data.n)
    for j, s in enumerate(sd):
        if not s > 0:
            raise DegenerateColumnError(
                f"column {data.names[j]!r} is constant on the estimation sample", column=data.names[j]
            )
    scaled = (data.values - mean) / sd
    return Dataset(scaled, data.names, data.transforms), ScaleInfo(mean, sd)


def build_design(data: Dataset | np.ndarray, p: int) -> tuple[np.ndarray, np.ndarray]:
    """Return ``(Y, X)`` with row t of X equal to (1, y_{t-1}', ..., y_{t-p}')."""
    values = data.values if isinstance(data, Dataset) else np.asarray(data, dtype=float)
    if values.ndim == 1:
        values = values[:, None]
    if p < 0:
        raise DimensionError("lag order must be non-negative")
    T_raw, n = values.shape
    if T_raw <= p:
        raise DimensionError(f"need more than p={p} rows, got {T_raw}")
    T = T_raw - p
    Y = values[p:]
    X = np.empty((T, 1 + n * p))
    X[:, 0] = 1.0
    for lag in range(1, p + 1):
        X[:, 1 + (lag - 1) * n: 1 + lag * n] = values[p - lag: T_raw - lag]
    return Y.copy(), X


@dataclass(frozen=True)
class VarCoefficients:
    """Intercepts and lag matrices; ``matrix`` is ``n x k`` with rows beta_i'."""

    matrix: np.ndarray

    @classmethod
    def from_blocks(cls, b0, B):
        b0 = np.asarray(b0, dtype=float)
        return cls(np.column_stack([b0] + [np.asarray(Bj, dtype=float) for Bj in B]))

    @classmethod
    def from_vec(cls, beta, n):
        """Inverse of :attr:`vec`: beta = vec([b0, B_1, ..., B_p]')."""
        beta = np.asarray(beta, dtype=float)
        return cls(beta.reshape(n, -1))

    @property
    def n(self) -> int:
        return self.matrix.shape[0]

    @property
    def p(self) -> int:
        return (self.matrix.shape[1] - 1) // self.n

    @property
    def b0(self) -> np.ndarray:
        return self.matrix[:, 0]

    @property
    def B(self) -> list:
        n = self.n
        return [self.matrix[:, 1 + j * n: 1 + (j + 1) * n] for j in range(self.p)]

    @property
    def vec(self) -> np.ndarray:
        return self.matrix.reshape(-1)

    def companion(self) -> np.ndarray:
        n, p = self.n, self.p
        if p == 0:
            return np.zeros((0, 0))
        comp = np.zeros((n * p, n * p))
        comp[:n] = self.matrix[:, 1:]
        comp[n:, :-n] = np.eye(n * (p - 1))
        return comp

    def eigenvalue_moduli(self) -> np.ndarray:
        comp = self.companion()
        if comp.size == 0:
            return np.zeros(0)
        return np.sort(np.abs(np.linalg.eigvals(comp)))[::-1]

    def is_stable(self) -> bool:
        mod = self.eigenvalue_moduli()
        return bool(mod.size == 0 or mod[0] < 1.0)


def project_shocks(L, Y, X, beta) -> np.ndarray:
    """Shocks from the reduced-rank representation, A (y_t - beta x_t) with
    A = (L'L)^{-1} L'. ``beta`` is the ``n x k`` coefficient matrix."""
    L = np.asarray(L, dtype=float)
    if L.ndim == 1:
        L = L[:, None]
    if np.linalg.matrix_rank(L) < L.shape[1]:
        raise RankError("loadings matrix does not have full column rank")
    U = np.asarray(Y, dtype=float) - np.asarray(X, dtype=float) @ np.asarray(beta, dtype=float).T
    return np.linalg.solve(L.T @ L, L.T @ U.T).T


@dataclass
class Design:
    """Estimation-ready data for one model.

    ``Y`` holds one column per observation equation: the ``n_var`` VAR
    variables first, then any auxiliary equations (a proxy). ``x_mask[i]``
    marks which columns of ``X`` enter equation ``i``.
    """

    Y: np.ndarray
    X: np.ndarray
    p: int
    names: tuple
    n_var: int
    x_mask: np.ndarray = None
    scale: Optional[ScaleInfo] = None

    def __post_init__(self):
        self.Y = np.asarray(self.Y, dtype=float)
        self.X = np.asarray(self.X, dtype=float)
        if self.Y.ndim == 1:
            self.Y = self.Y[:, None]
        if self.Y.shape[0] != self.X.shape[0]:
            raise DimensionError("Y and X must have the same number of rows")
        if self.x_mask is None:
            self.x_mask = np.ones((self.Y.shape[1], self.X.shape[1]), dtype=bool)
        self.names = tuple(self.names)
        if len(self.names) != self.Y.shape[1]:
            raise DimensionError("one name per equation required")

    @classmethod
    def from_dataset(cls, data: Dataset, p: int, scale: Optional[ScaleInfo] = None) -> "Design":
        Y, X = build_design(data, p)
        return cls(Y, X, p, data.names, data.n, scale=scale)

    @property
    def T(self) -> int:
        return self.Y.shape[0]

    @property
    def n_eq(self) -> int:
        return self.Y.shape[1]

    @property
    def k(self) -> int:
        return self.X.shape[1]

    def with_columns(self, Y) -> "Design":
        return replace(self, Y=np.asarray(Y, dtype=float))


@dataclass
class SamplerSettings:
    burn_in: int = 5000
    draws: int = 5000
    thin: int = 1
    seed: int = 0
    grid_size: int = 200
    df_bounds: tuple = (2.0, 30.0)
    sign_sweeps: int = 10
    order: tuple = (
        "factors", "coefficients", "mixing", "dof", "noise",
        "lambda", "psi", "z_lambda", "z_psi",
    )
    store_latent: bool = True
    store_hyper: bool = True
    # extra exact rescaling move per factor after the nine blocks
    rescale_factors: bool = False
    # draw v | f with the mixing weights integrated out, then W | f, v
    collapsed_dof: bool = False

    def __post_init__(self):
        if self.burn_in < 0 or self.draws < 1 or self.thin < 1:
            raise DomainError("need burn_in >= 0, draws >= 1, thin >= 1")
        lo, hi = self.df_bounds
        if not 0 < lo < hi:
            raise DomainError("degrees-of-freedom bounds must satisfy 0 < lo < hi")


@dataclass
class ModelSpec:
    """Dimensions, priors and sampler settings for one estimation.

    ``unit_variance_factors`` switches the mixing law from IG(v/2, v/2)
    (unit scale, variance v/(v-2)) to IG(v/2, (v-2)/2) (unit variance).
    """

    n: int
    p: int
    r: int
    T: int
    prior: "object" = None
    sampler: SamplerSettings = field(default_factory=SamplerSettings)
    unit_variance_factors: bool = False
    allow_large_r: bool = False

    def __post_init__(self):
        from .priors import PriorConfig

        if self.prior is None:
            self.prior = PriorConfig()
        if self.n < 1 or self.p < 0 or self.r < 0 or self.T < 1:
            raise DomainError("need n >= 1, p >= 0, r >= 0, T >= 1")
        if self.T <= self.n * self.p + 1:
            raise DimensionError(f"T={self.T} must exceed n*p + 1 = {self.n * self.p + 1}")
        if self.r > (self.n - 1) / 2:
            if not self.allow_large_r:
                raise DomainError(
                    f"r={self.r} exceeds (n-1)/2={(self.n - 1) / 2}; set allow_large_r to "
                    "rely on the non-Gaussian relaxation of the factor-analytic bound"
                )
            warnings.warn(
                f"r={self.r} > (n-1)/2: separation of common and idiosyncratic parts relies "
                "on non-Gaussian, independent factors",
                stacklevel=2,
            )

    @property
    def k(self) -> int:
        return 1 + self.n * self.p
