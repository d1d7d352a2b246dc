"""Over-identifying restrictions on the loadings: exact zeros, signs, and an
external proxy equation ``m_t = c + L~ f_t + e_t``.

Equation and factor indices are 0-based throughout the Python API; the
config file uses variable names and 1-based factor numbers.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy import linalg

from .errors import DimensionError, RestrictionError
from .kernels import sample_truncated_normal
from .model import Design


@dataclass(frozen=True)
class ProxySpec:
    series: np.ndarray
    target: int = 0
    exogeneity: bool = True
    name: str = "proxy"
    standardize: bool = True


@dataclass(frozen=True)
class RestrictionSet:
    zeros: frozenset = frozenset()
    signs: dict = field(default_factory=dict)
    proxy: Optional[ProxySpec] = None

    def __post_init__(self):
        object.__setattr__(self, "zeros", frozenset((int(i), int(j)) for i, j in self.zeros))
        signs = {}
        for (i, j), s in dict(self.signs).items():
            s = {"+": 1, "-": -1}.get(s, s)
            if s not in (1, -1):
                raise RestrictionError(f"sign for ({i}, {j}) must be +1 or -1, got {s!r}")
            signs[(int(i), int(j))] = int(s)
        object.__setattr__(self, "signs", signs)
        clash = self.zeros & set(signs)
        if clash:
            raise RestrictionError(f"cells {sorted(clash)} carry both a zero and a sign restriction")

    @property
    def empty(self) -> bool:
        return not self.zeros and not self.signs and self.proxy is None

    def validate(self, n_eq: int, r: int) -> None:
        for i, j in list(self.zeros) + list(self.signs):
            if not (0 <= i < n_eq and 0 <= j < r):
                raise RestrictionError(f"restriction on ({i}, {j}) outside the {n_eq}x{r} loadings")
        if self.proxy is not None and not 0 <= self.proxy.target < r:
            raise RestrictionError(f"proxy target factor {self.proxy.target} outside 0..{r - 1}")

    def free_mask(self, n_eq: int, r: int) -> np.ndarray:
        mask = np.ones((n_eq, r), dtype=bool)
        for i, j in self.zeros:
            mask[i, j] = False
        return mask

    def sign_matrix(self, n_eq: int, r: int) -> np.ndarray:
        out = np.zeros((n_eq, r), dtype=int)
        for (i, j), s in self.signs.items():
            out[i, j] = s
        return out

    def with_zeros(self, extra) -> "RestrictionSet":
        return RestrictionSet(self.zeros | frozenset(extra), self.signs, self.proxy)

    @classmethod
    def from_config(cls, entries, names, proxy: Optional[ProxySpec] = None) -> "RestrictionSet":
        """Build from ``[{"variable": name, "factor": 1-based, "kind": "zero"|"+"|"-"}]``."""
        zeros, signs = set(), {}
        names = list(names)
        for entry in entries or []:
            var = entry["variable"]
            if var not in names:
                raise RestrictionError(f"restricted variable {var!r} is not in the data")
            cell = (names.index(var), int(entry["factor"]) - 1)
            kind = str(entry["kind"]).lower()
            if kind in ("zero", "0"):
                zeros.add(cell)
            elif kind in ("+", "positive", "pos"):
                signs[cell] = 1
            elif kind in ("-", "negative", "neg"):
                signs[cell] = -1
            else:
                raise RestrictionError(f"unknown restriction kind {entry['kind']!r}")
        return cls(frozenset(zeros), signs, proxy)


def apply_zero_restrictions(i: int, Z, prior_mean, prior_var, restrictions: RestrictionSet, k: int):
    """Drop the factor columns of ``Z = (X_i, F)`` whose loadings in equation
    ``i`` are fixed at zero, with the matching prior entries.

    Returns ``(Z, prior_mean, prior_var, keep)`` where ``keep`` indexes the
    retained columns of the full design; use :func:`embed` to put a draw back.
    """
    Z = np.asarray(Z)
    d = Z.shape[1]
    r = d - k
    dropped = {k + j for (row, j) in restrictions.zeros if row == i}
    keep = np.array([c for c in range(d) if c not in dropped], dtype=int)
    if r > 0 and len(dropped) == r:
        warnings.warn(f"all loadings of equation {i} are zero; it reduces to a pure VAR equation", stacklevel=2)
    return Z[:, keep], np.asarray(prior_mean)[keep], np.asarray(prior_var)[keep], keep


def embed(theta, keep, d: int) -> np.ndarray:
    out = np.zeros(d)
    out[keep] = theta
    return out


def apply_sign_restrictions(
    mean, precision, signs, current, rng: np.random.Generator, sweeps: int = 10
) -> np.ndarray:
    """Draw from N(mean, precision^{-1}) truncated to the sign orthant.

    ``signs`` holds 0 (free), +1 or -1 per coordinate. Restricted coordinates
    are updated one at a time from their truncated univariate conditionals and
    the free block jointly given them, for ``sweeps`` passes starting at
    ``current``. This is a Gibbs kernel leaving the truncated law invariant.
    """
    mean = np.asarray(mean, dtype=float)
    K = np.asarray(precision, dtype=float)
    signs = np.asarray(signs, dtype=int)
    theta = np.array(current, dtype=float)
    restricted = np.flatnonzero(signs != 0)
    free = np.flatnonzero(signs == 0)
    if restricted.size == 0:
        raise RestrictionError("no sign restrictions supplied")
    bad = np.sign(theta[restricted]) != signs[restricted]
    if bad.any():
        # start inside the feasible orthant
        theta[restricted[bad]] = signs[restricted[bad]] * np.maximum(np.abs(mean[restricted[bad]]), 1e-3)
    if free.size:
        chol_ff = linalg.cholesky(K[np.ix_(free, free)], lower=True)
    diag = np.diag(K)
    for _ in range(sweeps):
        for j in restricted:
            dev = theta - mean
            cmean = mean[j] - (K[j] @ dev - K[j, j] * dev[j]) / diag[j]
            csd = 1.0 / np.sqrt(diag[j])
            lo, hi = (0.0, np.inf) if signs[j] > 0 else (-np.inf, 0.0)
            theta[j] = sample_truncated_normal(cmean, csd, lo, hi, rng)
        if free.size:
            rhs = -K[np.ix_(free, restricted)] @ (theta[restricted] - mean[restricted])
            shift = linalg.cho_solve((chol_ff, True), rhs)
            z = rng.standard_normal(free.size)
            theta[free] = mean[free] + shift + linalg.solve_triangular(chol_ff.T, z, lower=False)
    return theta


def augment_with_proxy(
    design: Design, proxy: ProxySpec, restrictions: RestrictionSet = RestrictionSet(), r: int = 1
) -> tuple[Design, RestrictionSet]:
    """Append the proxy as an extra observation equation.

    The proxy equation has an intercept and loadings but no lagged
    regressors. With ``exogeneity`` on, every loading except the target
    factor's is fixed at zero.
    """
    series = np.asarray(proxy.series, dtype=float).ravel()
    if series.size != design.T:
        raise DimensionError(
            f"proxy has {series.size} observations, the estimation sample has {design.T}"
        )
    if proxy.standardize:
        sd = series.std(ddof=1)
        if not sd > 0:
            raise DimensionError("proxy series is constant")
        series = (series - series.mean()) / sd
    Y = np.column_stack([design.Y, series])
    mask_row = np.zeros((1, design.k), dtype=bool)
    mask_row[0, 0] = True
    x_mask = np.vstack([design.x_mask, mask_row])
    aug = Design(Y, design.X, design.p, design.names + (proxy.name,), design.n_var,
                 x_mask=x_mask, scale=design.scale)
    row = design.n_eq
    extra = [(row, j) for j in range(r) if j != proxy.target] if proxy.exogeneity else []
    new = RestrictionSet(restrictions.zeros | frozenset(extra), restrictions.signs, proxy)
    new.validate(aug.n_eq, r)
    return aug, new
