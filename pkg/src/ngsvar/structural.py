"""Structural outputs of a posterior sample: impulse responses, shock
labelling, non-Gaussianity of the shocks and tests of their independence."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy import stats

from .errors import DimensionError, DomainError, NormalizationError, NotApplicableError


# -- impulse responses ----------------------------------------------------------------

def _lag_matrices(beta, n: int, p: int) -> np.ndarray:
    """``p x n x n`` stack of B_1..B_p from the ``N x k`` coefficient rows."""
    beta = np.asarray(beta, dtype=float)[:n]
    return np.stack([beta[:, 1 + j * n: 1 + (j + 1) * n] for j in range(p)]) if p else np.zeros((0, n, n))


def _resolve_variable(variable, names) -> int:
    if isinstance(variable, (int, np.integer)):
        return int(variable)
    if names is None or variable not in names:
        raise NormalizationError(f"unknown normalisation variable {variable!r}")
    return list(names).index(variable)


def compute_irf(beta, L, H: int, p: int, normalization=None, *, sd=None, names=None,
                shock=None, n: int = None) -> np.ndarray:
    """Impulse responses of one draw, shape ``n x r x (H + 1)``.

    Phi_0 = L and Phi_h = sum_{j=1}^{min(h, p)} B_j Phi_{h-j}. Rows are
    multiplied by ``sd`` to undo standardisation. ``normalization`` is a
    ``(variable, value)`` pair: every shock column (or only ``shock``) is
    rescaled so that the impact response of ``variable`` equals ``value``.
    Only the first ``n`` rows of ``L`` (the VAR equations) enter; ``n``
    defaults to the size implied by ``beta`` (or all rows when ``p = 0``).
    """
    if H < 0:
        raise DomainError("horizon must be non-negative")
    L = np.atleast_2d(np.asarray(L, dtype=float))
    if n is None:
        n = (np.shape(beta)[1] - 1) // p if p else L.shape[0]
    L = L[:n]
    r = L.shape[1]
    B = _lag_matrices(beta, n, p)
    phi = np.zeros((H + 1, n, r))
    phi[0] = L
    for h in range(1, H + 1):
        for j in range(1, min(h, p) + 1):
            phi[h] += B[j - 1] @ phi[h - j]
    if sd is not None:
        phi = phi * np.asarray(sd, dtype=float)[None, :n, None]
    if normalization is not None:
        variable, value = normalization
        row = _resolve_variable(variable, names)
        cols = range(r) if shock is None else [shock]
        for j in cols:
            impact = phi[0, row, j]
            if impact == 0:
                raise NormalizationError(f"impact response of variable {row} to shock {j} is zero")
            phi[:, :, j] *= value / impact
            # impact * (value / impact) can miss value by one ulp
            phi[0, row, j] = value
    return np.moveaxis(phi, 0, -1)


@dataclass
class IrfResult:
    horizons: np.ndarray
    responses: np.ndarray  # draws x n x r x (H + 1)
    levels: tuple
    quantiles: np.ndarray  # len(levels) x n x r x (H + 1)
    names: tuple = ()
    normalization: Optional[tuple] = None

    def band(self, level: float) -> np.ndarray:
        return self.quantiles[list(self.levels).index(level)]


def compute_irfs(posterior, H: int, normalization=None, *, shock=None,
                 levels: Sequence[float] = (0.16, 0.5, 0.84), destandardize: bool = True) -> IrfResult:
    """Impulse responses for every retained draw plus pointwise quantiles."""
    design = posterior.design
    p = design.p if design is not None else 0
    n = design.n_var if design is not None else posterior.n_eq
    names = design.names[:n] if design is not None else None
    sd = None
    if destandardize and design is not None and design.scale is not None:
        sd = design.scale.sd[:n]
    resp = np.stack([compute_irf(posterior.beta[s], posterior.L[s], H, p, normalization, sd=sd,
                                 names=names, shock=shock, n=n) for s in range(len(posterior))])
    levels = tuple(float(q) for q in sorted(levels))
    return IrfResult(np.arange(H + 1), resp, levels, np.quantile(resp, levels, axis=0),
                     tuple(names or ()), normalization)


# -- shock labelling ------------------------------------------------------------------

@dataclass
class LabelReport:
    correlation: np.ndarray  # draws x r
    loading: np.ndarray  # draws x r
    narrative: np.ndarray  # draws x dates x r
    dates: list
    selected: int
    median_abs_corr: np.ndarray
    weak: bool
    sign_agreement: np.ndarray = field(default_factory=lambda: np.zeros((0, 0)))

    def summary(self) -> dict:
        q = lambda a: np.quantile(a, [0.16, 0.5, 0.84], axis=0).tolist()  # noqa: E731
        return {
            "selected_factor": self.selected,
            "weak": self.weak,
            "median_abs_corr": self.median_abs_corr.tolist(),
            "correlation_quantiles": q(self.correlation),
            "loading_quantiles": q(self.loading),
            "narrative": [{"t": int(t), "expected_sign": int(s), "quantiles": q(self.narrative[:, d])}
                          for d, (t, s) in enumerate(self.dates)],
            "narrative_sign_agreement": self.sign_agreement.tolist(),
        }


def label_shocks(posterior, proxy, target: int = 0, narrative_dates=(), weak_threshold: float = 0.1,
                 f_draws=None) -> LabelReport:
    """Posterior diagnostics for attaching a name to a shock.

    Per draw: the correlation of each factor with ``proxy``, the loading of
    equation ``target`` on each factor, and loading times shock at each
    ``(t, expected_sign)`` narrative date. The selected factor maximises the
    median absolute proxy correlation; it is flagged ``weak`` when that
    median is below ``weak_threshold``. Nothing is imposed on the draws.
    """
    F = posterior.f if f_draws is None else np.asarray(f_draws, dtype=float)
    if F is None:
        raise DomainError("labelling needs stored factor draws")
    proxy = np.asarray(proxy, dtype=float).ravel()
    S, T, r = F.shape
    if proxy.size != T:
        raise DimensionError(f"proxy has {proxy.size} values, factors have {T} periods")
    pc = proxy - proxy.mean()
    if not np.any(pc != 0):
        raise DomainError("proxy is constant; correlation undefined")
    Fc = F - F.mean(axis=1, keepdims=True)
    denom = np.sqrt((Fc**2).sum(axis=1) * (pc**2).sum())
    corr = np.einsum("str,t->sr", Fc, pc) / np.where(denom > 0, denom, np.inf)
    corr = np.clip(corr, -1.0, 1.0)
    loading = posterior.L[:, target, :]
    dates = [(int(t), int(np.sign(s))) for t, s in narrative_dates]
    narrative = np.stack([loading * F[:, t, :] for t, _ in dates], axis=1) if dates else np.zeros((S, 0, r))
    agree = (np.array([[np.mean(np.sign(narrative[:, d, j]) == s) for j in range(r)]
                       for d, (_, s) in enumerate(dates)]) if dates else np.zeros((0, r)))
    med = np.median(np.abs(corr), axis=0)
    sel = int(np.argmax(med))
    return LabelReport(corr, loading, narrative, dates, sel, med, bool(med[sel] < weak_threshold), agree)


# -- non-Gaussianity ------------------------------------------------------------------

def nongaussianity_posteriors(posterior_or_draws, levels=(0.16, 0.5, 0.84)) -> dict:
    """Per-draw sample skewness and (non-excess) kurtosis of each factor.

    Accepts a posterior sample with stored factors or a ``draws x T x r``
    array; returns the per-draw values and their quantiles.
    """
    F = getattr(posterior_or_draws, "f", posterior_or_draws)
    if F is None:
        raise DomainError("needs stored factor draws")
    F = np.asarray(F, dtype=float)
    if F.ndim == 2:
        F = F[None]
    skew = stats.skew(F, axis=1)
    kurt = stats.kurtosis(F, axis=1, fisher=False)
    return {
        "skewness": skew,
        "kurtosis": kurt,
        "levels": tuple(levels),
        "skewness_quantiles": np.quantile(skew, levels, axis=0),
        "kurtosis_quantiles": np.quantile(kurt, levels, axis=0),
    }


# -- independence diagnostics ---------------------------------------------------------

def squared_correlation_stat(E) -> float:
    """Root mean squared cross-correlation of the squared shocks, in [0, 1]."""
    E = np.asarray(E, dtype=float)
    K = E.shape[1]
    if K < 2:
        raise NotApplicableError("needs at least two shocks")
    C = np.corrcoef(E**2, rowvar=False)
    off = C[~np.eye(K, dtype=bool)]
    return float(np.sqrt(np.mean(off**2)))


def _centred_distances(Z) -> np.ndarray:
    Z = np.asarray(Z, dtype=float)
    if Z.ndim == 1:
        Z = Z[:, None]
    D = np.sqrt(((Z[:, None, :] - Z[None, :, :]) ** 2).sum(axis=-1))
    return D - D.mean(axis=0) - D.mean(axis=1)[:, None] + D.mean()


def distance_covariance(X, Y) -> float:
    """Squared empirical distance covariance (V-statistic, unit exponent)."""
    A = _centred_distances(X)
    B = _centred_distances(Y)
    return float((A * B).mean())


def rank_transform(E) -> np.ndarray:
    """Column-wise ranks divided by T."""
    E = np.asarray(E, dtype=float)
    return stats.rankdata(E, axis=0) / E.shape[0]


def distance_covariance_stat(E) -> float:
    """T * sum_k I_T(U_k, U_{k+}) over the rank-transformed columns, where
    U_{k+} collects all columns after k."""
    U = rank_transform(E)
    T, K = U.shape
    if K < 2:
        raise NotApplicableError("needs at least two shocks")
    total = 0.0
    for k in range(K - 1):
        total += distance_covariance(U[:, k], U[:, k + 1:])
    return T * total


@dataclass
class IndependenceResult:
    S: np.ndarray
    S0: np.ndarray
    U: Optional[np.ndarray] = None
    U0: Optional[np.ndarray] = None


def independence_stats(posterior_or_draws, rng=None, *, distance: bool = True) -> IndependenceResult:
    """Posteriors of S(E) and U(E) and of their null versions S0, U0.

    The null versions are computed on the same draw after shuffling the
    rows of every column independently (one permutation per draw), which
    destroys any dependence across shocks while keeping each margin.
    """
    F = getattr(posterior_or_draws, "f", posterior_or_draws)
    if F is None:
        raise DomainError("needs stored factor draws")
    F = np.asarray(F, dtype=float)
    if F.ndim == 2:
        F = F[None]
    if F.shape[2] < 2:
        raise NotApplicableError("independence statistics need r >= 2")
    rng = np.random.default_rng() if rng is None else rng
    S = np.empty(F.shape[0])
    S0 = np.empty_like(S)
    U = np.empty_like(S) if distance else None
    U0 = np.empty_like(S) if distance else None
    for s, E in enumerate(F):
        E0 = np.column_stack([rng.permutation(col) for col in E.T])
        S[s] = squared_correlation_stat(E)
        S0[s] = squared_correlation_stat(E0)
        if distance:
            U[s] = distance_covariance_stat(E)
            U0[s] = distance_covariance_stat(E0)
    return IndependenceResult(S, S0, U, U0)


__all__ = [
    "compute_irf", "compute_irfs", "IrfResult", "label_shocks", "LabelReport",
    "nongaussianity_posteriors", "independence_stats", "IndependenceResult",
    "squared_correlation_stat", "distance_covariance", "distance_covariance_stat", "rank_transform",
]
