"""Minnesota-type adaptive hierarchical prior on the VAR coefficients and the
conjugate priors on loadings and idiosyncratic variances.

Half-Cauchy scales use the inverse-gamma auxiliary representation
``x | z ~ IG(1/2, 1/z)``, ``z ~ IG(1/2, 1)``, so that ``sqrt(x) ~ C+(0, 1)``.
"""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .errors import DomainError
from .kernels import InverseGammaParams, sample_inverse_gamma


@dataclass(frozen=True)
class PriorConfig:
    """Hyperparameters with their defaults.

    ``lag_decay="lag"`` sets C = 1/l^2 for a coefficient at lag l;
    ``"literal"`` uses the constant 1/p^2 for every lag.
    """

    own_lag_mean: float = 1.0
    lag_decay: str = "lag"
    intercept_variance: float = 10.0
    loadings_mean: float = 0.0
    loadings_variance: float = 10.0
    alpha0: float = 0.0
    beta0: float = 0.0

    def __post_init__(self):
        if self.lag_decay not in ("lag", "literal"):
            raise DomainError("lag_decay must be 'lag' or 'literal'")
        if self.alpha0 < 0 or self.beta0 < 0:
            raise DomainError("alpha0 and beta0 must be non-negative")
        if not (self.intercept_variance > 0 and self.loadings_variance > 0):
            raise DomainError("prior variances must be positive")


@dataclass(frozen=True)
class LoadingsPrior:
    mean: np.ndarray
    variance: np.ndarray  # diagonal of V_l

    @classmethod
    def default(cls, r: int, config: PriorConfig = PriorConfig()) -> "LoadingsPrior":
        return cls(np.full(r, config.loadings_mean), np.full(r, config.loadings_variance))


@dataclass(frozen=True)
class NoiseVariancePrior:
    alpha0: float = 0.0
    beta0: float = 0.0


@dataclass
class MinnesotaHierarchy:
    """State of the hierarchical prior for an ``n``-equation VAR with ``p`` lags.

    Arrays indexed ``[i, j]`` cover the ``k - 1`` lag coefficients of
    equation ``i`` (the intercept is column 0 of ``m`` and ``C`` only).
    """

    lam1: float
    lam2: float
    psi: np.ndarray
    z_lam1: float
    z_lam2: float
    z_psi: np.ndarray
    m: np.ndarray
    C: np.ndarray
    own: np.ndarray

    @property
    def n(self) -> int:
        return self.m.shape[0]

    @property
    def lam(self) -> np.ndarray:
        """lambda_{i,j} for every lag coefficient."""
        return np.where(self.own, self.lam1, self.lam2)

    def copy(self) -> "MinnesotaHierarchy":
        return replace(self, psi=self.psi.copy(), z_psi=self.z_psi.copy())


def lag_structure(n: int, p: int) -> tuple[np.ndarray, np.ndarray]:
    """Lag number and own-lag indicator for each of the n*p lag columns of
    every equation, shaped ``(n, n*p)``."""
    lags = np.repeat(np.arange(1, p + 1), n)
    var = np.tile(np.arange(n), p)
    lag = np.broadcast_to(lags, (n, n * p)).copy()
    own = var[None, :] == np.arange(n)[:, None]
    return lag, own


def init_hierarchy(n: int, p: int, config: PriorConfig = PriorConfig()) -> MinnesotaHierarchy:
    lag, own = lag_structure(n, p)
    m = np.zeros((n, 1 + n * p))
    if p > 0:
        m[:, 1:][own & (lag == 1)] = config.own_lag_mean
    C = np.empty((n, 1 + n * p))
    C[:, 0] = config.intercept_variance
    if p > 0:
        C[:, 1:] = 1.0 / lag**2 if config.lag_decay == "lag" else 1.0 / p**2
    return MinnesotaHierarchy(
        lam1=1.0, lam2=1.0,
        psi=np.ones((n, n * p)),
        z_lam1=1.0, z_lam2=1.0,
        z_psi=np.ones((n, n * p)),
        m=m, C=C, own=own,
    )


def psi_conditional(beta, h: MinnesotaHierarchy) -> tuple[float, np.ndarray]:
    """Shape and scale array of the inverse-gamma full conditional of psi."""
    dev2 = (np.asarray(beta)[:, 1:] - h.m[:, 1:]) ** 2
    return 1.0, 1.0 / h.z_psi + dev2 / (2.0 * h.lam * h.C[:, 1:])


def update_psi(beta, h: MinnesotaHierarchy, rng: np.random.Generator) -> np.ndarray:
    shape, scale = psi_conditional(beta, h)
    if scale.size == 0:
        return h.psi.copy()
    return sample_inverse_gamma(shape, scale, rng)


def lambda_conditionals(beta, h: MinnesotaHierarchy) -> tuple[InverseGammaParams, InverseGammaParams]:
    """Full conditionals of (lambda_1, lambda_2); the shape counts the terms
    in the own-lag and other-lag index sets."""
    dev2 = (np.asarray(beta)[:, 1:] - h.m[:, 1:]) ** 2 / (2.0 * h.psi * h.C[:, 1:])
    n_own = int(h.own.sum())
    n_other = h.own.size - n_own
    p1 = InverseGammaParams((n_own + 1) / 2.0, 1.0 / h.z_lam1 + dev2[h.own].sum())
    p2 = InverseGammaParams((n_other + 1) / 2.0, 1.0 / h.z_lam2 + dev2[~h.own].sum())
    return p1, p2


def update_lambdas(beta, h: MinnesotaHierarchy, rng: np.random.Generator) -> tuple[float, float]:
    p1, p2 = lambda_conditionals(beta, h)
    return p1.sample(rng), p2.sample(rng)


def update_z_lambda(h: MinnesotaHierarchy, rng: np.random.Generator) -> tuple[float, float]:
    z = sample_inverse_gamma(1.0, 1.0 + 1.0 / np.array([h.lam1, h.lam2]), rng)
    return float(z[0]), float(z[1])


def update_z_psi(h: MinnesotaHierarchy, rng: np.random.Generator) -> np.ndarray:
    if h.psi.size == 0:
        return h.z_psi.copy()
    return sample_inverse_gamma(1.0, 1.0 + 1.0 / h.psi, rng)


def update_z_latents(h: MinnesotaHierarchy, rng: np.random.Generator):
    """Refresh (z_psi, (z_lam1, z_lam2)) from their inverse-gamma conditionals."""
    z_lam = update_z_lambda(h, rng)
    return update_z_psi(h, rng), z_lam


def prior_covariance_for_equation(
    i: int, h: MinnesotaHierarchy, loadings: LoadingsPrior | None = None
) -> np.ndarray:
    """Diagonal of V_theta_i = diag(V_beta_i, V_l_i) as a vector of length k + r.

    The intercept entry is C_{i,1}; lag entries are lambda_{i,j} psi_{i,j} C_{i,j}.
    """
    v_beta = np.concatenate([[h.C[i, 0]], h.lam[i] * h.psi[i] * h.C[i, 1:]])
    if loadings is None or len(loadings.variance) == 0:
        return v_beta
    return np.concatenate([v_beta, loadings.variance])


def prior_mean_for_equation(i: int, h: MinnesotaHierarchy, loadings: LoadingsPrior | None = None) -> np.ndarray:
    if loadings is None:
        return h.m[i].copy()
    return np.concatenate([h.m[i], loadings.mean])
