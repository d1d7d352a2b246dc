"""Deviance information criterion with the integrated likelihood.

Given (beta, L, Sigma, W) the factors integrate out analytically, leaving
y_t ~ N(x_t beta, L W_t L' + Sigma). The mixing weights W are then
integrated by importance sampling with a product inverse-gamma density whose
parameters are fitted by maximum likelihood to posterior draws of W (the
cross-entropy step).
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy import special

from .errors import DecompositionError, DimensionError, DomainError, EstimatorError, FitError
from .kernels import InverseGammaParams

LOG_2PI = np.log(2.0 * np.pi)


# -- conditional likelihood ---------------------------------------------------------

def _residuals(Y, X, beta) -> np.ndarray:
    return np.asarray(Y, dtype=float) - np.asarray(X, dtype=float) @ np.asarray(beta, dtype=float).T


def _gaussian_mixture_logpdf(E, L, sigma2, W) -> np.ndarray:
    """log N(e_t; 0, L diag(w) L' + diag(sigma2)) for residuals ``E`` (T x n)
    and weights ``W`` of shape (..., T, r); returns shape (..., T).

    Uses the Woodbury identity, so the cost per (t, draw) is O(n r + r^3).
    """
    E = np.asarray(E, dtype=float)
    L = np.asarray(L, dtype=float)
    sigma2 = np.asarray(sigma2, dtype=float)
    W = np.asarray(W, dtype=float)
    T, n = E.shape
    r = L.shape[1]
    if np.any(~(sigma2 > 0)):
        raise DecompositionError("noise variances must be positive", index=int(np.argmin(sigma2)))
    base_quad = (E**2 / sigma2).sum(axis=1)
    base_logdet = np.log(sigma2).sum()
    if r == 0:
        return np.broadcast_to(-0.5 * (n * LOG_2PI + base_logdet + base_quad), W.shape[:-1]).copy()
    if np.any(~(W > 0)):
        raise DecompositionError("mixing weights must be positive")
    Ls = L / sigma2[:, None]
    G = L.T @ Ls  # L' Sigma^-1 L
    b = E @ Ls  # (T, r): L' Sigma^-1 e_t
    if r == 1:
        a = 1.0 / W[..., 0] + G[0, 0]
        quad = base_quad - b[:, 0] ** 2 / a
        logdet = base_logdet + np.log(W[..., 0]) + np.log(a)
    else:
        A = np.broadcast_to(G, W.shape + (r,)).copy()
        idx = np.arange(r)
        A[..., idx, idx] += 1.0 / W
        try:
            C = np.linalg.cholesky(A)
        except np.linalg.LinAlgError:
            raise DecompositionError("Woodbury inner matrix is not positive definite") from None
        z = np.linalg.solve(C, np.broadcast_to(b, W.shape)[..., None])[..., 0]
        quad = base_quad - (z**2).sum(axis=-1)
        logdet = (base_logdet + np.log(W).sum(axis=-1)
                  + 2.0 * np.log(np.diagonal(C, axis1=-2, axis2=-1)).sum(axis=-1))
    return -0.5 * (n * LOG_2PI + logdet + quad)


def conditional_likelihood_given_W(Y, X, beta, L, sigma2, W, per_period: bool = False):
    """log p(y | beta, L, Sigma, W) with the factors integrated out.

    ``W`` is ``T x r``. Returns the total, or the ``T`` terms with
    ``per_period=True``.
    """
    E = _residuals(Y, X, beta)
    W = np.asarray(W, dtype=float)
    if W.shape != (E.shape[0], np.shape(L)[1]):
        raise DimensionError(f"W has shape {W.shape}, expected {(E.shape[0], np.shape(L)[1])}")
    out = _gaussian_mixture_logpdf(E, L, sigma2, W)
    return out if per_period else float(out.sum())


# -- importance family ----------------------------------------------------------------

@dataclass
class ImportanceFamily:
    """Independent IG(alpha[t, j], beta[t, j]) laws for the mixing weights."""

    alpha: np.ndarray
    beta: np.ndarray

    def __post_init__(self):
        self.alpha = np.asarray(self.alpha, dtype=float)
        self.beta = np.asarray(self.beta, dtype=float)
        if self.alpha.shape != self.beta.shape or self.alpha.ndim != 2:
            raise DimensionError("alpha and beta must both be T x r")
        if np.any(~(self.alpha > 0)) or np.any(~(self.beta > 0)):
            raise DomainError("importance parameters must be positive")

    @property
    def shape(self) -> tuple:
        return self.alpha.shape

    def params(self, t: int, j: int) -> InverseGammaParams:
        return InverseGammaParams(float(self.alpha[t, j]), float(self.beta[t, j]))

    def sample(self, R: int, rng) -> np.ndarray:
        """``R x T x r`` draws."""
        return self.beta / rng.standard_gamma(self.alpha, size=(R,) + self.alpha.shape)

    def logpdf(self, W) -> np.ndarray:
        """Elementwise log density, same shape as ``W``."""
        return _ig_logpdf(W, self.alpha, self.beta)

    @classmethod
    def prior(cls, v, T: int, unit_variance: bool = False) -> "ImportanceFamily":
        """The mixing prior IG(v/2, c/2) itself (c = v, or v - 2)."""
        v = np.asarray(v, dtype=float)
        c = v - 2.0 if unit_variance else v
        return cls(np.tile(v / 2.0, (T, 1)), np.tile(c / 2.0, (T, 1)))


def _ig_logpdf(x, a, b):
    with np.errstate(divide="ignore"):
        return a * np.log(b) - special.gammaln(a) - (a + 1.0) * np.log(x) - b / x


def fit_importance_density(W_draws, max_iter: int = 100, tol: float = 1e-10,
                           min_alpha: float = 1.0 + 1e-6) -> ImportanceFamily:
    """Maximum-likelihood IG fit to each (t, j) margin of ``W_draws`` (M x T x r).

    For fixed alpha the MLE of beta is alpha / mean(1/w); alpha then solves
    log(alpha) - digamma(alpha) = s with s = log mean(1/w) + mean(log w) >= 0,
    by Newton's method from Minka's closed-form start. The fitted alpha is
    floored at just above one so that every importance law has a finite mean.
    """
    W = np.asarray(W_draws, dtype=float)
    if W.ndim == 2:
        W = W[:, :, None]
    if W.ndim != 3:
        raise DimensionError("W draws must be M x T x r")
    M = W.shape[0]
    if M < 20:
        raise DimensionError(f"need at least 20 draws to fit the importance density, got {M}")
    if np.any(~(W > 0)):
        raise DomainError("mixing-weight draws must be positive")
    inv_mean = (1.0 / W).mean(axis=0)
    s = np.log(inv_mean) + np.log(W).mean(axis=0)
    degenerate = ~(s > 1e-12)
    if np.any(degenerate):
        t, j = (int(i) for i in np.argwhere(degenerate)[0])
        raise FitError(f"draws of w[{t}, {j}] are (numerically) constant; IG fit is degenerate",
                       index=(t, j))
    alpha = (3.0 - s + np.sqrt((s - 3.0) ** 2 + 24.0 * s)) / (12.0 * s)
    for _ in range(max_iter):
        g = np.log(alpha) - special.digamma(alpha) - s
        dg = 1.0 / alpha - special.polygamma(1, alpha)
        step = g / dg
        new = alpha - step
        new = np.where(new > 0, new, alpha / 2.0)
        done = np.abs(new - alpha) <= tol * np.maximum(1.0, alpha)
        alpha = new
        if np.all(done):
            break
    else:
        bad = np.argwhere(~done)[0]
        raise FitError(f"Newton iteration for w[{bad[0]}, {bad[1]}] did not converge",
                       index=tuple(int(i) for i in bad))
    alpha = np.maximum(alpha, min_alpha)
    return ImportanceFamily(alpha, alpha / inv_mean)


# -- integrated likelihood ------------------------------------------------------------

@dataclass
class LikelihoodEstimate:
    log_value: float
    se: float
    ess: float
    ess_min: float


def _mixing_log_prior(W, v, unit_variance: bool) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    c = v - 2.0 if unit_variance else v
    return _ig_logpdf(W, v / 2.0, c / 2.0)


def integrated_likelihood(Y, X, beta, L, sigma2, v, family: Optional[ImportanceFamily] = None,
                          R: int = 500, rng=None, *, W_draws=None, unit_variance: bool = False,
                          method: str = "factorized") -> LikelihoodEstimate:
    """Importance-sampling estimate of log p(y | beta, L, Sigma, v).

    ``family=None`` uses the mixing prior as importance density. ``W_draws``
    (``R x T x r``, drawn from ``family``) may be passed to share random
    numbers across calls. ``method``:

    * ``"factorized"``: the weights are independent over t given the
      parameters, so p(y | .) = prod_t p(y_t | .) and each factor is
      estimated with its own R draws. The product of these unbiased
      estimates is unbiased for the likelihood and far less variable than
    * ``"joint"``: the average over R whole-sample draws of the product of
      weights.

    ``se`` is the delta-method standard error of the log estimate; ``ess``
    is R / (1 + cv^2) of the weights (mean over t for the factorized form).
    """
    E = _residuals(Y, X, beta)
    T = E.shape[0]
    L = np.asarray(L, dtype=float)
    r = L.shape[1]
    if r == 0:
        value = float(_gaussian_mixture_logpdf(E, L, sigma2, np.ones((T, 0))).sum())
        return LikelihoodEstimate(value, 0.0, float(R), float(R))
    if R < 100 and W_draws is None:
        raise DomainError("use at least R = 100 importance draws")
    if family is None:
        family = ImportanceFamily.prior(v, T, unit_variance)
    if family.shape != (T, r):
        raise DimensionError(f"importance family is {family.shape}, data need {(T, r)}")
    if W_draws is None:
        rng = np.random.default_rng() if rng is None else rng
        W_draws = family.sample(R, rng)
    R = W_draws.shape[0]
    logw = (_gaussian_mixture_logpdf(E, L, sigma2, W_draws)
            + (_mixing_log_prior(W_draws, v, unit_variance) - family.logpdf(W_draws)).sum(axis=-1))
    if method == "factorized":
        top = logw.max(axis=0)
        if np.any(~np.isfinite(top)):
            raise EstimatorError("every importance weight is zero for some period")
        w = np.exp(logw - top)
        mean = w.mean(axis=0)
        value = float((top + np.log(mean)).sum())
        cv2 = w.var(axis=0) / mean**2
        se = float(np.sqrt((cv2 / R).sum()))
        ess_t = R / (1.0 + cv2)
        return LikelihoodEstimate(value, se, float(ess_t.mean()), float(ess_t.min()))
    if method == "joint":
        total = logw.sum(axis=1)
        top = total.max()
        if not np.isfinite(top):
            raise EstimatorError("every importance weight is zero")
        w = np.exp(total - top)
        mean = w.mean()
        cv2 = w.var() / mean**2
        ess = R / (1.0 + cv2)
        return LikelihoodEstimate(float(top + np.log(mean)), float(np.sqrt(cv2 / R)), float(ess), float(ess))
    raise DomainError("method must be 'factorized' or 'joint'")


# -- DIC ------------------------------------------------------------------------------

@dataclass
class DicResult:
    """DIC = D_bar + p_D = 2 D_bar - D(theta_tilde), with p_D = D_bar - D(theta_tilde)."""

    d_bar: float
    d_hat: float
    kind: str = "integrated"
    ess: np.ndarray = field(default_factory=lambda: np.zeros(0))
    R: int = 0
    M: int = 0
    n_evaluations: int = 0

    @property
    def p_d(self) -> float:
        return self.d_bar - self.d_hat

    @property
    def dic(self) -> float:
        return 2.0 * self.d_bar - self.d_hat

    def to_dict(self) -> dict:
        q = (np.quantile(self.ess, [0.0, 0.5, 1.0]).tolist() if self.ess.size else [None] * 3)
        return {"kind": self.kind, "D_bar": self.d_bar, "D_hat": self.d_hat, "p_D": self.p_d,
                "DIC": self.dic, "ess_min": q[0], "ess_median": q[1], "ess_max": q[2],
                "R": self.R, "M": self.M, "evaluations": self.n_evaluations}


def _point_estimate(posterior, estimate: str):
    agg = {"mean": np.mean, "median": np.median}.get(estimate)
    if agg is None:
        raise DomainError("estimate must be 'mean' or 'median'")
    return (agg(posterior.beta, axis=0), agg(posterior.L, axis=0), agg(posterior.sigma2, axis=0),
            agg(posterior.v, axis=0))


def compute_dic(posterior, data=None, R: int = 500, rng=None, *, M: int = 2000, stride: int = 1,
                estimate: str = "mean", method: str = "factorized", family=None,
                jobs: int = 1) -> DicResult:
    """Integrated-likelihood DIC of a normalised posterior sample.

    ``data`` is the estimation :class:`~ngsvar.model.Design` (defaults to the
    one stored with the sample). The importance density is fitted to the last
    ``M`` stored draws of W; without stored W the mixing prior at each draw
    is used instead. The same R importance draws are reused for every
    posterior draw (common random numbers), which keeps the Monte Carlo error
    of p_D small. ``stride`` evaluates every ``stride``-th draw.
    """
    design = posterior.design if data is None else data
    if design is None:
        raise DomainError("no data: pass the design or keep it on the posterior sample")
    S = len(posterior)
    if S == 0:
        raise DomainError("empty posterior sample")
    unit = bool(posterior.spec.unit_variance_factors) if posterior.spec is not None else False
    rng = np.random.default_rng() if rng is None else rng
    Y, X = design.Y, design.X
    T, r = Y.shape[0], posterior.r
    m_used = 0
    if family is None and r and posterior.W is not None:
        Wd = posterior.W[-M:]
        m_used = Wd.shape[0]
        family = fit_importance_density(Wd)
    common = family.sample(R, rng) if (family is not None and r) else None

    def one(beta, L, sigma2, v, seed_rng):
        fam = family
        draws = common
        if r and fam is None:
            draws = ImportanceFamily.prior(v, T, unit).sample(R, seed_rng)
        return integrated_likelihood(Y, X, beta, L, sigma2, v, fam, R, seed_rng, W_draws=draws,
                                     unit_variance=unit, method=method)

    idx = np.arange(0, S, max(int(stride), 1))
    seeds = rng.integers(2**63 - 1, size=idx.size + 1)
    args = [(posterior.beta[s], posterior.L[s], posterior.sigma2[s], posterior.v[s],
             np.random.default_rng(seeds[i])) for i, s in enumerate(idx)]
    if jobs != 1:
        from joblib import Parallel, delayed

        ests = Parallel(n_jobs=jobs)(delayed(one)(*a) for a in args)
    else:
        ests = [one(*a) for a in args]
    dev = np.array([-2.0 * e.log_value for e in ests])
    tilde = _point_estimate(posterior, estimate)
    at_hat = one(*tilde, np.random.default_rng(seeds[-1]))
    return DicResult(d_bar=float(np.sum(dev) / dev.size), d_hat=-2.0 * at_hat.log_value,
                     kind="integrated", ess=np.array([e.ess for e in ests]), R=R if r else 0,
                     M=m_used, n_evaluations=int(idx.size))


def conditional_dic(posterior, data=None, estimate: str = "mean") -> DicResult:
    """DIC from the conditional likelihood p(y | theta, f), treating the
    factors as parameters.

    This version is known to favour the most complex models; it is reported
    for comparison only and always warns.
    """
    design = posterior.design if data is None else data
    if design is None:
        raise DomainError("no data: pass the design or keep it on the posterior sample")
    if posterior.r and posterior.f is None:
        raise DomainError("conditional DIC needs stored factor draws")
    warnings.warn("conditional-likelihood DIC tends to favour the most complex model; "
                  "prefer compute_dic for model comparison", UserWarning, stacklevel=2)
    Y, X = design.Y, design.X
    T = Y.shape[0]

    def loglik(beta, L, sigma2, f):
        E = _residuals(Y, X, beta)
        if L.shape[1]:
            E = E - f @ L.T
        return float(-0.5 * (T * (Y.shape[1] * LOG_2PI + np.log(sigma2).sum()) + (E**2 / sigma2).sum()))

    f_draws = posterior.f if posterior.r else np.zeros((len(posterior), T, 0))
    dev = np.array([-2.0 * loglik(posterior.beta[s], posterior.L[s], posterior.sigma2[s], f_draws[s])
                    for s in range(len(posterior))])
    beta, L, sigma2, _ = _point_estimate(posterior, estimate)
    agg = np.mean if estimate == "mean" else np.median
    d_hat = -2.0 * loglik(beta, L, sigma2, agg(f_draws, axis=0))
    return DicResult(d_bar=float(np.sum(dev) / dev.size), d_hat=d_hat, kind="conditional",
                     n_evaluations=len(posterior))


__all__ = [
    "ImportanceFamily", "LikelihoodEstimate", "DicResult", "conditional_likelihood_given_W",
    "fit_importance_density", "integrated_likelihood", "compute_dic", "conditional_dic",
]
