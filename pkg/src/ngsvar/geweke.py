"""Joint-distribution ("getting it right") test of the Gibbs sampler.

The marginal-conditional simulator draws (theta, y) from prior then
likelihood; the successive-conditional simulator alternates one Gibbs sweep
with a fresh y | theta. Both target the same joint law, so every test
function must have the same mean under both. The regressors X are held fixed
(exogenous) so that heavy-tailed prior draws of the coefficients cannot make
the simulated series explode.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .gibbs import GibbsModel, GibbsState, sweep
from .model import Design, ModelSpec
from .priors import init_hierarchy, lag_structure
from .kernels import sample_inverse_gamma


def draw_prior(model: GibbsModel, rng) -> GibbsState:
    """One draw of every block from the prior."""
    spec = model.spec
    n, p, r, T, N, k = spec.n, spec.p, spec.r, model.T, model.N, model.k
    h = init_hierarchy(n, p, spec.prior)
    if h.psi.size:
        h.z_lam1, h.z_lam2 = (float(z) for z in sample_inverse_gamma(0.5, np.ones(2), rng))
        h.lam1 = float(sample_inverse_gamma(0.5, 1.0 / h.z_lam1, rng))
        h.lam2 = float(sample_inverse_gamma(0.5, 1.0 / h.z_lam2, rng))
        h.z_psi = sample_inverse_gamma(0.5, np.ones(h.psi.shape), rng)
        h.psi = sample_inverse_gamma(0.5, 1.0 / h.z_psi, rng)
    beta = np.zeros((N, k))
    L = np.zeros((N, r))
    for i in range(N):
        mean, var = model.prior_moments(i, h)
        draw = mean + np.sqrt(var) * rng.standard_normal(k + r)
        cols = np.zeros(k + r, dtype=bool)
        cols[model.columns[i]] = True
        draw[~cols] = 0.0
        beta[i], L[i] = draw[:k], draw[k:]
    prior = spec.prior
    sigma2 = sample_inverse_gamma(np.full(N, prior.alpha0), np.full(N, prior.beta0), rng)
    # grid nodes where the mixing law is degenerate (v = 2 under unit variance) carry no mass
    grid = model.df_grid[model.mixing_scale(model.df_grid) > 0]
    v = grid[rng.integers(grid.size, size=r)]
    W = sample_inverse_gamma(np.broadcast_to(v / 2.0, (T, r)),
                             np.broadcast_to(model.mixing_scale(v) / 2.0, (T, r)), rng)
    f = np.sqrt(W) * rng.standard_normal((T, r))
    return GibbsState(beta, L, sigma2, f, W, v, h)


def simulate_y(state: GibbsState, model: GibbsModel, rng) -> np.ndarray:
    mean = model.X @ state.beta.T + state.f @ state.L.T
    return mean + np.sqrt(state.sigma2) * rng.standard_normal(mean.shape)


def set_y(model: GibbsModel, Y) -> None:
    model.Y = Y
    model.XtY = model.X.T @ Y
    model.design.Y = Y


def default_test_functions(state: GibbsState) -> np.ndarray:
    """Bounded or moment-finite summaries of (beta, L, sigma^2, v).

    The horseshoe prior gives the coefficients no finite moments, so they
    enter through arctan.
    """
    return np.concatenate([
        np.arctan(state.beta.ravel()),
        state.L.ravel(),
        state.L.ravel() ** 2,
        np.log(state.sigma2),
        state.v,
    ])


@dataclass
class GewekeResult:
    names: list
    mean_marginal: np.ndarray
    mean_successive: np.ndarray
    se_marginal: np.ndarray
    se_successive: np.ndarray

    @property
    def z(self) -> np.ndarray:
        return (self.mean_marginal - self.mean_successive) / np.sqrt(
            self.se_marginal**2 + self.se_successive**2)

    def passed(self, threshold: float = 3.0) -> np.ndarray:
        return np.abs(self.z) < threshold


def test_function_names(model: GibbsModel) -> list:
    N, k, r = model.N, model.k, model.r
    names = [f"atan(beta[{i},{j}])" for i in range(N) for j in range(k)]
    names += [f"L[{i},{j}]" for i in range(N) for j in range(r)]
    names += [f"L[{i},{j}]^2" for i in range(N) for j in range(r)]
    names += [f"log sigma2[{i}]" for i in range(N)]
    names += [f"v[{j}]" for j in range(r)]
    return names


def geweke_test(spec: ModelSpec, X, n_samples: int, rng, order=None, n_chains: int = 200) -> GewekeResult:
    """Run both simulators with ``n_samples`` draws each.

    ``spec.prior`` must be proper in sigma^2 (alpha0, beta0 > 0). ``X`` is
    the fixed ``T x k`` regressor matrix. The successive-conditional draws
    come from ``n_chains`` independent chains of ``n_samples // n_chains``
    sweeps, each started from an exact draw of the joint law; their
    between-chain spread gives the standard error. This stays honest when
    single chains are sticky in the heavy prior tails.
    """
    X = np.asarray(X, dtype=float)
    T = X.shape[0]
    names = tuple(f"y{i}" for i in range(spec.n))
    design = Design(np.zeros((T, spec.n)), X, spec.p, names, spec.n)
    model = GibbsModel(spec, design)
    order = tuple(spec.sampler.order) if order is None else tuple(order)
    if spec.sampler.rescale_factors:
        order = order + ("scale",)

    marg = np.array([default_test_functions(draw_prior(model, rng)) for _ in range(n_samples)])

    length = max(n_samples // n_chains, 1)
    chain_means = []
    for _ in range(n_chains):
        state = draw_prior(model, rng)
        set_y(model, simulate_y(state, model, rng))
        acc = np.zeros(marg.shape[1])
        for _ in range(length):
            sweep(state, model, rng, order)
            set_y(model, simulate_y(state, model, rng))
            acc += default_test_functions(state)
        chain_means.append(acc / length)
    chain_means = np.array(chain_means)

    se_m = marg.std(axis=0, ddof=1) / np.sqrt(n_samples)
    se_s = chain_means.std(axis=0, ddof=1) / np.sqrt(n_chains)
    return GewekeResult(test_function_names(model), marg.mean(axis=0), chain_means.mean(axis=0), se_m, se_s)


def lag_regressors(T: int, n: int, p: int, rng, scale: float = 0.2) -> np.ndarray:
    """Fixed regressor matrix shaped like (1, y_{t-1}', ..., y_{t-p}').

    A small ``scale`` keeps the coefficient posterior wide, so the
    successive-conditional chain can traverse the heavy-tailed prior.
    """
    X = np.ones((T, 1 + n * p))
    X[:, 1:] = scale * rng.standard_normal((T, n * p))
    return X


__all__ = ["draw_prior", "geweke_test", "GewekeResult", "lag_regressors", "lag_structure"]
