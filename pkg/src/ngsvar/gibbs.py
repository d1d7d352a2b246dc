"""Gibbs sampler for the VAR with Student-t mixture factors.

One sweep updates, in order: the factors, the (coefficient, loading) rows
equation by equation, the mixing weights, the degrees of freedom, the
idiosyncratic variances, and the shrinkage hierarchy (lambda, psi, z_lambda,
z_psi).
"""
from __future__ import annotations

import time
import warnings
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy import linalg, special

from .diagnostics import ess_array
from .errors import DecompositionError, DimensionError, NgsvarError, SamplerError
from .identification import SignedPermutation, normalize_draw
from .kernels import (
    BlockPrecision,
    block_precision_moments,
    griddy_draw,
    rng_stream,
    sample_block_precision_normal,
    sample_inverse_gamma,
)
from .model import Dataset, Design, ModelSpec, VarCoefficients, standardize
from .priors import (
    LoadingsPrior,
    MinnesotaHierarchy,
    init_hierarchy,
    prior_covariance_for_equation,
    prior_mean_for_equation,
    update_lambdas,
    update_psi,
    update_z_lambda,
    update_z_psi,
)
from .restrictions import RestrictionSet, apply_sign_restrictions, apply_zero_restrictions, embed

SCALE_FLOOR = 1e-12
STEP_NAMES = ("factors", "coefficients", "mixing", "dof", "noise", "lambda", "psi", "z_lambda", "z_psi")


@dataclass
class GibbsState:
    """One draw of every block.

    ``beta`` is ``N x k`` (rows are equations, entries outside an equation's
    regressor mask are zero), ``L`` is ``N x r``; ``f`` and ``W`` are ``T x r``.
    """

    beta: np.ndarray
    L: np.ndarray
    sigma2: np.ndarray
    f: np.ndarray
    W: np.ndarray
    v: np.ndarray
    hierarchy: MinnesotaHierarchy

    def copy(self) -> "GibbsState":
        return GibbsState(
            self.beta.copy(), self.L.copy(), self.sigma2.copy(), self.f.copy(),
            self.W.copy(), self.v.copy(), self.hierarchy.copy(),
        )

    @property
    def coefficients(self) -> VarCoefficients:
        """VAR coefficients of the first ``n`` (non-auxiliary) equations."""
        n = self.hierarchy.n
        return VarCoefficients(self.beta[:n])


class GibbsModel:
    """Fixed ingredients of the sampler: data, priors, restrictions and the
    per-equation regressor layout."""

    def __init__(self, spec: ModelSpec, design: Design, restrictions: RestrictionSet = None,
                 loadings_prior: LoadingsPrior = None):
        self.spec = spec
        self.design = design
        self.restrictions = RestrictionSet() if restrictions is None else restrictions
        self.r = spec.r
        self.n_var = design.n_var
        if design.n_var != spec.n:
            raise DimensionError(f"spec has n={spec.n}, data has {design.n_var} VAR variables")
        if design.p != spec.p:
            raise DimensionError(f"spec has p={spec.p}, design was built with p={design.p}")
        self.restrictions.validate(design.n_eq, self.r)
        self.loadings_prior = loadings_prior or LoadingsPrior.default(self.r, spec.prior)
        self.Y, self.X = design.Y, design.X
        self.T, self.N, self.k = design.T, design.n_eq, design.k
        self.XtX = self.X.T @ self.X
        self.XtY = self.X.T @ self.Y
        self.unit_variance = spec.unit_variance_factors
        self.sign_matrix = self.restrictions.sign_matrix(self.N, self.r)

        # columns of Z = (X, F) entering each equation
        self.columns = []
        for i in range(self.N):
            x_idx = np.flatnonzero(design.x_mask[i])
            f_idx = np.array([j for j in range(self.r) if (i, j) not in self.restrictions.zeros], dtype=int)
            if self.r > 0 and f_idx.size == 0:
                warnings.warn(f"all loadings of equation {i} are zero; it reduces to a pure VAR equation",
                              stacklevel=2)
            self.columns.append(np.concatenate([x_idx, self.k + f_idx]))
        groups = {}
        for i, cols in enumerate(self.columns):
            if np.any(self.sign_matrix[i] != 0):
                continue
            groups.setdefault(tuple(cols), []).append(i)
        self.groups = [(np.array(cols, dtype=int), np.array(eqs)) for cols, eqs in groups.items()]
        self.signed_equations = [i for i in range(self.N) if np.any(self.sign_matrix[i] != 0)]

        lo, hi = spec.sampler.df_bounds
        self.df_grid = np.linspace(lo, hi, spec.sampler.grid_size)

    def mixing_scale(self, v):
        """Scale of the IG(v/2, scale/2) mixing law: v, or v - 2 for unit variance."""
        return np.asarray(v, dtype=float) - 2.0 if self.unit_variance else np.asarray(v, dtype=float)

    def prior_moments(self, i: int, h: MinnesotaHierarchy):
        """Full-length prior mean and variance of theta_i = (beta_i, l_i)."""
        if i < self.n_var:
            mean = prior_mean_for_equation(i, h, self.loadings_prior)
            var = prior_covariance_for_equation(i, h, self.loadings_prior)
        else:
            # auxiliary (proxy) equation: intercept only
            mean = np.concatenate([np.zeros(self.k), self.loadings_prior.mean])
            var = np.concatenate([np.full(self.k, self.spec.prior.intercept_variance),
                                  self.loadings_prior.variance])
        return mean, var

    def residuals(self, state: GibbsState, include_factors: bool = True) -> np.ndarray:
        U = self.Y - self.X @ state.beta.T
        if include_factors and self.r:
            U = U - state.f @ state.L.T
        return U


# -- conditional moments ------------------------------------------------------------

def factor_conditional(state: GibbsState, model: GibbsModel):
    """Block precision and linear term of f | y, beta, L, Sigma, W."""
    U = model.residuals(state, include_factors=False)
    Ls = state.L / state.sigma2[:, None]
    G = state.L.T @ Ls
    blocks = np.broadcast_to(G, (model.T, model.r, model.r)).copy()
    idx = np.arange(model.r)
    blocks[:, idx, idx] += 1.0 / state.W
    return BlockPrecision(blocks), U @ Ls


def coefficient_conditional(i: int, state: GibbsState, model: GibbsModel):
    """Gaussian full conditional of theta_i in the retained coordinates.

    Returns ``(mean, precision, keep)``; ``keep`` indexes the full
    ``k + r`` vector (zero-restricted loadings removed).
    """
    Z = np.column_stack([model.X, state.f]) if model.r else model.X
    prior_mean, prior_var = model.prior_moments(i, state.hierarchy)
    x_drop = np.flatnonzero(~model.design.x_mask[i])
    Zi, m, V, keep = apply_zero_restrictions(i, Z, prior_mean, prior_var, model.restrictions, model.k)
    if x_drop.size:
        sel = ~np.isin(keep, x_drop)
        Zi, m, V, keep = Zi[:, sel], m[sel], V[sel], keep[sel]
    y = model.Y[:, i]
    K = Zi.T @ Zi / state.sigma2[i] + np.diag(1.0 / V)
    b = Zi.T @ y / state.sigma2[i] + m / V
    try:
        c = linalg.cho_factor(K, lower=True)
    except linalg.LinAlgError:
        raise DecompositionError(f"posterior precision of equation {i} is not positive definite",
                                 index=i) from None
    return linalg.cho_solve(c, b), K, keep


# -- the nine steps -------------------------------------------------------------------

def step_factors(state: GibbsState, model: GibbsModel, rng) -> np.ndarray:
    if model.r == 0:
        return np.zeros((model.T, 0))
    K, b = factor_conditional(state, model)
    return sample_block_precision_normal(K, b.ravel(), rng)


def step_coefficients_and_loadings(state: GibbsState, model: GibbsModel, rng):
    """Draw every theta_i = (beta_i, l_i); returns new ``(beta, L)``."""
    k, r = model.k, model.r
    h = state.hierarchy
    beta = np.zeros_like(state.beta)
    L = np.zeros_like(state.L)
    F = state.f
    if r:
        XtF = model.X.T @ F
        ZtZ = np.block([[model.XtX, XtF], [XtF.T, F.T @ F]])
        ZtY = np.vstack([model.XtY, F.T @ model.Y])
    else:
        ZtZ, ZtY = model.XtX, model.XtY
    priors = [model.prior_moments(i, h) for i in range(model.N)]
    for cols, eqs in model.groups:
        d = cols.size
        m = np.array([priors[i][0][cols] for i in eqs])
        V = np.array([priors[i][1][cols] for i in eqs])
        s2 = state.sigma2[eqs]
        Kg = ZtZ[np.ix_(cols, cols)][None] / s2[:, None, None]
        Kg[:, np.arange(d), np.arange(d)] += 1.0 / V
        bg = ZtY[np.ix_(cols, eqs)].T / s2[:, None] + m / V
        try:
            theta = sample_block_precision_normal(BlockPrecision(Kg), bg.ravel(), rng)
        except DecompositionError as exc:
            i = int(eqs[exc.index])
            raise DecompositionError(f"posterior precision of equation {i} is not positive definite",
                                     index=i) from None
        full = np.zeros((eqs.size, k + r))
        full[:, cols] = theta
        beta[eqs] = full[:, :k]
        L[eqs] = full[:, k:]
    for i in model.signed_equations:
        mean, K, keep = coefficient_conditional(i, state, model)
        signs = np.zeros(keep.size, dtype=int)
        fpos = keep >= k
        signs[fpos] = model.sign_matrix[i, keep[fpos] - k]
        current = np.concatenate([state.beta[i], state.L[i]])[keep]
        theta = apply_sign_restrictions(mean, K, signs, current, rng, sweeps=model.spec.sampler.sign_sweeps)
        full = embed(theta, keep, k + r)
        beta[i], L[i] = full[:k], full[k:]
    return beta, L


def step_mixing_weights(state: GibbsState, model: GibbsModel, rng) -> np.ndarray:
    if model.r == 0:
        return np.zeros((model.T, 0))
    shape = (state.v + 1.0) / 2.0
    scale = (model.mixing_scale(state.v)[None, :] + state.f**2) / 2.0
    return sample_inverse_gamma(np.broadcast_to(shape, scale.shape), np.maximum(scale, SCALE_FLOOR), rng)


def dof_log_density(grid, sum_log_w, sum_inv_w, T: int, unit_variance: bool = False):
    """log prod_t IG(w_t; v/2, c/2) on ``grid`` from sufficient statistics,
    with c = v (or v - 2 under unit variance)."""
    grid = np.asarray(grid, dtype=float)
    a = grid / 2.0
    b = (grid - 2.0 if unit_variance else grid) / 2.0
    with np.errstate(divide="ignore", invalid="ignore"):
        out = T * (a * np.log(b) - special.gammaln(a)) - (a + 1.0) * sum_log_w - b * sum_inv_w
    return np.where(b > 0, out, -np.inf)


def step_degrees_of_freedom(state: GibbsState, model: GibbsModel, rng) -> np.ndarray:
    grid = model.df_grid
    T = state.W.shape[0]
    out = np.empty(model.r)
    for j in range(model.r):
        if T == 0:
            out[j] = grid[rng.integers(grid.size)]
            continue
        w = state.W[:, j]
        logd = dof_log_density(grid, np.log(w).sum(), (1.0 / w).sum(), T, model.unit_variance)
        out[j] = griddy_draw(grid, logd, rng)
    return out


def collapsed_dof_log_density(grid, f, unit_variance: bool = False):
    """log prod_t p(f_t | v) on ``grid`` with the mixing weight integrated
    out: a Student-t with v degrees of freedom and scale sqrt(c / v)."""
    grid = np.asarray(grid, dtype=float)[:, None]
    f2 = np.asarray(f, dtype=float)[None, :] ** 2
    c = grid - 2.0 if unit_variance else grid
    with np.errstate(divide="ignore", invalid="ignore"):
        out = (special.gammaln((grid + 1.0) / 2.0) - special.gammaln(grid / 2.0)
               - 0.5 * np.log(np.pi * c) - (grid + 1.0) / 2.0 * np.log1p(f2 / c)).sum(axis=1)
    return np.where(c[:, 0] > 0, out, -np.inf)


def step_collapsed_dof(state: GibbsState, model: GibbsModel, rng):
    """Blocked update of (v, W): v | f from the t likelihood, then W | f, v."""
    grid = model.df_grid
    v = np.empty(model.r)
    for j in range(model.r):
        v[j] = griddy_draw(grid, collapsed_dof_log_density(grid, state.f[:, j], model.unit_variance), rng)
    shape = (v + 1.0) / 2.0
    scale = (model.mixing_scale(v)[None, :] + state.f**2) / 2.0
    W = sample_inverse_gamma(np.broadcast_to(shape, scale.shape), np.maximum(scale, SCALE_FLOOR), rng)
    return v, W


def noise_conditional(state: GibbsState, model: GibbsModel):
    """Shape and scale vectors of the IG conditionals of the sigma_i^2."""
    U = model.residuals(state)
    prior = model.spec.prior
    return prior.alpha0 + model.T / 2.0, prior.beta0 + 0.5 * (U**2).sum(axis=0)


def step_noise_variances(state: GibbsState, model: GibbsModel, rng) -> np.ndarray:
    shape, scale = noise_conditional(state, model)
    if np.any(scale < SCALE_FLOOR):
        warnings.warn(f"noise-variance scale below {SCALE_FLOOR}; floored", RuntimeWarning, stacklevel=2)
        scale = np.maximum(scale, SCALE_FLOOR)
    return sample_inverse_gamma(np.full(model.N, shape), scale, rng)


def factor_scale_conditional(state: GibbsState, model: GibbsModel):
    """Gamma (shape, rate) of c_j^2 for the rescaling L_j -> c L_j, f_j -> f_j / c,
    W_j -> W_j / c^2, which leaves L f unchanged.

    Drawn against Haar measure dc/c this is a generalised Gibbs move, so it
    preserves the posterior. Only valid for zero prior mean on the loadings
    (the linear term would otherwise make the law non-Gamma).
    """
    a = state.v / 2.0
    b = model.mixing_scale(state.v) / 2.0
    free = model.restrictions.free_mask(model.N, model.r)
    n_free = free.sum(axis=0)
    V = model.loadings_prior.variance
    shape = model.T * a + n_free / 2.0
    rate = (state.L**2).sum(axis=0) / (2.0 * V) + b * (1.0 / state.W).sum(axis=0)
    return shape, rate


def step_factor_scale(state: GibbsState, model: GibbsModel, rng):
    """Rescale each factor column by an exact group move; returns (L, f, W)."""
    if model.r == 0:
        return state.L, state.f, state.W
    if np.any(model.loadings_prior.mean != 0):
        raise SamplerError("factor rescaling needs a zero prior mean on the loadings")
    shape, rate = factor_scale_conditional(state, model)
    c = np.sqrt(rng.standard_gamma(shape) / rate)
    return state.L * c, state.f / c, state.W / c**2


def _var_beta(state: GibbsState, model: GibbsModel) -> np.ndarray:
    return state.beta[: model.n_var]


def sweep(state: GibbsState, model: GibbsModel, rng, order=STEP_NAMES) -> GibbsState:
    """One pass over the nine blocks, updating ``state`` in place."""
    h = state.hierarchy
    has_lags = h.psi.size > 0
    for name in order:
        if name == "factors":
            state.f = step_factors(state, model, rng)
        elif name == "coefficients":
            state.beta, state.L = step_coefficients_and_loadings(state, model, rng)
        elif name == "mixing":
            state.W = step_mixing_weights(state, model, rng)
        elif name == "dof":
            if model.spec.sampler.collapsed_dof and model.r and model.T:
                state.v, state.W = step_collapsed_dof(state, model, rng)
            else:
                state.v = step_degrees_of_freedom(state, model, rng)
        elif name == "noise":
            state.sigma2 = step_noise_variances(state, model, rng)
        elif name == "scale":
            state.L, state.f, state.W = step_factor_scale(state, model, rng)
        elif name == "lambda":
            if has_lags:
                h.lam1, h.lam2 = update_lambdas(_var_beta(state, model), h, rng)
        elif name == "psi":
            if has_lags:
                h.psi = update_psi(_var_beta(state, model), h, rng)
        elif name == "z_lambda":
            if has_lags:
                h.z_lam1, h.z_lam2 = update_z_lambda(h, rng)
        elif name == "z_psi":
            if has_lags:
                h.z_psi = update_z_psi(h, rng)
        else:
            raise SamplerError(f"unknown Gibbs step {name!r}")
    return state


# -- initialisation -------------------------------------------------------------------

def _ols_rows(model: GibbsModel) -> np.ndarray:
    beta = np.zeros((model.N, model.k))
    for i in range(model.N):
        idx = np.flatnonzero(model.design.x_mask[i])
        Xi = model.X[:, idx]
        A = Xi.T @ Xi + 1e-6 * np.eye(idx.size)
        beta[i, idx] = np.linalg.solve(A, Xi.T @ model.Y[:, i])
    return beta


def _initial_factors(U, r, rng):
    """Loadings and unit-variance factors from FastICA on the residuals,
    falling back to principal components."""
    T, N = U.shape
    Uc = U - U.mean(axis=0)
    evals, evecs = np.linalg.eigh(Uc.T @ Uc / T)
    order = np.argsort(evals)[::-1][:r]
    sd = np.sqrt(np.maximum(evals[order], 1e-8))
    f = Uc @ evecs[:, order] / sd
    if T > 5 * N:
        try:
            from sklearn.decomposition import FastICA

            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                ica = FastICA(n_components=r, whiten="unit-variance", max_iter=400,
                              random_state=int(rng.integers(2**31 - 1)))
                S = ica.fit_transform(Uc)
            if np.all(np.isfinite(S)):
                f = (S - S.mean(axis=0)) / S.std(axis=0)
        except Exception:  # noqa: BLE001 - any ICA failure falls back to PCA
            pass
    L = np.linalg.lstsq(f, Uc, rcond=None)[0].T
    return L, f


def initial_state(model: GibbsModel, rng) -> GibbsState:
    """Start from OLS coefficients and ICA factors of the OLS residuals."""
    beta = _ols_rows(model)
    U = model.Y - model.X @ beta.T
    T, r = model.T, model.r
    if r:
        L, f = _initial_factors(U, r, rng)
        for (i, j) in model.restrictions.zeros:
            L[i, j] = 0.0
        for (i, j), s in model.restrictions.signs.items():
            L[i, j] = s * max(abs(L[i, j]), 0.1)
        E = U - f @ L.T
    else:
        L, f, E = np.zeros((model.N, 0)), np.zeros((T, 0)), U
    sigma2 = np.maximum(E.var(axis=0), 1e-3)
    v0 = float(model.df_grid[np.argmin(np.abs(model.df_grid - 8.0))])
    W = np.ones((T, r)) if model.unit_variance else np.full((T, r), v0 / (v0 - 2.0))
    h = init_hierarchy(model.n_var, model.spec.p, model.spec.prior)
    return GibbsState(beta, L, sigma2, f, W, np.full(r, v0), h)


# -- posterior container --------------------------------------------------------------

@dataclass
class PosteriorSample:
    """Retained draws, stacked along a leading draw axis.

    ``f`` and ``W`` are ``None`` when latent storage is off; ``lam`` holds
    (lambda_1, lambda_2) per draw.
    """

    beta: np.ndarray
    L: np.ndarray
    sigma2: np.ndarray
    v: np.ndarray
    f: Optional[np.ndarray] = None
    W: Optional[np.ndarray] = None
    lam: Optional[np.ndarray] = None
    psi: Optional[np.ndarray] = None
    permutations: list = field(default_factory=list)
    meta: dict = field(default_factory=dict)
    design: Optional[Design] = None
    spec: Optional[ModelSpec] = None

    def __len__(self) -> int:
        return self.beta.shape[0]

    @property
    def n_eq(self) -> int:
        return self.beta.shape[1]

    @property
    def r(self) -> int:
        return self.L.shape[2]

    def draw(self, s: int) -> GibbsState:
        n = self.design.n_var if self.design is not None else self.n_eq
        p = self.design.p if self.design is not None else 0
        h = init_hierarchy(n, p)
        if self.lam is not None:
            h.lam1, h.lam2 = (float(x) for x in self.lam[s])
        if self.psi is not None:
            h.psi = self.psi[s].copy()
        T = self.design.T if self.design is not None else 0
        f = self.f[s] if self.f is not None else np.zeros((T, self.r))
        W = self.W[s] if self.W is not None else np.ones((T, self.r))
        return GibbsState(self.beta[s].copy(), self.L[s].copy(), self.sigma2[s].copy(),
                          np.array(f), np.array(W), self.v[s].copy(), h)

    def subset(self, idx) -> "PosteriorSample":
        idx = np.asarray(idx)
        pick = lambda a: None if a is None else a[idx]  # noqa: E731
        return PosteriorSample(self.beta[idx], self.L[idx], self.sigma2[idx], self.v[idx],
                               pick(self.f), pick(self.W), pick(self.lam), pick(self.psi),
                               [self.permutations[i] for i in np.atleast_1d(idx)] if self.permutations else [],
                               dict(self.meta), self.design, self.spec)

    def posterior_mean(self) -> dict:
        return {"beta": self.beta.mean(0), "L": self.L.mean(0), "sigma2": self.sigma2.mean(0),
                "v": self.v.mean(0)}

    def apply_permutations(self, perms) -> None:
        """Re-order/sign the factor columns of every draw in place."""
        for s, sp in enumerate(perms):
            self.L[s] = sp.apply(self.L[s])
            self.v[s] = sp.apply_unsigned(self.v[s])
            if self.f is not None:
                self.f[s] = sp.apply(self.f[s])
            if self.W is not None:
                self.W[s] = sp.apply_unsigned(self.W[s])
        if self.permutations:
            self.permutations = [old.compose(new) for old, new in zip(self.permutations, perms)]
        else:
            self.permutations = list(perms)

    def diagnostics(self) -> dict:
        out = {
            "ess_L": ess_array(self.L),
            "ess_sigma2": ess_array(self.sigma2),
            "ess_v": ess_array(self.v),
        }
        out["min_ess"] = float(min(np.min(a) for a in out.values() if a.size)) if self.r else float(
            np.min(out["ess_sigma2"]))
        return out


# -- normalisation --------------------------------------------------------------------

def _signs_only(L, template) -> SignedPermutation:
    r = L.shape[1]
    dots = np.einsum("ij,ij->j", L, template)
    return SignedPermutation(tuple(range(r)), tuple(1 if d >= 0 else -1 for d in dots))


def normalize_sample(sample: PosteriorSample, *, template=None, proxy=None, sign_row=None,
                     mode: str = "auto", max_iter: int = 20) -> PosteriorSample:
    """Resolve the sign/permutation ambiguity of every retained draw.

    ``mode``:
      * ``"template"`` with a template matrix, ``"proxy"`` with a proxy series;
      * ``"self"``: iterate template matching against the running posterior
        mean, starting from the first retained draw;
      * ``"signs"``: keep the column order (fixed by restrictions) and only
        align signs with the posterior mean, leaving sign-restricted columns;
      * ``"none"``; ``"auto"`` picks template/proxy if given, else ``"self"``.
    """
    if sample.r == 0 or mode == "none":
        return sample
    if mode == "auto":
        mode = "template" if template is not None else ("proxy" if proxy is not None else "self")
    S = len(sample)
    if mode == "template":
        perms = [normalize_draw(sample.L[s], template=template)[2] for s in range(S)]
        sample.apply_permutations(perms)
    elif mode == "proxy":
        if sample.f is None:
            raise NgsvarError("proxy normalisation needs stored factor draws")
        perms = [normalize_draw(sample.L[s], sample.f[s], proxy=proxy, sign_row=sign_row)[2]
                 for s in range(S)]
        sample.apply_permutations(perms)
    elif mode == "self":
        ref = sample.L[0].copy()
        for _ in range(max_iter):
            perms = [normalize_draw(sample.L[s], template=ref)[2] for s in range(S)]
            if all(p.is_identity for p in perms):
                break
            sample.apply_permutations(perms)
            ref = sample.L.mean(axis=0)
    elif mode == "signs":
        fixed = set(j for (_, j) in (sample.meta.get("sign_cells") or []))
        for _ in range(max_iter):
            ref = sample.L.mean(axis=0)
            perms = []
            for s in range(S):
                sp = _signs_only(sample.L[s], ref)
                signs = tuple(1 if j in fixed else sg for j, sg in enumerate(sp.signs))
                perms.append(SignedPermutation(sp.perm, signs))
            if all(p.is_identity for p in perms):
                break
            sample.apply_permutations(perms)
    else:
        raise NgsvarError(f"unknown normalisation mode {mode!r}")
    sample.meta["normalization"] = mode
    sample.meta["normalization_ties"] = int(sum(p.tie for p in sample.permutations))
    sample.meta["normalization_changed"] = int(sum(not p.is_identity for p in sample.permutations))
    return sample


# -- driver ---------------------------------------------------------------------------

def run_chain(spec: ModelSpec, data, rng=None, *, restrictions: RestrictionSet = None,
              init: GibbsState = None, normalize: str = "auto", template=None, proxy=None,
              sign_row=None, callback=None) -> PosteriorSample:
    """Run burn-in plus retained sweeps and return the (normalised) draws.

    ``data`` is a :class:`Design` or a :class:`Dataset` (then standardised and
    lag-trimmed here). ``rng`` defaults to the stream for ``spec.sampler.seed``.
    With restrictions and ``normalize="auto"`` only signs of unrestricted
    columns are aligned, since restrictions already pin the column order.
    """
    settings = spec.sampler
    if isinstance(data, Dataset):
        std, scale = standardize(data, trim=spec.p)
        design = Design.from_dataset(std, spec.p, scale=scale)
    else:
        design = data
    restrictions = RestrictionSet() if restrictions is None else restrictions
    rng = rng_stream(settings.seed) if rng is None else rng
    model = GibbsModel(spec, design, restrictions)
    state = initial_state(model, rng) if init is None else init.copy()
    order = tuple(settings.order)
    if set(order) != set(STEP_NAMES) or len(order) != len(STEP_NAMES):
        raise SamplerError(f"sweep order must be a permutation of {STEP_NAMES}")
    if settings.rescale_factors:
        order = order + ("scale",)

    S = settings.draws
    N, k, r, T = model.N, model.k, model.r, model.T
    out = PosteriorSample(
        beta=np.empty((S, N, k)), L=np.empty((S, N, r)), sigma2=np.empty((S, N)), v=np.empty((S, r)),
        f=np.empty((S, T, r)) if settings.store_latent else None,
        W=np.empty((S, T, r)) if settings.store_latent else None,
        lam=np.empty((S, 2)) if settings.store_hyper else None,
        psi=np.empty((S,) + state.hierarchy.psi.shape) if settings.store_hyper else None,
        design=design, spec=spec,
    )
    total = settings.burn_in + S * settings.thin
    kept = 0
    t0 = time.perf_counter()
    for it in range(total):
        try:
            sweep(state, model, rng, order)
        except NgsvarError as exc:
            raise SamplerError(f"iteration {it}: {exc}", iteration=it) from exc
        if it >= settings.burn_in and (it - settings.burn_in) % settings.thin == settings.thin - 1:
            out.beta[kept], out.L[kept], out.sigma2[kept], out.v[kept] = state.beta, state.L, state.sigma2, state.v
            if settings.store_latent:
                out.f[kept], out.W[kept] = state.f, state.W
            if settings.store_hyper:
                out.lam[kept] = (state.hierarchy.lam1, state.hierarchy.lam2)
                out.psi[kept] = state.hierarchy.psi
            kept += 1
        if callback is not None:
            callback(it, state)
    out.meta.update({
        "seed": settings.seed, "burn_in": settings.burn_in, "draws": S, "thin": settings.thin,
        "order": list(order), "seconds": time.perf_counter() - t0,
        "unit_variance_factors": spec.unit_variance_factors,
        "sign_cells": sorted(restrictions.signs),
    })
    if normalize == "auto" and not restrictions.empty and template is None:
        normalize = "signs"
    normalize_sample(out, template=template, proxy=proxy, sign_row=sign_row, mode=normalize)
    return out


def conditional_factor_moments(state: GibbsState, model: GibbsModel):
    """Mean ``(T, r)`` and per-t covariance of f | rest, for checks."""
    K, b = factor_conditional(state, model)
    return block_precision_moments(K, b.ravel())
