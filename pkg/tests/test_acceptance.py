"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

The Monte Carlo study (criterion 1) and the model-selection study
(criterion 5) take hours on one core. Their reports are cached in
``tests/.acceptance_cache`` under a hash of the full study configuration
and the package version; delete the directory or set
``NGSVAR_ACCEPTANCE_REFRESH=1`` to recompute from scratch.
"""
import dataclasses
import json
import os
import warnings
from pathlib import Path

import numpy as np
import pytest
from scipy import integrate, stats

import ngsvar
from ngsvar.dic import compute_dic, fit_importance_density, integrated_likelihood
from ngsvar.geweke import geweke_test, lag_regressors
from ngsvar.gibbs import (
    GibbsModel,
    coefficient_conditional,
    conditional_factor_moments,
    initial_state,
    noise_conditional,
    run_chain,
)
from ngsvar.identification import SignedPermutation, normalize_draw, rotation_demo
from ngsvar.io import config_hash
from ngsvar.kernels import inverse_gamma_logpdf, rng_stream
from ngsvar.model import Design, ModelSpec, SamplerSettings, VarCoefficients, build_design
from ngsvar.priors import PriorConfig, init_hierarchy, lambda_conditionals, psi_conditional
from ngsvar.restrictions import RestrictionSet
from ngsvar.simulation import MonteCarloConfig, generate_dgp, run_monte_carlo
from ngsvar.structural import compute_irf, compute_irfs, independence_stats

CACHE = Path(os.environ.get("NGSVAR_ACCEPTANCE_CACHE", Path(__file__).parent / ".acceptance_cache"))
REFRESH = os.environ.get("NGSVAR_ACCEPTANCE_REFRESH") == "1"
RESULTS = {}


def verdict(number, ok, detail):
    line = f"CRITERION {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
    RESULTS[number] = line
    print(line)
    assert ok, line


def cached(name, key, compute):
    """JSON result of ``compute()``, stored under a hash of ``key``."""
    digest = config_hash({"key": key, "version": ngsvar.__version__})[:16]
    path = CACHE / f"{name}-{digest}.json"
    if path.exists() and not REFRESH:
        return json.loads(path.read_text())
    result = compute()
    CACHE.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(result, indent=1))
    return result


# -- 1. Monte Carlo ---------------------------------------------------------------------

def monte_carlo_report(T):
    config = MonteCarloConfig(replications=200, T=T, distribution="t", p=0, seed=0, jobs=-1)
    key = {k: v for k, v in dataclasses.asdict(config).items() if k != "jobs"}

    def compute():
        rep = run_monte_carlo(config)
        return {"rows": rep.rows(), "bias_se": rep.bias_se().tolist(), "failures": rep.failures,
                "replications": rep.replications}
    return cached(f"montecarlo-T{T}", key, compute)


def test_criterion_01_monte_carlo():
    big, small = monte_carlo_report(1000), monte_carlo_report(500)
    l11 = big["rows"][0]
    n = big["replications"]
    half = stats.norm.ppf(0.995) * np.sqrt(0.68 * 0.32 / n)
    mse_ok = all(b["mse"] < s["mse"] for b, s in zip(big["rows"], small["rows"]))
    ok = abs(l11["bias"]) < 0.01 and 0.68 - half <= l11["coverage"] <= 0.68 + half and mse_ok
    rows = "; ".join(f"{b['parameter']} bias {b['bias']:+.4f} cov {b['coverage']:.3f} "
                     f"mse {b['mse']:.4f}/{s['mse']:.4f}" for b, s in zip(big["rows"], small["rows"]))
    verdict(1, ok, f"T=1000 vs T=500, {n} reps: {rows}; coverage band "
                   f"[{0.68 - half:.3f}, {0.68 + half:.3f}]")


# -- 2. Geweke --------------------------------------------------------------------------

def test_criterion_02_geweke():
    rng = np.random.default_rng(2024)
    spec = ModelSpec(3, 1, 1, 30, prior=PriorConfig(alpha0=3.0, beta0=2.0),
                     sampler=SamplerSettings(burn_in=0, draws=1))
    X = lag_regressors(30, 3, 1, np.random.default_rng(3))
    res = geweke_test(spec, X, 100_000, rng, n_chains=500)
    z = np.abs(res.z)
    worst = res.names[int(np.argmax(z))]
    verdict(2, bool(np.all(z < 3.0)),
            f"{len(z)} test functions of beta, L, sigma2, v over 1e5 sweeps; max |z| {z.max():.2f} ({worst})")


# -- 3. Conditional-block oracles -------------------------------------------------------

def _norm_by_quad(log_kernel, points, cuts):
    shift = max(log_kernel(x) for x in points)
    f = lambda x: np.exp(log_kernel(x) - shift)  # noqa: E731
    total = sum(integrate.quad(f, a, b, epsabs=0, epsrel=1e-12, limit=500)[0] for a, b in cuts)
    return np.array([f(x) / total for x in points])


def test_criterion_03_block_oracles():
    rng = np.random.default_rng(3)
    errors = {}
    # factors: T=4, n=3, r=2 against the dense joint Gaussian
    Y = rng.normal(size=(4, 3))
    design = Design(Y, np.ones((4, 1)), 0, ("a", "b", "c"), 3)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        spec = ModelSpec(3, 0, 2, 4, sampler=SamplerSettings(burn_in=0, draws=1), allow_large_r=True)
    model = GibbsModel(spec, design)
    state = initial_state(model, rng)
    state.L, state.W = rng.normal(size=(3, 2)), rng.uniform(0.3, 3.0, size=(4, 2))
    state.sigma2 = rng.uniform(0.2, 2.0, size=3)
    mean, cov = conditional_factor_moments(state, model)
    big_L = np.kron(np.eye(4), state.L)
    C_ff = np.diag(state.W.ravel())
    C_uu = big_L @ C_ff @ big_L.T + np.kron(np.eye(4), np.diag(state.sigma2))
    C_fu = C_ff @ big_L.T
    U = (Y - design.X @ state.beta.T).ravel()
    o_mean = C_fu @ np.linalg.solve(C_uu, U)
    o_cov = C_ff - C_fu @ np.linalg.solve(C_uu, C_fu.T)
    blk = np.zeros_like(o_cov)
    for t in range(4):
        blk[2 * t:2 * t + 2, 2 * t:2 * t + 2] = cov[t]
    errors["factors"] = max(np.abs(mean.ravel() - o_mean).max(), np.abs(blk - o_cov).max())

    # coefficients and loadings: closed-form Bayesian regression
    y = np.zeros((41, 3))
    for t in range(1, 41):
        y[t] = 0.5 * y[t - 1] + rng.normal(size=3)
    Yd, Xd = build_design(y, 1)
    d2 = Design(Yd, Xd, 1, ("a", "b", "c"), 3)
    spec2 = ModelSpec(3, 1, 1, 40, prior=PriorConfig(alpha0=3.0, beta0=2.0),
                      sampler=SamplerSettings(burn_in=0, draws=1))
    m2 = GibbsModel(spec2, d2)
    s2 = initial_state(m2, rng)
    s2.f = rng.normal(size=s2.f.shape)
    s2.hierarchy.psi = rng.uniform(0.3, 2.0, size=s2.hierarchy.psi.shape)
    err = 0.0
    for i in range(3):
        m_post, K, _ = coefficient_conditional(i, s2, m2)
        Z = np.column_stack([Xd, s2.f])
        m0, V0 = m2.prior_moments(i, s2.hierarchy)
        C_yy = Z @ np.diag(V0) @ Z.T + s2.sigma2[i] * np.eye(40)
        C_ty = np.diag(V0) @ Z.T
        err = max(err, np.abs(m_post - (m0 + C_ty @ np.linalg.solve(C_yy, Yd[:, i] - Z @ m0))).max(),
                  np.abs(np.linalg.inv(K) - (np.diag(V0) - C_ty @ np.linalg.solve(C_yy, C_ty.T))).max())
    errors["coefficients"] = err

    # psi, lambda, sigma^2 against 1-D quadrature of their kernels
    h = init_hierarchy(3, 2)
    h.lam1, h.lam2, h.z_lam1, h.z_lam2 = 0.6, 0.08, 1.2, 0.5
    h.psi = rng.uniform(0.2, 3.0, size=h.psi.shape)
    h.z_psi = rng.uniform(0.5, 2.0, size=h.psi.shape)
    beta = h.m + 0.3 * rng.normal(size=h.m.shape)
    dev = beta[:, 1:] - h.m[:, 1:]
    gl = lambda x, v: -0.5 * np.log(2 * np.pi * v) - 0.5 * x**2 / v  # noqa: E731
    cuts = [(0, 1), (1, 10), (10, np.inf)]
    rel = []
    shape, scale = psi_conditional(beta, h)
    pts = np.array([0.05, 0.3, 1.0, 4.0, 25.0])
    for i, j in [(0, 0), (1, 3), (2, 5)]:
        kern = lambda x: gl(dev[i, j], h.lam[i, j] * x * h.C[i, 1 + j]) + inverse_gamma_logpdf(x, 0.5, 1 / h.z_psi[i, j])  # noqa: E731,E501
        oracle = _norm_by_quad(kern, pts, cuts)
        rel.append(np.abs(np.exp(inverse_gamma_logpdf(pts, shape, scale[i, j])) / oracle - 1).max())
    for params, mask, z in zip(lambda_conditionals(beta, h), (h.own, ~h.own), (h.z_lam1, h.z_lam2)):
        kern = lambda x, mask=mask, z=z: (gl(dev[mask], x * h.psi[mask] * h.C[:, 1:][mask]).sum()  # noqa: E731
                                          + inverse_gamma_logpdf(x, 0.5, 1 / z))
        p = np.array([0.02, 0.1, 0.5, 2.0])
        rel.append(np.abs(np.exp(params.logpdf(p)) / _norm_by_quad(kern, p, cuts) - 1).max())
    a_s, b_s = noise_conditional(s2, m2)
    u = m2.residuals(s2)[:, 1]
    kern = lambda x: stats.norm(0, np.sqrt(x)).logpdf(u).sum() + inverse_gamma_logpdf(x, 3.0, 2.0)  # noqa: E731
    mode = b_s[1] / (a_s + 1)
    p = mode * np.array([0.6, 0.9, 1.0, 1.2, 1.6])
    oracle = _norm_by_quad(kern, p, [(0, mode / 2), (mode / 2, 2 * mode), (2 * mode, np.inf)])
    rel.append(np.abs(np.exp(inverse_gamma_logpdf(p, a_s, b_s[1])) / oracle - 1).max())
    errors["psi/lambda/sigma2 rel"] = max(rel)

    ok = errors["factors"] < 1e-10 and errors["coefficients"] < 1e-10 and errors["psi/lambda/sigma2 rel"] < 1e-6
    verdict(3, ok, ", ".join(f"{k} err {v:.1e}" for k, v in errors.items()))


# -- 4. DIC estimator -------------------------------------------------------------------

def test_criterion_04_dic_estimator():
    rng = np.random.default_rng(4)
    X = np.ones((3, 1))
    beta, L = rng.normal(size=(2, 1)), rng.normal(size=(2, 1))
    sigma2 = rng.uniform(0.3, 1.0, size=2)
    Y = X @ beta.T + rng.standard_t(5, size=(3, 1)) @ L.T + np.sqrt(sigma2) * rng.normal(size=(3, 2))
    v = 5.0
    exact = 0.0
    for e in Y - X @ beta.T:
        def integrand(w, e=e):
            cov = w * L @ L.T + np.diag(sigma2)
            return np.exp(stats.multivariate_normal(np.zeros(2), cov).logpdf(e) + inverse_gamma_logpdf(w, v / 2, v / 2))
        exact += np.log(sum(integrate.quad(integrand, a, b, epsrel=1e-12, limit=500)[0]
                            for a, b in [(0, 1), (1, 20), (20, np.inf)]))
    est = integrated_likelihood(Y, X, beta, L, sigma2, np.array([v]), R=10_000, rng=rng)
    is_ok = abs(est.log_value - exact) <= 3 * est.se

    # DIC identity and cross-entropy ESS on a fitted posterior
    data = generate_dgp(200, "t", rng_stream(4, 0), L=rng.choice([-1.0, 1.0], size=(5, 1)))
    spec = ModelSpec(5, 0, 1, 200, sampler=SamplerSettings(burn_in=300, draws=300, seed=4))
    post = run_chain(spec, data.design(0))
    res = compute_dic(post, R=200, rng=rng_stream(4, 1), stride=3)
    identity_ok = res.dic == 2.0 * res.d_bar - res.d_hat
    fam = fit_importance_density(post.W)
    d = post.design
    args = (d.Y, d.X, post.beta.mean(0), post.L.mean(0), post.sigma2.mean(0), post.v.mean(0))
    ce = integrated_likelihood(*args, fam, R=500, rng=rng_stream(4, 2))
    pr = integrated_likelihood(*args, None, R=500, rng=rng_stream(4, 2))
    ok = is_ok and identity_ok and ce.ess > pr.ess
    verdict(4, ok, f"IS {est.log_value:.5f} vs quadrature {exact:.5f} (se {est.se:.5f}); "
                   f"DIC identity {'exact' if identity_ok else 'broken'}; ESS CE {ce.ess:.1f} > prior {pr.ess:.1f}")


# -- 5. Model selection -----------------------------------------------------------------

SELECTION = {"n": 8, "T": 500, "true_r": 2, "r_list": [1, 2, 3, 4], "seeds": 20,
             "burn_in": 1000, "draws": 1000, "R": 200, "stride": 5}


def selection_seed(seed):
    cfg = SELECTION
    rng = rng_stream(seed, 0)
    L = rng.choice([-1.0, 1.0], size=(cfg["n"], cfg["true_r"]))
    data = generate_dgp(cfg["T"], "t", rng, L=L)
    out = {}
    for r in cfg["r_list"]:
        settings = SamplerSettings(burn_in=cfg["burn_in"], draws=cfg["draws"], store_hyper=False,
                                   rescale_factors=True)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            spec = ModelSpec(cfg["n"], 0, r, cfg["T"], sampler=settings, unit_variance_factors=True,
                             allow_large_r=True)
        post = run_chain(spec, data.design(0), rng_stream(seed, r))
        out[r] = compute_dic(post, R=cfg["R"], rng=rng_stream(seed, 10 + r), stride=cfg["stride"]).dic
    return out


def test_criterion_05_dic_selects_true_r():
    def compute():
        from joblib import Parallel, delayed
        runs = Parallel(n_jobs=-1)(delayed(selection_seed)(s) for s in range(SELECTION["seeds"]))
        return [{str(r): v for r, v in run.items()} for run in runs]
    runs = cached("selection", SELECTION, compute)
    picks = [int(min(run, key=run.get)) for run in runs]
    hits = sum(p == SELECTION["true_r"] for p in picks)
    share = hits / len(picks)
    verdict(5, share >= 0.9, f"r=2 selected in {hits}/{len(picks)} seeds (picks {picks})")


# -- 6. Rotation demo -------------------------------------------------------------------

def test_criterion_06_rotation_demo():
    t = rotation_demo("t", np.pi / 5, 1_000_000, rng_stream(6, 0))
    g = rotation_demo("gaussian", np.pi / 5, 1_000_000, rng_stream(6, 1))
    keys = ("corr_before", "corr_sq_before", "corr_after", "corr_sq_after")
    ok = abs(t["corr_sq_before"]) < 0.01 and t["corr_sq_after"] > 0.05 and all(abs(g[k]) < 0.01 for k in keys)
    verdict(6, ok, f"t(4): corr_sq {t['corr_sq_before']:+.4f} -> {t['corr_sq_after']:+.4f}; "
                   f"gaussian max |stat| {max(abs(g[k]) for k in keys):.4f}")


# -- 7. Normalisation group property ----------------------------------------------------

def test_criterion_07_normalization_group_property():
    rng = np.random.default_rng(7)
    L = rng.normal(size=(10, 3))
    template = L + 0.5 * rng.normal(size=L.shape)
    base = normalize_draw(L, template=template)[0]
    equal = 0
    for _ in range(50):
        Q = SignedPermutation(tuple(rng.permutation(3)), tuple(rng.choice([-1, 1], size=3)))
        assert np.array_equal(Q.apply(L), L @ Q.matrix())
        equal += np.array_equal(normalize_draw(L @ Q.matrix(), template=template)[0], base)
    verdict(7, equal == 50, f"{equal}/50 signed permutations normalise to the same matrix")


# -- 8. Independence diagnostics --------------------------------------------------------

def test_criterion_08_independence_diagnostics():
    rng = rng_stream(8, 0)
    draws, T = 300, 1000
    ind = rng.standard_t(5, size=(draws, T, 3))
    vol = np.exp(0.8 * rng.standard_normal((draws, T, 1)))
    dep = vol * rng.standard_normal((draws, T, 3))
    a = independence_stats(ind, rng_stream(8, 1), distance=False)
    b = independence_stats(dep, rng_stream(8, 2), distance=False)
    ks = stats.ks_2samp(a.S, a.S0).pvalue
    med, q99 = np.median(b.S), np.quantile(b.S0, 0.99)
    verdict(8, ks > 0.01 and med > q99,
            f"independent: KS p {ks:.3f}; shared volatility: median S {med:.3f} vs 99% S0 {q99:.3f}")


# -- 9. Restrictions --------------------------------------------------------------------

def test_criterion_09_restrictions():
    rng = rng_stream(9, 0)
    L = rng.choice([-1.0, 1.0], size=(6, 2))
    L[0, 1] = 0.0
    data = generate_dgp(300, "t", rng, L=L)
    design = data.design(0)
    spec = ModelSpec(6, 0, 2, 300, sampler=SamplerSettings(burn_in=200, draws=300, seed=9))
    rs = RestrictionSet(zeros={(0, 1), (4, 0)}, signs={(1, 0): int(np.sign(L[1, 0])), (2, 1): int(np.sign(L[2, 1]))})
    post = run_chain(spec, design, restrictions=rs)
    zeros_ok = np.all(post.L[:, 0, 1] == 0.0) and np.all(post.L[:, 4, 0] == 0.0)
    signs_ok = all(np.all(np.sign(post.L[:, i, j]) == s) for (i, j), s in rs.signs.items())
    a = run_chain(spec, design)
    b = run_chain(spec, design, restrictions=RestrictionSet())
    same = all(np.array_equal(getattr(a, k), getattr(b, k)) for k in ("beta", "L", "sigma2", "v", "f", "W"))
    verdict(9, zeros_ok and signs_ok and same,
            f"zeros exact: {zeros_ok}; signs hold: {signs_ok}; empty set draw-for-draw: {same}")


# -- 10. IRF contract -------------------------------------------------------------------

def test_criterion_10_irf_contract():
    rng = rng_stream(10, 0)
    n, p, r, H = 4, 3, 2, 24
    B = [0.5 / (j + 1) * rng.normal(size=(n, n)) / np.sqrt(n) for j in range(p)]
    coef = VarCoefficients.from_blocks(rng.normal(size=n), B)
    L = rng.normal(size=(n, r))
    irf = compute_irf(coef.matrix, L, H, p)
    # propagate a unit impulse through the companion form
    comp = coef.companion()
    sim_err = 0.0
    for j in range(r):
        state = np.zeros(n * p)
        state[:n] = L[:, j]
        for h in range(H + 1):
            sim_err = max(sim_err, np.abs(state[:n] - irf[:, j, h]).max())
            state = comp @ state
    y = np.zeros((201, n))
    for t in range(1, 201):
        y[t] = 0.4 * y[t - 1] + L @ rng.standard_t(5, size=r) + 0.3 * rng.normal(size=n)
    Yd, Xd = build_design(y, p)
    design = Design(Yd, Xd, p, ("a", "FEDFUNDS", "c", "d"), n)
    spec = ModelSpec(n, p, 1, design.T, sampler=SamplerSettings(burn_in=100, draws=200, seed=10))
    post = run_chain(spec, design)
    res = compute_irfs(post, 12, ("FEDFUNDS", 0.25))
    impact_ok = bool(np.all(res.responses[:, 1, :, 0] == 0.25))
    verdict(10, impact_ok and sim_err < 1e-10,
            f"impact == 0.25 in all {len(post)} draws: {impact_ok}; companion vs simulation max err {sim_err:.1e}")
