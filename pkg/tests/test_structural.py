import numpy as np
import pytest

from conftest import small_var_design
from ngsvar.errors import DomainError, NormalizationError, NotApplicableError
from ngsvar.gibbs import PosteriorSample, run_chain
from ngsvar.model import ModelSpec, SamplerSettings, ScaleInfo, VarCoefficients
from ngsvar.structural import (
    compute_irf,
    compute_irfs,
    distance_covariance,
    distance_covariance_stat,
    independence_stats,
    label_shocks,
    nongaussianity_posteriors,
    rank_transform,
    squared_correlation_stat,
)


def random_var(rng, n, p, r):
    B = [0.4 / (j + 1) * rng.normal(size=(n, n)) / np.sqrt(n) for j in range(p)]
    beta = VarCoefficients.from_blocks(rng.normal(size=n), B).matrix
    return beta, rng.normal(size=(n, r))


def simulate_impulse(beta, L, H, p, shock):
    """Feed a unit shock through y_t = sum_j B_j y_{t-j} from zero history."""
    n = L.shape[0]
    B = VarCoefficients(beta).B
    y = np.zeros((H + 1 + p, n))
    y[p] = L[:, shock]
    for t in range(p + 1, H + 1 + p):
        y[t] = sum(B[j] @ y[t - 1 - j] for j in range(p))
    return y[p:].T


def test_irf_of_a_static_model_is_the_impact_matrix():
    L = np.array([[1.0, 0.5], [-0.3, 2.0]])
    irf = compute_irf(np.zeros((2, 1)), L, 3, 0)
    assert np.array_equal(irf[:, :, 0], L)
    assert np.all(irf[:, :, 1:] == 0)


def test_irf_of_a_var1_is_powers_of_b():
    rng = np.random.default_rng(0)
    beta, L = random_var(rng, 3, 1, 2)
    B = beta[:, 1:]
    irf = compute_irf(beta, L, 5, 1)
    for h in range(6):
        assert np.allclose(irf[:, :, h], np.linalg.matrix_power(B, h) @ L, atol=1e-12)


@pytest.mark.parametrize("p", [1, 2, 4])
def test_irf_recursion_matches_impulse_simulation(p):
    rng = np.random.default_rng(p)
    beta, L = random_var(rng, 4, p, 3)
    irf = compute_irf(beta, L, 20, p)
    for j in range(3):
        assert np.allclose(irf[:, j, :], simulate_impulse(beta, L, 20, p, j), atol=1e-10)


def test_irf_normalization_and_destandardization():
    rng = np.random.default_rng(1)
    beta, L = random_var(rng, 3, 2, 2)
    sd = np.array([2.0, 0.5, 3.0])
    irf = compute_irf(beta, L, 4, 2, ("b", 0.25), sd=sd, names=("a", "b", "c"))
    assert np.all(irf[1, :, 0] == 0.25)
    raw = compute_irf(beta, L, 4, 2, sd=sd)
    assert np.allclose(irf / irf[:, :, :1][1:2], raw / raw[:, :, :1][1:2])
    only = compute_irf(beta, L, 4, 2, (1, 0.25), shock=1)
    assert only[1, 1, 0] == 0.25 and np.allclose(only[:, 0], compute_irf(beta, L, 4, 2)[:, 0])
    L0 = L.copy()
    L0[1, 0] = 0.0
    with pytest.raises(NormalizationError):
        compute_irf(beta, L0, 4, 2, (1, 0.25))
    with pytest.raises(NormalizationError):
        compute_irf(beta, L, 4, 2, ("zz", 1.0), names=("a", "b", "c"))
    with pytest.raises(DomainError):
        compute_irf(beta, L, -1, 2)


@pytest.fixture(scope="module")
def posterior():
    design = small_var_design(T=90, n=4, p=1, seed=8)
    design.scale = ScaleInfo(np.zeros(4), np.array([1.0, 2.0, 0.5, 1.0]))
    spec = ModelSpec(4, 1, 1, design.T, sampler=SamplerSettings(burn_in=50, draws=60, seed=3))
    return run_chain(spec, design)


def test_compute_irfs_bands(posterior):
    res = compute_irfs(posterior, 8, ("y2", 0.25))
    assert res.responses.shape == (60, 4, 1, 9)
    assert np.all(res.responses[:, 2, 0, 0] == 0.25)
    assert np.all(res.band(0.16) <= res.band(0.5)) and np.all(res.band(0.5) <= res.band(0.84))
    assert res.names == ("y0", "y1", "y2", "y3")


def test_label_shocks_selects_the_correlated_factor():
    rng = np.random.default_rng(0)
    F = rng.normal(size=(30, 200, 3))
    proxy = F[0, :, 1] + 0.5 * rng.normal(size=200)
    F[:, :, 1] = F[0, :, 1] + 0.1 * rng.normal(size=(30, 200))
    post = PosteriorSample(np.zeros((30, 2, 1)), rng.normal(size=(30, 2, 3)), np.ones((30, 2)),
                           np.full((30, 3), 5.0), f=F)
    rep = label_shocks(post, proxy, narrative_dates=[(4, 1), (7, -1)])
    assert rep.selected == 1 and not rep.weak
    assert rep.narrative.shape == (30, 2, 3)
    out = rep.summary()
    assert out["selected_factor"] == 1 and len(out["narrative"]) == 2
    weak = label_shocks(post, rng.normal(size=200), weak_threshold=0.5)
    assert weak.weak
    with pytest.raises(DomainError):
        label_shocks(post, np.ones(200))


def test_nongaussianity_posteriors():
    rng = np.random.default_rng(0)
    F = np.stack([rng.exponential(size=(20, 50_000)) - 1, rng.normal(size=(20, 50_000))], axis=2)
    res = nongaussianity_posteriors(F)
    assert np.allclose(np.median(res["skewness"], 0), [2.0, 0.0], atol=0.15)
    assert np.allclose(np.median(res["kurtosis"], 0), [9.0, 3.0], atol=1.0)
    assert res["kurtosis_quantiles"].shape == (3, 2)


def test_squared_correlation_stat_extremes(rng):
    e = rng.standard_t(5, size=2000)
    assert squared_correlation_stat(np.column_stack([e, e, -e])) == pytest.approx(1.0)
    assert squared_correlation_stat(rng.normal(size=(5000, 3))) < 0.05
    with pytest.raises(NotApplicableError):
        squared_correlation_stat(rng.normal(size=(10, 1)))


def naive_dcov(x, y):
    x = np.atleast_2d(np.asarray(x).T).T
    y = np.atleast_2d(np.asarray(y).T).T
    n = len(x)
    a = np.array([[np.linalg.norm(x[i] - x[j]) for j in range(n)] for i in range(n)])
    b = np.array([[np.linalg.norm(y[i] - y[j]) for j in range(n)] for i in range(n)])
    total = 0.0
    for i in range(n):
        for j in range(n):
            A = a[i, j] - a[i].mean() - a[:, j].mean() + a.mean()
            B = b[i, j] - b[i].mean() - b[:, j].mean() + b.mean()
            total += A * B
    return total / n**2


def test_distance_covariance_matches_naive_formula(rng):
    x = rng.normal(size=30)
    y = np.column_stack([x**2 + rng.normal(size=30), rng.normal(size=30)])
    assert distance_covariance(x, y) == pytest.approx(naive_dcov(x, y), rel=1e-12)
    assert distance_covariance(x, x) > 0


def test_distance_covariance_stat_separates_dependence(rng):
    ind = rng.normal(size=(400, 3))
    vol = np.exp(rng.normal(size=(400, 1)))
    dep = vol * rng.normal(size=(400, 3))
    assert distance_covariance_stat(dep) > distance_covariance_stat(ind)
    assert np.allclose(np.sort(rank_transform(ind)[:, 0]), np.arange(1, 401) / 400)


def test_independence_stats_shapes_and_errors(rng):
    F = rng.normal(size=(5, 100, 3))
    res = independence_stats(F, rng)
    assert res.S.shape == res.S0.shape == res.U.shape == res.U0.shape == (5,)
    res2 = independence_stats(F, rng, distance=False)
    assert res2.U is None
    with pytest.raises(NotApplicableError):
        independence_stats(rng.normal(size=(2, 50, 1)))
