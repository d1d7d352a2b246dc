import numpy as np
import pytest
from scipy import stats

from conftest import small_var_design
from ngsvar.errors import DimensionError, RestrictionError
from ngsvar.gibbs import run_chain
from ngsvar.model import ModelSpec, SamplerSettings
from ngsvar.restrictions import (
    ProxySpec,
    RestrictionSet,
    apply_sign_restrictions,
    apply_zero_restrictions,
    augment_with_proxy,
    embed,
)


def test_from_config_translates_names_and_kinds():
    rs = RestrictionSet.from_config(
        [{"variable": "b", "factor": 2, "kind": "zero"}, {"variable": "a", "factor": 1, "kind": "+"},
         {"variable": "c", "factor": 1, "kind": "negative"}], ["a", "b", "c"])
    assert rs.zeros == {(1, 1)}
    assert rs.signs == {(0, 0): 1, (2, 0): -1}
    assert rs.sign_matrix(3, 2).tolist() == [[1, 0], [0, 0], [-1, 0]]
    assert rs.free_mask(3, 2).tolist() == [[True, True], [True, False], [True, True]]
    with pytest.raises(RestrictionError):
        RestrictionSet.from_config([{"variable": "z", "factor": 1, "kind": "zero"}], ["a"])
    with pytest.raises(RestrictionError):
        RestrictionSet.from_config([{"variable": "a", "factor": 1, "kind": "maybe"}], ["a"])


def test_conflicting_and_out_of_range_restrictions():
    with pytest.raises(RestrictionError):
        RestrictionSet(zeros={(0, 0)}, signs={(0, 0): 1})
    with pytest.raises(RestrictionError):
        RestrictionSet(signs={(0, 0): 2})
    with pytest.raises(RestrictionError):
        RestrictionSet(zeros={(5, 0)}).validate(3, 2)
    assert RestrictionSet().empty


def test_zero_restriction_drops_columns():
    Z = np.arange(12.0).reshape(2, 6)
    rs = RestrictionSet(zeros={(1, 0), (1, 2)})
    Zi, m, V, keep = apply_zero_restrictions(1, Z, np.arange(6.0), np.ones(6), rs, k=3)
    assert keep.tolist() == [0, 1, 2, 4]
    assert np.array_equal(Zi, Z[:, keep]) and m.tolist() == [0, 1, 2, 4]
    assert embed(np.ones(4), keep, 6).tolist() == [1, 1, 1, 0, 1, 0]
    with pytest.warns(UserWarning, match="all loadings"):
        apply_zero_restrictions(0, Z, np.zeros(6), np.ones(6), RestrictionSet(zeros={(0, 0), (0, 1), (0, 2)}), 3)


def test_sign_restricted_gibbs_kernel_targets_the_truncated_law():
    rng = np.random.default_rng(0)
    mean = np.array([0.3, -0.2])
    cov = np.array([[1.0, 0.6], [0.6, 2.0]])
    K = np.linalg.inv(cov)
    theta = np.array([0.5, 0.0])
    draws = []
    for _ in range(6000):
        theta = apply_sign_restrictions(mean, K, [1, 0], theta, rng, sweeps=1)
        draws.append(theta.copy())
    draws = np.array(draws)[500:]
    assert np.all(draws[:, 0] > 0)
    # the marginal of the restricted coordinate is a truncated normal
    a = -mean[0]
    target = stats.truncnorm(a, np.inf, loc=mean[0], scale=1.0)
    assert stats.kstest(draws[::5, 0], target.cdf).pvalue > 1e-3
    with pytest.raises(RestrictionError):
        apply_sign_restrictions(mean, K, [0, 0], theta, rng)


@pytest.fixture(scope="module")
def design():
    return small_var_design(T=80, n=5, p=1, seed=3)


def _spec(design, seed=9):
    return ModelSpec(5, 1, 2, design.T, sampler=SamplerSettings(burn_in=30, draws=40, seed=seed))


def test_restricted_chain_respects_zeros_and_signs(design):
    rs = RestrictionSet(zeros={(0, 1), (3, 0)}, signs={(1, 0): 1, (2, 1): -1})
    post = run_chain(_spec(design), design, restrictions=rs)
    assert np.all(post.L[:, 0, 1] == 0.0) and np.all(post.L[:, 3, 0] == 0.0)
    assert np.all(post.L[:, 1, 0] > 0) and np.all(post.L[:, 2, 1] < 0)
    assert post.meta["normalization"] == "signs"


def test_empty_restriction_set_reproduces_unrestricted_chain(design):
    a = run_chain(_spec(design), design)
    b = run_chain(_spec(design), design, restrictions=RestrictionSet())
    for name in ("beta", "L", "sigma2", "v", "f", "W"):
        assert np.array_equal(getattr(a, name), getattr(b, name))


def test_augment_with_proxy_builds_the_extra_equation(design):
    rng = np.random.default_rng(0)
    proxy = ProxySpec(rng.normal(size=design.T), target=1, name="m")
    aug, rs = augment_with_proxy(design, proxy, RestrictionSet(), r=3)
    assert aug.n_eq == design.n_eq + 1 and aug.n_var == design.n_var
    assert aug.names[-1] == "m"
    assert aug.x_mask[-1].tolist() == [True] + [False] * (design.k - 1)
    assert rs.zeros == {(5, 0), (5, 2)}
    assert aug.Y[:, -1].std(ddof=1) == pytest.approx(1.0)
    _, loose = augment_with_proxy(design, ProxySpec(proxy.series, exogeneity=False), r=3)
    assert not loose.zeros
    with pytest.raises(DimensionError):
        augment_with_proxy(design, ProxySpec(np.ones(3)), r=2)
    with pytest.raises(DimensionError):
        augment_with_proxy(design, ProxySpec(np.ones(design.T)), r=2)


def test_chain_with_proxy_equation_runs(design):
    rng = np.random.default_rng(1)
    aug, rs = augment_with_proxy(design, ProxySpec(rng.normal(size=design.T)), r=2)
    post = run_chain(_spec(design), aug, restrictions=rs)
    assert post.L.shape == (40, 6, 2)
    assert np.all(post.L[:, 5, 1] == 0.0)
    assert np.all(post.beta[:, 5, 1:] == 0.0)
