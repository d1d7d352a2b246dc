import numpy as np
import pytest

from ngsvar.gibbs import GibbsModel, initial_state
from ngsvar.model import Design, ModelSpec, SamplerSettings, build_design


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def small_var_design(T=60, n=3, p=1, seed=0):
    """Design from a stable VAR(p) with one t factor."""
    g = np.random.default_rng(seed)
    L = g.normal(size=(n, 1))
    y = np.zeros((T + p, n))
    for t in range(p, T + p):
        y[t] = 0.4 * y[t - 1] + L[:, 0] * g.standard_t(5) + 0.5 * g.standard_normal(n)
    Y, X = build_design(y, p)
    return Design(Y, X, p, tuple(f"y{i}" for i in range(n)), n)


def make_model(T=40, n=3, p=1, r=1, seed=0, **spec_kw):
    design = small_var_design(T, n, p, seed)
    spec = ModelSpec(n, p, r, design.T, sampler=SamplerSettings(burn_in=0, draws=1), **spec_kw)
    model = GibbsModel(spec, design)
    state = initial_state(model, np.random.default_rng(seed))
    return model, state


def pytest_terminal_summary(terminalreporter):
    """Repeat the acceptance verdicts at the end of the run."""
    import sys

    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(mod.RESULTS):
        terminalreporter.write_line(mod.RESULTS[number])
