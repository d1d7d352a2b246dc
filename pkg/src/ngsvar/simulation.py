"""Monte Carlo harness for the frequentist properties of the estimator on the
factor-model DGP y_t = L f_t + v_t, v_t ~ N(0, I)."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import DomainError, NgsvarError
from .gibbs import run_chain
from .kernels import rng_stream
from .model import Design, ModelSpec, SamplerSettings
from .pearson import Pearson

log = logging.getLogger(__name__)

# Transposed loadings of the 14-variable, 3-factor design (rows are factors).
DGP_LOADINGS_T = np.array([
    [0, 1, 1, 1, 1, -1, -1, 1, 1, 1, 1, 1, 1, 1],
    [1, 1, 1, -1, -1, 1, -1, -1, -1, 1, -1, 1, 1, 1],
    [-1, -1, -1, -1, -1, 1, -1, -1, -1, 1, -1, 1, -1, -1],
], dtype=float)
DGP_LOADINGS = DGP_LOADINGS_T.T
REPORTED = ((0, 0), (1, 0), (2, 0), (3, 0))


def parameter_label(cell) -> str:
    return f"l_{cell[0] + 1},{cell[1] + 1}"


def draw_factors(T: int, r: int, distribution: str, rng, df: float = 4.0) -> np.ndarray:
    """i.i.d. unit-variance factors: ``"t"`` (Student-t with ``df``) or
    ``"pearson"`` (skewness 0.68, excess kurtosis 15) or ``"gaussian"``."""
    if distribution == "t":
        if df <= 2:
            raise DomainError("t factors need df > 2 for unit variance")
        return rng.standard_t(df, size=(T, r)) * np.sqrt((df - 2.0) / df)
    if distribution == "pearson":
        return Pearson(0.68, 15.0).rvs(rng, size=T * r).reshape(T, r)
    if distribution == "gaussian":
        return rng.standard_normal((T, r))
    raise DomainError(f"unknown factor distribution {distribution!r}")


@dataclass
class SimulatedData:
    Y: np.ndarray
    f: np.ndarray
    L: np.ndarray
    noise_var: np.ndarray

    def design(self, p: int = 0) -> Design:
        """Estimation design; with ``p = 0`` only an intercept enters."""
        from .model import build_design

        n = self.Y.shape[1]
        Y, X = build_design(self.Y, p)
        return Design(Y, X, p, tuple(f"y{i + 1}" for i in range(n)), n)


def generate_dgp(T: int, distribution: str = "t", rng=None, L=None, noise_var=1.0) -> SimulatedData:
    """Draw one data set of length ``T`` from y_t = L f_t + v_t."""
    if T < 1:
        raise DomainError("T must be positive")
    rng = np.random.default_rng() if rng is None else rng
    L = DGP_LOADINGS if L is None else np.asarray(L, dtype=float)
    n, r = L.shape
    f = draw_factors(T, r, distribution, rng)
    sig = np.broadcast_to(np.asarray(noise_var, dtype=float), (n,))
    Y = f @ L.T + rng.standard_normal((T, n)) * np.sqrt(sig)
    return SimulatedData(Y, f, L, np.array(sig))


@dataclass
class MonteCarloConfig:
    replications: int = 200
    T: int = 1000
    distribution: str = "t"
    loadings: np.ndarray = None
    sampler: SamplerSettings = field(default_factory=lambda: SamplerSettings(
        burn_in=1000, draws=2000, store_latent=False, store_hyper=False, rescale_factors=True))
    seed: int = 0
    p: int = 0
    band: float = 0.68
    parameters: tuple = REPORTED
    unit_variance_factors: bool = True
    oracle: bool = False
    jobs: int = 1

    def __post_init__(self):
        if self.replications < 1:
            raise DomainError("replications must be >= 1")
        if self.distribution not in ("t", "pearson", "gaussian"):
            raise DomainError(f"unknown factor distribution {self.distribution!r}")
        if self.loadings is None:
            self.loadings = DGP_LOADINGS
        if self.distribution == "pearson":
            Pearson(0.68, 15.0)  # feasibility check


@dataclass
class MonteCarloReport:
    parameters: list
    truth: np.ndarray
    bias: np.ndarray
    mse: np.ndarray
    length: np.ndarray
    coverage: np.ndarray
    replications: int
    failures: int = 0
    coverage_defined: bool = True
    config: Optional[MonteCarloConfig] = None
    estimates: Optional[np.ndarray] = None

    def rows(self) -> list:
        return [
            {"parameter": name, "truth": float(t), "bias": float(b), "mse": float(m),
             "length": float(ln), "coverage": float(c)}
            for name, t, b, m, ln, c in zip(self.parameters, self.truth, self.bias, self.mse,
                                            self.length, self.coverage)
        ]

    def bias_se(self) -> np.ndarray:
        """Monte Carlo standard error of the bias."""
        err = self.estimates - self.truth
        return err.std(axis=0, ddof=1) / np.sqrt(err.shape[0])


def _one_replication(config: MonteCarloConfig, rep: int):
    rng = rng_stream(config.seed, rep)
    data = generate_dgp(config.T, config.distribution, rng, L=config.loadings)
    truth = np.array([config.loadings[i, j] for i, j in config.parameters])
    if config.oracle:
        return truth, truth.copy(), truth.copy()
    n, r = config.loadings.shape
    spec = ModelSpec(n, config.p, r, config.T - config.p, sampler=config.sampler,
                     unit_variance_factors=config.unit_variance_factors,
                     allow_large_r=r > (n - 1) / 2)
    post = run_chain(spec, data.design(config.p), rng, template=config.loadings, normalize="template")
    draws = np.stack([post.L[:, i, j] for i, j in config.parameters], axis=1)
    tail = (1.0 - config.band) / 2.0
    lo, hi = np.quantile(draws, [tail, 1.0 - tail], axis=0)
    return draws.mean(axis=0), lo, hi


def run_monte_carlo(config: MonteCarloConfig, progress=None) -> MonteCarloReport:
    """Generate, estimate and score ``config.replications`` data sets.

    Replication ``k`` uses the stream ``(seed, k)`` for both data and chain,
    so results do not depend on the number of workers.
    """
    reps = range(config.replications)
    if config.jobs != 1:
        from joblib import Parallel, delayed

        results = Parallel(n_jobs=config.jobs)(
            delayed(_safe_replication)(config, k) for k in reps)
    else:
        results = []
        for k in reps:
            results.append(_safe_replication(config, k))
            if progress is not None:
                progress(k)
    ok = [res for res in results if res is not None]
    failures = len(results) - len(ok)
    truth = np.array([config.loadings[i, j] for i, j in config.parameters])
    if not ok:
        raise NgsvarError("every replication failed")
    est = np.array([m for m, _, _ in ok])
    lo = np.array([a for _, a, _ in ok])
    hi = np.array([b for _, _, b in ok])
    err = est - truth
    length = (hi - lo).mean(axis=0)
    if config.oracle:
        coverage = np.full(truth.size, np.nan)
    else:
        coverage = ((lo <= truth) & (truth <= hi)).mean(axis=0)
    return MonteCarloReport(
        parameters=[parameter_label(c) for c in config.parameters],
        truth=truth, bias=err.mean(axis=0), mse=(err**2).mean(axis=0), length=length,
        coverage=coverage, replications=len(ok), failures=failures,
        coverage_defined=not config.oracle, config=config, estimates=est,
    )


def _safe_replication(config, k):
    try:
        return _one_replication(config, k)
    except NgsvarError as exc:
        log.warning("replication %d failed: %s", k, exc)
        return None
