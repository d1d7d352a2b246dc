"""Random-variate kernels shared by the sampler, the DIC estimator and the
Monte Carlo harness.

Every sampler takes a :class:`numpy.random.Generator`. Use :func:`rng_stream`
to obtain reproducible, mutually independent generators for chains and
replications.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy import special

from .errors import DecompositionError, DegenerateDensityError, DomainError

# Bounds beyond which truncated-normal draws switch to the tail algorithm.
_TAIL_CUTOFF = 5.0


def rng_stream(seed: int, stream_id: int = 0) -> np.random.Generator:
    """Return the generator for ``(seed, stream_id)``.

    Distinct stream ids spawn statistically independent PCG64 streams from
    the same root seed.
    """
    if seed < 0 or stream_id < 0:
        raise DomainError("seed and stream_id must be non-negative")
    ss = np.random.SeedSequence(int(seed), spawn_key=(int(stream_id),))
    return np.random.Generator(np.random.PCG64(ss))


@dataclass(frozen=True)
class InverseGammaParams:
    """Inverse-gamma law with density proportional to x^-(shape+1) exp(-scale/x)."""

    shape: float
    scale: float

    def __post_init__(self):
        if not (self.shape > 0 and self.scale > 0):
            raise DomainError(
                f"inverse-gamma needs shape > 0 and scale > 0, got "
                f"({self.shape}, {self.scale})"
            )

    @property
    def mean(self) -> float:
        return self.scale / (self.shape - 1.0) if self.shape > 1 else np.inf

    def logpdf(self, x):
        return inverse_gamma_logpdf(x, self.shape, self.scale)

    def sample(self, rng: np.random.Generator, size=None):
        return sample_inverse_gamma(self.shape, self.scale, rng, size=size)


def sample_inverse_gamma(shape, scale, rng: np.random.Generator, size=None):
    """Draw from IG(shape, scale); broadcasts over array parameters."""
    shape = np.asarray(shape, dtype=float)
    scale = np.asarray(scale, dtype=float)
    if np.any(~(shape > 0)) or np.any(~(scale > 0)):
        raise DomainError("inverse-gamma parameters must be positive")
    if size is None:
        # one independent variate per broadcast element, not one shared draw
        size = np.broadcast_shapes(shape.shape, scale.shape) or None
    out = scale / rng.standard_gamma(shape, size=size)
    return out if np.ndim(out) else float(out)


def inverse_gamma_logpdf(x, shape, scale):
    x = np.asarray(x, dtype=float)
    with np.errstate(divide="ignore"):
        return (
            shape * np.log(scale)
            - special.gammaln(shape)
            - (shape + 1.0) * np.log(x)
            - scale / x
        )


@dataclass
class BlockPrecision:
    """Block-diagonal precision matrix stored as a ``(T, r, r)`` stack."""

    blocks: np.ndarray

    def __post_init__(self):
        self.blocks = np.asarray(self.blocks, dtype=float)
        if self.blocks.ndim != 3 or self.blocks.shape[1] != self.blocks.shape[2]:
            raise DomainError("blocks must have shape (T, r, r)")

    @property
    def n_blocks(self) -> int:
        return self.blocks.shape[0]

    @property
    def block_dim(self) -> int:
        return self.blocks.shape[1]

    def dense(self) -> np.ndarray:
        T, r = self.n_blocks, self.block_dim
        out = np.zeros((T * r, T * r))
        for t in range(T):
            out[t * r:(t + 1) * r, t * r:(t + 1) * r] = self.blocks[t]
        return out


def _batched_cholesky(blocks: np.ndarray) -> np.ndarray:
    try:
        return np.linalg.cholesky(blocks)
    except np.linalg.LinAlgError:
        for t, block in enumerate(blocks):
            try:
                np.linalg.cholesky(block)
            except np.linalg.LinAlgError:
                raise DecompositionError(
                    f"precision block {t} is not positive definite", index=t
                ) from None
        raise


def block_precision_moments(K: BlockPrecision, linear_term) -> tuple[np.ndarray, np.ndarray]:
    """Mean ``K^{-1} b`` and per-block covariances of N(K^{-1} b, K^{-1})."""
    T, r = K.n_blocks, K.block_dim
    b = np.asarray(linear_term, dtype=float).reshape(T, r)
    chol = _batched_cholesky(K.blocks)
    chol_inv = np.linalg.inv(chol)
    cov = np.matmul(np.swapaxes(chol_inv, 1, 2), chol_inv)
    mean = np.matmul(cov, b[..., None])[..., 0]
    return mean, cov


def sample_block_precision_normal(
    K: BlockPrecision, linear_term, rng: np.random.Generator
) -> np.ndarray:
    """Exact draw from N(K^{-1} b, K^{-1}) for block-diagonal K.

    Returns a ``(T, r)`` array; row t is the draw for block t. Cost is
    O(T r^3); the dense ``T r x T r`` matrix is never formed.
    """
    T, r = K.n_blocks, K.block_dim
    b = np.asarray(linear_term, dtype=float)
    if b.size != T * r:
        raise DomainError(f"linear term has {b.size} entries, expected {T * r}")
    b = b.reshape(T, r)
    if r == 1:
        prec = K.blocks[:, 0, 0]
        if np.any(~(prec > 0)):
            t = int(np.flatnonzero(~(prec > 0))[0])
            raise DecompositionError(f"precision block {t} is not positive definite", index=t)
        z = rng.standard_normal(T)
        return (b[:, 0] / prec + z / np.sqrt(prec))[:, None]
    # Jacobi scaling: factor D^{-1/2} K D^{-1/2}, which keeps the Cholesky
    # accurate when the block's diagonal spans many orders of magnitude.
    d = np.sqrt(np.diagonal(K.blocks, axis1=1, axis2=2))
    if np.any(~(d > 0)):
        t = int(np.flatnonzero(~np.all(d > 0, axis=1))[0])
        raise DecompositionError(f"precision block {t} is not positive definite", index=t)
    scaled = K.blocks / (d[:, :, None] * d[:, None, :])
    chol = _batched_cholesky(scaled)
    chol_inv = np.linalg.inv(chol)
    chol_inv_t = np.swapaxes(chol_inv, 1, 2)
    # K^{-1} b = D^{-1/2} L^{-T} L^{-1} D^{-1/2} b; adding z before the back
    # substitution gives covariance K^{-1}.
    w = np.matmul(chol_inv, (b / d)[..., None])
    z = rng.standard_normal((T, r, 1))
    return np.matmul(chol_inv_t, w + z)[..., 0] / d


def griddy_draw(grid: np.ndarray, log_density: np.ndarray, rng: np.random.Generator) -> float:
    """Discrete inverse-transform draw on a precomputed grid."""
    log_density = np.asarray(log_density, dtype=float)
    top = np.max(log_density)
    if not np.isfinite(top):
        raise DegenerateDensityError("log-density is -inf (or nan) at every grid point")
    weights = np.exp(log_density - top)
    cdf = np.cumsum(weights)
    cdf /= cdf[-1]
    u = rng.random()
    q = int(np.searchsorted(cdf, u, side="left"))
    return float(grid[min(q, len(grid) - 1)])


def sample_griddy(
    log_density: Callable[[np.ndarray], np.ndarray],
    a: float,
    b: float,
    grid_size: int,
    rng: np.random.Generator,
) -> float:
    """Griddy-Gibbs draw from a univariate density on ``[a, b]``.

    The density is tabulated up to a constant on ``grid_size`` equally spaced
    points with ``v_1 = a`` and ``v_n = b``; the returned value is the
    smallest grid point whose cumulative weight reaches a uniform draw.
    ``log_density`` must accept an array of grid points.
    """
    if not a < b:
        raise DomainError(f"griddy interval needs a < b, got ({a}, {b})")
    if grid_size < 2:
        raise DomainError("grid_size must be at least 2")
    grid = np.linspace(a, b, grid_size)
    return griddy_draw(grid, log_density(grid), rng)


def _tail_normal(lo, hi, rng):
    """Standard normal restricted to (lo, hi) with lo >= _TAIL_CUTOFF.

    Exponential-proposal rejection with the optimal rate; for narrow windows a
    uniform proposal on (lo, hi) is used instead.
    """
    out = np.empty(lo.shape)
    pending = np.ones(lo.shape, dtype=bool)
    rate = 0.5 * (lo + np.sqrt(lo * lo + 4.0))
    narrow = (hi - lo) < 1.0 / lo
    while pending.any():
        idx = np.flatnonzero(pending)
        a, b, lam = lo[idx], hi[idx], rate[idx]
        nar = narrow[idx]
        u = rng.random(idx.size)
        z = np.where(nar, a + (np.minimum(b, a + 1e300) - a) * rng.random(idx.size),
                     a + rng.exponential(size=idx.size) / lam)
        log_acc = np.where(nar, 0.5 * (a * a - z * z), -0.5 * (z - lam) ** 2)
        ok = (np.log(u) <= log_acc) & (z < b)
        out[idx[ok]] = z[ok]
        pending[idx[ok]] = False
    return out


def sample_truncated_normal(mean, sd, lower, upper, rng: np.random.Generator, size=None):
    """Draw from N(mean, sd^2) conditioned on (lower, upper).

    Broadcasts over array arguments. Intervals lying at least five standard
    deviations from the mean use rejection from an exponential envelope; the
    rest use inverse-CDF sampling on the side of the mean that keeps the
    complementary probabilities well conditioned.
    """
    mean, sd, lower, upper = np.broadcast_arrays(
        *(np.asarray(v, dtype=float) for v in (mean, sd, lower, upper))
    )
    if size is not None:
        shape = (size,) if np.isscalar(size) else tuple(size)
        mean, sd, lower, upper = (np.broadcast_to(v, shape) for v in (mean, sd, lower, upper))
    if np.any(~(sd > 0)):
        raise DomainError("truncated normal needs sd > 0")
    if np.any(~(lower < upper)):
        raise DomainError("truncated normal needs lower < upper")
    alpha = (lower - mean) / sd
    beta = (upper - mean) / sd
    z = np.empty(alpha.shape)

    right_tail = alpha >= _TAIL_CUTOFF
    left_tail = beta <= -_TAIL_CUTOFF
    body = ~(right_tail | left_tail)

    if right_tail.any():
        z[right_tail] = _tail_normal(alpha[right_tail], beta[right_tail], rng)
    if left_tail.any():
        z[left_tail] = -_tail_normal(-beta[left_tail], -alpha[left_tail], rng)
    if body.any():
        a, b = alpha[body], beta[body]
        u = rng.random(a.shape)
        upper_side = a > 0
        za = np.empty(a.shape)
        # Survival-function form on the right of the mean avoids cancellation.
        sa, sb = special.ndtr(-a[upper_side]), special.ndtr(-b[upper_side])
        za[upper_side] = -special.ndtri(sa - u[upper_side] * (sa - sb))
        fa, fb = special.ndtr(a[~upper_side]), special.ndtr(b[~upper_side])
        za[~upper_side] = special.ndtri(fa + u[~upper_side] * (fb - fa))
        z[body] = np.clip(za, a, b)
    out = mean + sd * z
    out = np.clip(out, np.nextafter(lower, np.inf), np.nextafter(upper, -np.inf))
    return out if out.ndim else float(out)
