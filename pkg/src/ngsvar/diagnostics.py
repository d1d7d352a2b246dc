"""Chain diagnostics: effective sample size and trace summaries."""
from __future__ import annotations

import numpy as np


def autocorrelation(x) -> np.ndarray:
    """Sample autocorrelation at all lags via FFT (biased normalisation)."""
    x = np.asarray(x, dtype=float)
    n = x.size
    x = x - x.mean()
    var = x @ x
    if var == 0 or n < 2:
        out = np.zeros(n)
        if n:
            out[0] = 1.0
        return out
    size = 1 << (2 * n - 1).bit_length()
    spec = np.fft.rfft(x, size)
    acov = np.fft.irfft(spec * np.conjugate(spec), size)[:n]
    return acov / acov[0]


def effective_sample_size(x) -> float:
    """ESS with Geyer's initial monotone positive-sequence truncation."""
    x = np.asarray(x, dtype=float)
    n = x.size
    if n < 4:
        return float(n)
    if np.ptp(x) == 0:
        return float(n)
    rho = autocorrelation(x)
    pairs = rho[: 2 * ((n - 1) // 2)].reshape(-1, 2).sum(axis=1)
    # keep the initial positive run, then force it non-increasing
    neg = np.flatnonzero(pairs <= 0)
    m = neg[0] if neg.size else pairs.size
    gamma = np.minimum.accumulate(pairs[:m])
    tau = -1.0 + 2.0 * gamma.sum()
    return float(n / max(tau, 1.0 / np.log10(max(n, 10))))


def ess_array(draws) -> np.ndarray:
    """ESS of every scalar series in ``draws`` (draw axis first)."""
    draws = np.asarray(draws, dtype=float)
    flat = draws.reshape(draws.shape[0], -1)
    return np.array([effective_sample_size(flat[:, j]) for j in range(flat.shape[1])]).reshape(
        draws.shape[1:]
    )


def trace_summary(draws) -> dict:
    draws = np.asarray(draws, dtype=float)
    ess = ess_array(draws)
    return {
        "mean": draws.mean(axis=0),
        "sd": draws.std(axis=0, ddof=1) if draws.shape[0] > 1 else np.zeros(draws.shape[1:]),
        "ess": ess,
        "min_ess": float(np.min(ess)) if ess.size else float("nan"),
    }
