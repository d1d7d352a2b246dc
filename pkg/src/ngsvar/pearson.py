"""Pearson-system distributions standardised to mean 0 and variance 1.

The member is chosen by the classical criterion
``kappa = b1 (b2 + 3)^2 / (4 (4 b2 - 3 b1) (2 b2 - 3 b1 - 6))`` with
``b1 = skew^2`` and ``b2 = excess kurtosis + 3``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy import optimize, stats

from .errors import DomainError

_TOL = 1e-10
# Grid resolution for the type IV inverse CDF (angle parametrisation).
_IV_GRID = 2**16 + 1


@dataclass
class Pearson:
    """Standardised Pearson distribution with given skewness and excess kurtosis.

    Attributes
    ----------
    skewness, excess_kurtosis : float
        Target third and fourth standardised moments.
    kind : str
        Pearson type label ("normal", "I", "II", "III", "IV", "V", "VI", "VII").
    """

    skewness: float
    excess_kurtosis: float
    kind: str = field(init=False)

    def __post_init__(self):
        b1 = self.skewness ** 2
        b2 = self.excess_kurtosis + 3.0
        if not b2 > b1 + 1.0:
            raise DomainError(
                f"moment pair (skew={self.skewness}, excess kurtosis="
                f"{self.excess_kurtosis}) is outside the Pearson region b2 > b1 + 1"
            )
        self._b1, self._b2 = b1, b2
        denom_iii = 2 * b2 - 3 * b1 - 6
        if b1 < _TOL:
            if abs(b2 - 3) < _TOL:
                self.kind = "normal"
            elif b2 > 3:
                self.kind = "VII"
            else:
                self.kind = "II"
        elif abs(denom_iii) < _TOL:
            self.kind = "III"
        else:
            kappa = b1 * (b2 + 3) ** 2 / (4 * (4 * b2 - 3 * b1) * denom_iii)
            self.kappa = kappa
            if kappa < 0:
                self.kind = "I"
            elif abs(kappa - 1) < 1e-9:
                self.kind = "V"
            elif kappa < 1:
                self.kind = "IV"
            else:
                self.kind = "VI"

    # -- members with a scipy representation ---------------------------------
    @cached_property
    def _frozen(self):
        """scipy frozen distribution before standardisation and sign flip."""
        b1, b2 = self._b1, self._b2
        g2 = self.excess_kurtosis
        if self.kind == "normal":
            return stats.norm()
        if self.kind == "VII":
            return stats.t(df=4.0 + 6.0 / g2)
        if self.kind == "II":
            a = 0.5 * (-6.0 / g2 - 3.0)
            return stats.beta(a, a)
        if self.kind == "III":
            return stats.gamma(4.0 / b1)
        if self.kind == "I":
            r = 6.0 * (b2 - b1 - 1.0) / (6.0 + 3.0 * b1 - 2.0 * b2)
            root = (r + 2.0) * np.sqrt(b1) / np.sqrt((r + 2.0) ** 2 * b1 + 16.0 * (r + 1.0))
            # right-skewed orientation: smaller first shape parameter
            return stats.beta(0.5 * r * (1.0 - root), 0.5 * r * (1.0 + root))
        if self.kind == "V":
            g1 = abs(self.skewness)
            alpha = optimize.brentq(
                lambda a: 4.0 * np.sqrt(a - 2.0) / (a - 3.0) - g1, 3.0 + 1e-12, 1e8
            )
            return stats.invgamma(alpha)
        if self.kind == "VI":
            return self._fit_beta_prime()
        return None

    def _fit_beta_prime(self):
        g1, g2 = abs(self.skewness), self.excess_kurtosis

        def resid(p):
            a, b = np.exp(p[0]), 4.0 + np.exp(p[1])
            s, k = stats.betaprime(a, b).stats(moments="sk")
            return [float(s) - g1, (float(k) - g2) / max(g2, 1.0)]

        best = None
        for a0, b0 in [(1.0, 6.0), (5.0, 10.0), (20.0, 30.0), (0.5, 5.0)]:
            sol = optimize.least_squares(resid, [np.log(a0), np.log(b0 - 4.0)], xtol=1e-14, ftol=1e-14)
            if best is None or sol.cost < best.cost:
                best = sol
        if best.cost > 1e-12:
            raise DomainError("could not match moments within the type VI family")
        return stats.betaprime(np.exp(best.x[0]), 4.0 + np.exp(best.x[1]))

    # -- type IV ------------------------------------------------------------
    @cached_property
    def type_iv_params(self):
        """(m, nu, a, lam) of the type IV density for mean 0, variance 1."""
        b1, b2 = self._b1, self._b2
        r = 6.0 * (b2 - b1 - 1.0) / (2.0 * b2 - 3.0 * b1 - 6.0)
        m = 0.5 * (r + 2.0)
        d = 16.0 * (r - 1.0) - b1 * (r - 2.0) ** 2
        nu = -r * (r - 2.0) * np.sqrt(b1) / np.sqrt(d)
        if self.skewness < 0:
            nu = -nu
        a = 0.25 * np.sqrt(d)
        lam = a * nu / r
        return m, nu, a, lam

    @cached_property
    def _iv_table(self):
        m, nu, _, _ = self.type_iv_params
        theta = np.linspace(-0.5 * np.pi, 0.5 * np.pi, _IV_GRID)
        with np.errstate(divide="ignore"):
            logd = (2.0 * m - 2.0) * np.log(np.cos(theta)) - nu * theta
        logd[[0, -1]] = -np.inf
        dens = np.exp(logd - np.max(logd))
        cdf = np.concatenate([[0.0], np.cumsum(0.5 * (dens[1:] + dens[:-1]))])
        cdf /= cdf[-1]
        return theta, cdf

    def type_iv_logpdf(self, x):
        """Unnormalised log density of the type IV member (kind == "IV")."""
        m, nu, a, lam = self.type_iv_params
        u = (np.asarray(x, dtype=float) - lam) / a
        return -m * np.log1p(u * u) - nu * np.arctan(u)

    # -- sampling -----------------------------------------------------------
    def rvs(self, rng: np.random.Generator, size=None):
        n = 1 if size is None else size
        if self.kind == "IV":
            _, _, a, lam = self.type_iv_params
            theta, cdf = self._iv_table
            m = self.type_iv_params[0]
            u = rng.random(n)
            th = np.interp(u, cdf, theta)
            # End cells: density ~ (pi/2 - |theta|)^(2m-2), invert the power law.
            h = theta[1] - theta[0]
            lo, hi = u < cdf[1], u > cdf[-2]
            th[lo] = theta[0] + h * (u[lo] / cdf[1]) ** (1.0 / (2.0 * m - 1.0))
            th[hi] = theta[-1] - h * ((1.0 - u[hi]) / (1.0 - cdf[-2])) ** (1.0 / (2.0 * m - 1.0))
            out = lam + a * np.tan(th)
        else:
            dist = self._frozen
            mean, var = (float(v) for v in dist.stats(moments="mv"))
            out = (dist.rvs(size=n, random_state=rng) - mean) / np.sqrt(var)
            if self.skewness < 0:
                out = -out
        return float(out[0]) if size is None else out


def sample_pearson(skewness: float, excess_kurtosis: float, rng: np.random.Generator, size=None):
    """Draw from the standardised Pearson member with the given moments."""
    return Pearson(skewness, excess_kurtosis).rvs(rng, size=size)
