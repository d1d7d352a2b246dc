"""Higher-order cumulants, identification checks and the signed-permutation
normalisation of posterior draws."""
from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment

from .errors import DimensionError, DomainError

# Exhaustive search over signed permutations up to this many factors.
EXHAUSTIVE_MAX_R = 6


@dataclass
class CumulantSet:
    """Second-, third- and fourth-order cumulant matrices.

    ``gamma[l]`` is Gamma_y(l) and ``omega[l, m]`` is Omega_y(l, m); each is
    an ``n x n`` matrix.
    """

    sigma: np.ndarray
    gamma: np.ndarray
    omega: np.ndarray


def sample_cumulants(E, order: int) -> np.ndarray:
    """Sample joint cumulant tensor of the columns of ``E`` (``T x q``).

    Columns are centred first. Order 2 and 3 are raw central moments; order 4
    subtracts the three pairwise covariance products.
    """
    E = np.asarray(E, dtype=float)
    if E.ndim == 1:
        E = E[:, None]
    T = E.shape[0]
    if T < 8:
        raise DimensionError(f"need at least 8 observations for sample cumulants, got {T}")
    if order not in (2, 3, 4):
        raise DomainError("order must be 2, 3 or 4")
    Z = E - E.mean(axis=0)
    c2 = Z.T @ Z / T
    if order == 2:
        return c2
    if order == 3:
        return np.einsum("ti,tj,tk->ijk", Z, Z, Z, optimize=True) / T
    m4 = np.einsum("ti,tj,tk,tl->ijkl", Z, Z, Z, Z, optimize=True) / T
    return (
        m4
        - np.einsum("ij,kl->ijkl", c2, c2)
        - np.einsum("ik,jl->ijkl", c2, c2)
        - np.einsum("il,jk->ijkl", c2, c2)
    )


def sample_cumulant_set(Y) -> CumulantSet:
    c2 = sample_cumulants(Y, 2)
    c3 = sample_cumulants(Y, 3)
    c4 = sample_cumulants(Y, 4)
    # Gamma_y(l)[i, j] = Cum(y_i, y_j, y_l); Omega_y(l, m)[i, j] = Cum(y_i, y_j, y_l, y_m)
    return CumulantSet(c2, np.moveaxis(c3, 2, 0), np.moveaxis(c4, (2, 3), (0, 1)))


def implied_cumulants(L, Sigma, K3, K4) -> CumulantSet:
    """Model-implied cumulant matrices for y = L f + v with independent unit
    factors and Gaussian noise.

    ``Sigma`` is the vector of noise variances; ``K3`` and ``K4`` hold the
    factors' third and fourth cumulants.
    """
    L = np.atleast_2d(np.asarray(L, dtype=float))
    K3 = np.asarray(K3, dtype=float)
    K4 = np.asarray(K4, dtype=float)
    sigma = L @ L.T + np.diag(np.asarray(Sigma, dtype=float))
    # L K3 diag(L_l) L'  ->  sum_k L_ik k3_k L_lk L_jk
    gamma = np.einsum("ik,k,lk,jk->lij", L, K3, L, L)
    omega = np.einsum("ik,k,lk,mk,jk->lmij", L, K4, L, L, L)
    return CumulantSet(sigma, gamma, omega)


@dataclass
class IdentificationReport:
    n_zero_skewness: int
    n_zero_kurtosis: int
    n_gaussian_like: int
    kurtosis_condition: bool
    skewness_condition: bool
    joint_condition: bool
    tol: float

    @property
    def identified(self) -> bool:
        return self.kurtosis_condition or self.skewness_condition or self.joint_condition

    @property
    def relies_on(self) -> list:
        out = []
        if self.kurtosis_condition:
            out.append("second+fourth")
        if self.skewness_condition:
            out.append("second+third")
        if self.joint_condition:
            out.append("second+third+fourth")
        return out


def check_identification_conditions(K3, K4, tol: float = 0.1) -> IdentificationReport:
    """Which of the three higher-moment identification conditions hold.

    1. at most one factor with |kappa_4| <= tol;
    2. at most one factor with |kappa_3| <= tol;
    3. no pair of factors with all four cumulants zero, i.e. at most one
       factor that is Gaussian-like in both cumulants.

    Non-finite cumulants (heavy tails) count as non-zero.
    """
    k3 = np.abs(np.asarray(K3, dtype=float))
    k4 = np.abs(np.asarray(K4, dtype=float))
    zero3 = ~(k3 > tol)
    zero4 = ~(k4 > tol)
    zero3 &= np.isfinite(k3)
    zero4 &= np.isfinite(k4)
    both = zero3 & zero4
    return IdentificationReport(
        n_zero_skewness=int(zero3.sum()),
        n_zero_kurtosis=int(zero4.sum()),
        n_gaussian_like=int(both.sum()),
        kurtosis_condition=bool(zero4.sum() <= 1),
        skewness_condition=bool(zero3.sum() <= 1),
        joint_condition=bool(both.sum() <= 1),
        tol=tol,
    )


@dataclass(frozen=True)
class SignedPermutation:
    """Column map: new column ``j`` is ``signs[j]`` times old column ``perm[j]``."""

    perm: tuple
    signs: tuple
    tie: bool = False

    def __post_init__(self):
        perm = tuple(int(p) for p in self.perm)
        signs = tuple(int(s) for s in self.signs)
        if sorted(perm) != list(range(len(perm))):
            raise DomainError(f"{perm} is not a permutation")
        if len(signs) != len(perm) or any(s not in (-1, 1) for s in signs):
            raise DomainError("signs must be +1/-1, one per column")
        object.__setattr__(self, "perm", perm)
        object.__setattr__(self, "signs", signs)

    @classmethod
    def identity(cls, r: int) -> "SignedPermutation":
        return cls(tuple(range(r)), (1,) * r)

    @property
    def is_identity(self) -> bool:
        return self.perm == tuple(range(len(self.perm))) and all(s == 1 for s in self.signs)

    def matrix(self) -> np.ndarray:
        """Q with ``apply(L) == L @ Q``."""
        r = len(self.perm)
        Q = np.zeros((r, r))
        for j, (p, s) in enumerate(zip(self.perm, self.signs)):
            Q[p, j] = s
        return Q

    def apply(self, M, axis: int = -1) -> np.ndarray:
        M = np.asarray(M)
        out = np.take(M, self.perm, axis=axis)
        shape = [1] * out.ndim
        shape[axis] = len(self.perm)
        return out * np.reshape(self.signs, shape)

    def apply_unsigned(self, M, axis: int = -1) -> np.ndarray:
        return np.take(np.asarray(M), self.perm, axis=axis)

    def compose(self, other: "SignedPermutation") -> "SignedPermutation":
        """Map equal to applying ``self`` first, then ``other``."""
        perm = tuple(self.perm[p] for p in other.perm)
        signs = tuple(other.signs[j] * self.signs[p] for j, p in enumerate(other.perm))
        return SignedPermutation(perm, signs, self.tie or other.tie)


def _match_template(L, template) -> SignedPermutation:
    """Signed permutation minimising ||L Q - template||_F.

    For a given permutation the optimal sign of each column is the sign of
    its inner product with the template column, so minimising the distance
    is maximising sum_j |<L_perm(j), T_j>|.
    """
    G = L.T @ template  # G[a, j] = <L_a, T_j>
    A = np.abs(G)
    r = A.shape[0]
    if r <= EXHAUSTIVE_MAX_R:
        cols = np.arange(r)
        best_perm, tie = None, False
        for perm in itertools.permutations(range(r)):
            score = A[list(perm), cols].sum()
            if best_perm is None:
                best, best_perm = score, perm
                continue
            eps = 1e-12 * max(1.0, abs(best))
            if score > best + eps:
                best, best_perm, tie = score, perm, False
            elif abs(score - best) <= eps:
                tie = True
        perm = best_perm
    else:
        rows, cols = linear_sum_assignment(-A)
        perm = tuple(int(rw) for rw in rows[np.argsort(cols)])
        tie = False
    signs = tuple(1 if G[p, j] >= 0 else -1 for j, p in enumerate(perm))
    return SignedPermutation(perm, signs, tie)


def _match_proxy(L, f, proxy, sign_row) -> SignedPermutation:
    proxy = np.asarray(proxy, dtype=float).ravel()
    f = np.asarray(f, dtype=float)
    if f.shape[0] != proxy.size:
        raise DimensionError("proxy length differs from the number of factor observations")
    fc = f - f.mean(axis=0)
    pc = proxy - proxy.mean()
    denom = np.sqrt((fc**2).sum(axis=0) * (pc**2).sum())
    corr = np.where(denom > 0, fc.T @ pc / np.where(denom > 0, denom, 1.0), 0.0)
    key = np.abs(corr)
    perm = tuple(int(j) for j in np.argsort(-key, kind="stable"))
    ordered = key[list(perm)]
    tie = bool(np.any(np.abs(np.diff(ordered)) <= 1e-12))
    signs = []
    for p in perm:
        anchor = L[sign_row, p] if sign_row is not None else 0.0
        if anchor == 0.0:
            anchor = corr[p]
        signs.append(1 if anchor >= 0 else -1)
    return SignedPermutation(perm, tuple(signs), tie)


def normalize_draw(L, f=None, *, proxy=None, template=None, sign_row=None):
    """Fix the column order and signs of one draw of (L, f).

    With ``proxy``: columns sorted by decreasing |corr(f_j, proxy)| (the most
    correlated factor first), each signed so that ``L[sign_row, j] > 0``
    (or, without ``sign_row``, so that its proxy correlation is positive).
    With ``template``: the signed permutation closest in Frobenius norm.

    Returns ``(L, f, SignedPermutation)``.
    """
    L = np.asarray(L, dtype=float)
    if (proxy is None) == (template is None):
        raise DomainError("give exactly one of proxy= or template=")
    if L.shape[1] == 0:
        return L, f, SignedPermutation((), ())
    if template is not None:
        template = np.asarray(template, dtype=float)
        if template.shape != L.shape:
            raise DimensionError(f"template shape {template.shape} differs from L {L.shape}")
        sp = _match_template(L, template)
    else:
        if f is None:
            raise DomainError("proxy normalisation needs the factor draws")
        sp = _match_proxy(L, f, proxy, sign_row)
    return sp.apply(L), (None if f is None else sp.apply(f)), sp


def rotation_matrix(angle: float) -> np.ndarray:
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[c, s], [-s, c]])


def rotation_demo(distribution: str = "t", angle: float = np.pi / 5, T: int = 1_000_000,
                  rng: np.random.Generator = None, df: float = 4.0) -> dict:
    """Correlations of two independent factors and of their squares, before
    and after a planar rotation.

    ``distribution`` is ``"gaussian"`` or ``"t"`` (Student-t with ``df``).
    """
    if T < 1000:
        raise DimensionError("rotation demo needs T >= 1000")
    rng = np.random.default_rng() if rng is None else rng
    if distribution in ("gaussian", "normal"):
        F = rng.standard_normal((T, 2))
    elif distribution in ("t", "student-t", "student_t"):
        F = rng.standard_t(df, size=(T, 2))
    else:
        raise DomainError(f"unknown distribution {distribution!r}")
    G = F @ rotation_matrix(angle).T

    def corr(a, b):
        return float(np.corrcoef(a, b)[0, 1])

    return {
        "distribution": distribution,
        "angle": float(angle),
        "T": int(T),
        "corr_before": corr(F[:, 0], F[:, 1]),
        "corr_sq_before": corr(F[:, 0] ** 2, F[:, 1] ** 2),
        "corr_after": corr(G[:, 0], G[:, 1]),
        "corr_sq_after": corr(G[:, 0] ** 2, G[:, 1] ** 2),
    }
