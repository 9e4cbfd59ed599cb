"""Limit-variance coefficients for the L-group homozygosity CLT.

Every coefficient family is a sum over compositions ``m in M_{m,L}`` and
``j in M_{j,L}`` of products of generalized factorial coefficients.  For a
fixed composition the inner sum over ``j`` is exactly the polynomial product
``prod_l P_{m_l}(x)`` with ``P_n(x) = sum_j C(n, j, beta) x^j``, so the code
multiplies polynomials instead of enumerating ``j``.  Polynomials are built on
the scaled table ``C(n, j, beta) / beta^j``: the common ``beta^-j`` weights in
every formula cancel against it and the ``beta -> 0`` limit stays finite.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from numpy.polynomial import polynomial as P

from .combinatorics import compositions, gfc_table, rising
from .errors import ConsistencyError, ParameterError, RangeError

DEFAULT_MAX_M = 6
DEFAULT_MAX_L = 4


@dataclass(frozen=True, eq=False)
class CoefficientTable:
    """``A_j`` (j=1..m), ``A~_j`` (j=1..2m), ``C_m`` per composition and ``B_k`` per group.

    ``A`` and ``A_tilde`` are stored unscaled; ``C`` and ``B`` are already
    divided by ``f_tilde``.
    """

    m: int
    L: int
    alpha: float
    beta: float
    c: float
    A: np.ndarray
    A_tilde: np.ndarray
    C: dict[tuple[int, ...], float]
    B: np.ndarray
    f_tilde: float
    gamma_slopes: np.ndarray = field(default_factory=lambda: np.zeros(0))

    @property
    def gamma_slope(self) -> float:
        """``G = sum_j j A_j w_j / f~``, the sum of the per-group slopes."""
        return float(np.sum(self.gamma_slopes))

    def to_dict(self) -> dict:
        return {
            "m": self.m,
            "L": self.L,
            "alpha": self.alpha,
            "beta": self.beta,
            "c": self.c,
            "A": self.A.tolist(),
            "A_tilde": self.A_tilde.tolist(),
            "C": {",".join(map(str, k)): v for k, v in self.C.items()},
            "B": self.B.tolist(),
            "gamma_slopes": self.gamma_slopes.tolist(),
            "f_tilde": self.f_tilde,
        }


@dataclass(frozen=True)
class VarianceBreakdown:
    """Components of the limit variance; ``total = X + T + level1 + delta - cross``."""

    sigma2_X: float
    sigma2_T: float
    sigma2_1: float
    delta_term: float
    cross_term: float
    total: float

    def to_dict(self) -> dict:
        return {
            "sigma2_X": self.sigma2_X,
            "sigma2_T": self.sigma2_T,
            "sigma2_1": self.sigma2_1,
            "delta_term": self.delta_term,
            "cross_term": self.cross_term,
            "total": self.total,
        }


TIME_CHANGES = ("shared", "per_group")


def _check_time_change(time_change: str) -> None:
    if time_change not in TIME_CHANGES:
        raise ParameterError(f"time_change must be one of {TIME_CHANGES}, got {time_change!r}")


def _validate(m, L, alpha, beta, c, max_m=DEFAULT_MAX_M, max_L=DEFAULT_MAX_L, warn=True):
    if m < 2:
        raise ParameterError(f"order m must be >= 2, got {m}")
    if L < 1:
        raise ParameterError(f"number of groups L must be >= 1, got {L}")
    if not 0.0 <= alpha < 1.0:
        raise ParameterError(f"alpha must lie in [0, 1), got {alpha}")
    if not 0.0 < beta < 1.0:
        raise ParameterError(f"beta must lie in (0, 1), got {beta}")
    if not c > 0.0:
        raise ParameterError(f"ratio c must be > 0, got {c}")
    if m > max_m or L > max_L:
        raise RangeError(
            f"(m={m}, L={L}) exceeds the composition-cost cap (m <= {max_m}, L <= {max_L})"
        )
    if warn and (max_m > DEFAULT_MAX_M or max_L > DEFAULT_MAX_L):
        warnings.warn(
            "raised composition caps: A~ costs ~binom(m+L-1, L-1)^2 polynomial products",
            RuntimeWarning,
            stacklevel=3,
        )


def composition_poly(comp: tuple[int, ...], beta: float, scaled: bool = True) -> np.ndarray:
    """Coefficients over ``j`` of ``sum_{j in M_{j,L}} prod_l C(m_l, j_l, beta)``.

    Index ``j`` of the returned array holds the coefficient for total ``j``;
    ``C(0, 0) = 1`` makes empty groups contribute a factor 1.
    """
    table = gfc_table(beta, max(comp), scaled=scaled)
    out = np.ones(1)
    for part in comp:
        out = P.polymul(out, table.row(part))
    return out


def _marked_poly(comp: tuple[int, ...], k: int, beta: float) -> np.ndarray:
    # same as composition_poly but each term weighted by j_k
    table = gfc_table(beta, max(comp), scaled=True)
    out = np.ones(1)
    for ell, part in enumerate(comp):
        row = table.row(part)
        if ell == k:
            row = row * np.arange(part + 1)
        out = P.polymul(out, row)
    return out


def _pad(a: np.ndarray, n: int) -> np.ndarray:
    out = np.zeros(n)
    out[: min(n, a.size)] = a[:n]
    return out


@lru_cache(maxsize=512)
def _scaled_A(m: int, L: int, beta: float) -> np.ndarray:
    # index j = 0..m holds A_j / beta^j
    total = np.zeros(m + 1)
    for comp in compositions(m, L):
        total += _pad(composition_poly(comp, beta), m + 1)
    total.setflags(write=False)
    return total


@lru_cache(maxsize=512)
def _scaled_A_tilde(m: int, L: int, beta: float) -> np.ndarray:
    total = np.zeros(2 * m + 1)
    comps = compositions(m, L)
    for c1 in comps:
        for c2 in comps:
            merged = tuple(a + b for a, b in zip(c1, c2))
            total += _pad(composition_poly(merged, beta), 2 * m + 1)
    total.setflags(write=False)
    return total


def level1_weights(n: int, alpha: float, c: float) -> np.ndarray:
    """``u_j = (1-alpha)_(j-1) / c^(j-1)`` for j = 0..n (entry 0 unused, set to 0)."""
    u = np.zeros(n + 1)
    for j in range(1, n + 1):
        u[j] = rising(1.0 - alpha, j - 1) / c ** (j - 1)
    return u


def A_coefficients(m: int, L: int, beta: float) -> np.ndarray:
    """``[A_1, ..., A_m]`` (unscaled)."""
    a = _scaled_A(m, L, beta)
    return a[1:] * beta ** np.arange(1, m + 1)


def f_tilde(m: int, L: int, alpha: float, beta: float, c: float) -> float:
    """``sum_j A_j (1-alpha)_(j-1) / (beta^j c^(j-1))``."""
    # A_j alone is cheap; only the A~ double sum needs the tighter cap
    _validate(m, L, alpha, beta, c, max_m=max(m, DEFAULT_MAX_M), max_L=max(L, DEFAULT_MAX_L), warn=False)
    return float(_scaled_A(m, L, beta) @ level1_weights(m, alpha, c))


@dataclass(frozen=True)
class _Basis:
    a: np.ndarray  # scaled A, index 0..m
    at: np.ndarray  # scaled A~, index 0..2m
    u: np.ndarray  # level1_weights up to 2m
    ft: float


@lru_cache(maxsize=512)
def _basis(m, L, alpha, beta, c) -> _Basis:
    a = _scaled_A(m, L, beta)
    at = _scaled_A_tilde(m, L, beta)
    u = level1_weights(2 * m, alpha, c)
    ft = float(a @ u[: m + 1])
    return _Basis(a, at, u, ft)


def coeff_table(
    m: int,
    L: int,
    alpha: float,
    beta: float,
    c: float,
    max_m: int = DEFAULT_MAX_M,
    max_L: int = DEFAULT_MAX_L,
) -> CoefficientTable:
    """Assemble all coefficient families at one parameter point."""
    _validate(m, L, alpha, beta, c, max_m, max_L)
    b = _basis(m, L, alpha, beta, c)
    u = b.u[: m + 1]
    C = {}
    B = np.zeros(L)
    E = np.zeros(L)
    for comp in compositions(m, L):
        poly = _pad(composition_poly(comp, beta), m + 1)
        C[comp] = float(poly @ u) / b.ft
        for k in range(L):
            marked = _pad(_marked_poly(comp, k, beta), m + 1)
            B[k] += float((comp[k] * poly - beta * marked) @ u)
            E[k] += float(marked @ u)
    B /= b.ft
    E /= b.ft
    B.setflags(write=False)
    E.setflags(write=False)
    A = b.a[1:] * beta ** np.arange(1, m + 1)
    At = b.at[1:] * beta ** np.arange(1, 2 * m + 1)
    A.setflags(write=False)
    At.setflags(write=False)
    return CoefficientTable(
        m=m, L=L, alpha=alpha, beta=beta, c=c, A=A, A_tilde=At, C=C, B=B,
        f_tilde=b.ft, gamma_slopes=E,
    )


def _pair_grid(m):
    i = np.arange(1, m + 1)
    return i[:, None], i[None, :]


def sigma2_level1(m: int, L: int, alpha: float, beta: float, c: float) -> float:
    """Variance contributed by the level-one weights."""
    _validate(m, L, alpha, beta, c)
    b = _basis(m, L, alpha, beta, c)
    i, j = _pair_grid(m)
    r = np.array([rising(1.0 - alpha, n) for n in range(2 * m)])
    bracket = r[i + j - 1] + (alpha - i * j) * r[i - 1] * r[j - 1]
    num = np.sum(b.a[i] * b.a[j] * bracket / c ** (i + j - 1))
    return float(num / b.ft**2)


def sigma2_gamma(
    m: int, L: int, alpha: float, beta: float, c: float, time_change: str = "shared"
) -> float:
    """Variance contributed by the gamma time change.

    With one shared time the double sum factorizes into ``beta * G**2``
    (``G`` = :attr:`CoefficientTable.gamma_slope`).  With independent per-group
    times it is ``beta * sum_k E_k**2`` over the per-group slopes.
    """
    _validate(m, L, alpha, beta, c)
    _check_time_change(time_change)
    if time_change == "per_group":
        E = coeff_table(m, L, alpha, beta, c).gamma_slopes
        return float(beta * E @ E)
    b = _basis(m, L, alpha, beta, c)
    i, j = _pair_grid(m)
    r = np.array([rising(1.0 - alpha, n) for n in range(m)])
    num = np.sum(b.a[i] * b.a[j] * r[i - 1] * r[j - 1] * i * j / c ** (i + j - 2))
    return float(beta * num / b.ft**2)


def sigma2_stable(m: int, L: int, alpha: float, beta: float, c: float) -> float:
    """Variance contributed by the stable increments given level one and gamma."""
    _validate(m, L, alpha, beta, c)
    b = _basis(m, L, alpha, beta, c)
    i, j = _pair_grid(m)
    r = np.array([rising(1.0 - alpha, n) for n in range(2 * m)])
    first = float(b.at[1:] @ b.u[1:])
    second = float(np.sum(b.a[i] * b.a[j] * r[i + j - 1] / c ** (i + j - 1)))
    return (first - second) / b.ft**2


def delta_inner_sums(m: int, L: int, alpha: float, beta: float, c: float) -> np.ndarray:
    """``D_k = sum_m C_m m_k`` for each group k."""
    tab = coeff_table(m, L, alpha, beta, c)
    D = np.zeros(L)
    for comp, cm in tab.C.items():
        D += cm * np.asarray(comp, dtype=float)
    return D


def delta_method_term(m: int, L: int, alpha: float, beta: float, c: float) -> float:
    """``sum_k (sum_m C_m m_k)^2`` from the normalizing-mass fluctuations."""
    D = delta_inner_sums(m, L, alpha, beta, c)
    return float(D @ D)


def cross_term(
    m: int, L: int, alpha: float, beta: float, c: float, time_change: str = "shared"
) -> float:
    """Subtracted covariance term of the total variance.

    ``shared``: ``2 sum_k (B_k + beta G)^2``.  ``per_group``:
    ``2 sum_k D_k (B_k + beta E_k)`` with ``D_k`` the delta-method inner sums.
    """
    _check_time_change(time_change)
    tab = coeff_table(m, L, alpha, beta, c)
    if time_change == "per_group":
        D = delta_inner_sums(m, L, alpha, beta, c)
        return float(2.0 * D @ (tab.B + beta * tab.gamma_slopes))
    inner = tab.B + beta * tab.gamma_slope
    return float(2.0 * inner @ inner)


def sigma2_total(
    m: int, L: int, alpha: float, beta: float, c: float, time_change: str = "shared"
) -> VarianceBreakdown:
    """Limit variance of the scaled homozygosity with its five components."""
    _check_time_change(time_change)
    x = sigma2_stable(m, L, alpha, beta, c)
    t = sigma2_gamma(m, L, alpha, beta, c, time_change)
    y = sigma2_level1(m, L, alpha, beta, c)
    d = delta_method_term(m, L, alpha, beta, c)
    cr = cross_term(m, L, alpha, beta, c, time_change)
    total = x + t + y + d - cr
    scale = x + t + y + d + cr
    if total < -1e-12 * scale:
        raise ConsistencyError(
            f"negative limit variance {total!r} at m={m}, L={L}, alpha={alpha}, beta={beta}, c={c}"
        )
    return VarianceBreakdown(x, t, y, d, cr, total)


def handa_limit(m: int, beta: float) -> float:
    """Single-group ``c -> infinity`` limit ``(1-b)_(2m-1)/(1-b)_(m-1)^2 + b - m^2``."""
    return rising(1.0 - beta, 2 * m - 1) / rising(1.0 - beta, m - 1) ** 2 + beta - m * m


def handa_covariance(alpha: float, i: int, j: int) -> float:
    """Limit covariance of the scaled order-i and order-j homozygosities of PD(alpha, theta)."""
    if not 0.0 <= alpha < 1.0:
        raise ParameterError(f"alpha must lie in [0, 1), got {alpha}")
    if i < 1 or j < 1:
        raise ParameterError(f"orders must be >= 1, got ({i}, {j})")
    r = rising
    return r(1 - alpha, i + j - 1) / (r(1 - alpha, i - 1) * r(1 - alpha, j - 1)) + alpha - i * j


def gamma_cov_matrix(beta: float, m: int) -> np.ndarray:
    """Limit covariance ``beta * (i j)`` of the scaled powers of the gamma time."""
    if not 0.0 < beta < 1.0:
        raise ParameterError(f"beta must lie in (0, 1), got {beta}")
    if m < 1:
        raise ParameterError(f"m must be >= 1, got {m}")
    g = np.arange(1, m + 1, dtype=float)
    return beta * np.outer(g, g)
