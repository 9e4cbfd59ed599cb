"""Closed-form expectations of stick weights and homozygosities.

Formulas for the hierarchical process come in two flavours selected by
``time_change``:

``"shared"``
    one gamma time change drives every group, so the gamma moment of a
    composition depends only on the total ``j = |j|``.  This is the form the
    published L-group formulas take.
``"per_group"``
    every group carries its own gamma time change, which is what conditional
    independence of the groups given the level-one weights implies.  The
    gamma moment then factorizes over groups.

The two coincide for ``L = 1``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial import polynomial as P
from scipy.special import logsumexp

from . import asymptotics
from .asymptotics import TIME_CHANGES, _check_time_change
from .combinatorics import compositions, gfc_table, log_rising, rising
from .errors import ParameterError, RangeError
from .params import Params

MEAN_MAX_M = 8
MEAN_MAX_L = 6


@dataclass(frozen=True)
class MomentResult:
    """A positive expectation with its log and an optional per-``j`` breakdown."""

    value: float
    log_value: float
    terms: dict[int, float] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "value": self.value,
            "log_value": self.log_value,
            "terms": {str(k): v for k, v in self.terms.items()},
        }


def _check_pd(alpha: float, theta: float) -> None:
    if not 0.0 <= alpha < 1.0:
        raise ParameterError(f"alpha must lie in [0, 1), got {alpha}")
    if not theta > -alpha:
        raise ParameterError(f"theta must exceed -alpha, got theta={theta}, alpha={alpha}")


def ev_vk_power(k: int, j: int, alpha: float, theta0: float) -> float:
    """``E[V_k^j]`` for the k-th stick of GEM(alpha, theta0)."""
    _check_pd(alpha, theta0)
    if k < 1 or j < 0:
        raise ParameterError(f"need k >= 1 and j >= 0, got k={k}, j={j}")
    if j == 0:
        return 1.0
    out = math.exp(log_rising(1.0 - alpha, j) - log_rising(1.0 + theta0, j))
    for s in range(1, k):
        a = theta0 + s * alpha
        out *= a / (a + j)
    return out


def _log_tail_product(N: int, j: int, alpha: float, theta0: float) -> float:
    # log prod_{s=1}^{N-1} (theta0 + s alpha) / (theta0 + s alpha + j)
    if N <= 1:
        return 0.0
    a = theta0 + alpha * np.arange(1, N, dtype=float)
    return float(np.sum(np.log1p(-j / (a + j))))


def ev_partial_sum(N: int, j: int, alpha: float, theta0: float) -> float:
    """``sum_{k<=N} E[V_k^j]`` in closed (telescoped) form."""
    _check_pd(alpha, theta0)
    if N < 1 or j < 1:
        raise ParameterError(f"need N >= 1 and j >= 1, got N={N}, j={j}")
    tail = (theta0 + N * alpha) * math.exp(_log_tail_product(N, j, alpha, theta0))
    return rising(1.0 - alpha, j - 1) * (theta0 + j - tail) / rising(1.0 + theta0, j)


def ev_homozygosity_pd(m: int, alpha: float, theta: float) -> float:
    """``E[sum_i V_i^m] = (1-alpha)_(m-1) / (1+theta)_(m-1)``."""
    _check_pd(alpha, theta)
    if m < 2:
        raise ParameterError(f"order m must be >= 2, got {m}")
    return math.exp(log_rising(1.0 - alpha, m - 1) - log_rising(1.0 + theta, m - 1))


def _gamma_weighted_poly(comp, params: Params, time_change: str) -> np.ndarray:
    """Coefficient of ``V^j`` in the conditional mean of ``prod_l W_l^{m_l}`` given the level-one weights.

    Returned in log form (``-inf`` for structural zeros); index ``j``.
    """
    beta, theta = params.beta, params.theta
    table = gfc_table(beta, max(comp))
    shape = theta / beta
    if time_change == "shared":
        poly = np.ones(1)
        for part in comp:
            poly = P.polymul(poly, table.row(part))
        with np.errstate(divide="ignore"):
            logs = np.log(poly)
        for j in range(1, logs.size):
            logs[j] += log_rising(shape, j)
        return logs
    poly = np.ones(1)
    for part in comp:
        row = np.array(
            [table(part, j) * math.exp(log_rising(shape, j)) for j in range(part + 1)]
        )
        poly = P.polymul(poly, row)
    with np.errstate(divide="ignore"):
        return np.log(poly)


def _check_mean_caps(m, L, max_m, max_L):
    if m < 2:
        raise ParameterError(f"order m must be >= 2, got {m}")
    if L < 1:
        raise ParameterError(f"number of groups L must be >= 1, got {L}")
    if m > max_m or L > max_L:
        raise RangeError(f"(m={m}, L={L}) exceeds the composition cap (m <= {max_m}, L <= {max_L})")


def ev_homozygosity_hpyp(
    m: int,
    L: int,
    params: Params,
    time_change: str = "shared",
    max_m: int = MEAN_MAX_M,
    max_L: int = MEAN_MAX_L,
) -> MomentResult:
    """Exact ``E[H_{m,L}]`` by the double composition sum, accumulated in log space."""
    params.validate()
    _check_time_change(time_change)
    _check_mean_caps(m, L, max_m, max_L)
    alpha, theta0, theta = params.alpha, params.theta0, params.theta
    log_level1 = [-math.inf] + [
        log_rising(1.0 - alpha, j - 1) - log_rising(theta0 + 1.0, j - 1) for j in range(1, m + 1)
    ]
    per_j: dict[int, list[float]] = {j: [] for j in range(1, m + 1)}
    for comp in compositions(m, L):
        denom = sum(log_rising(theta, part) for part in comp)
        logs = _gamma_weighted_poly(comp, params, time_change)
        for j in range(1, logs.size):
            if np.isfinite(logs[j]):
                per_j[j].append(logs[j] - denom + log_level1[j])
    shift = -m * math.log(L)
    log_terms = {j: float(logsumexp(v)) + shift for j, v in per_j.items() if v}
    log_value = float(logsumexp(list(log_terms.values())))
    return MomentResult(
        value=math.exp(log_value),
        log_value=log_value,
        terms={j: math.exp(v) for j, v in log_terms.items()},
    )


def f_tilde(m: int, L: int, alpha: float, beta: float, c: float) -> float:
    """theta-free mean scale ``sum_j A_j (1-alpha)_(j-1) / (beta^j c^(j-1))``."""
    return asymptotics.f_tilde(m, L, alpha, beta, c)


def f_scale(m: int, L: int, params: Params) -> float:
    """Mean scale ``f~ / (L^m theta^(m-1))`` evaluated at ``c = theta0 / theta``."""
    params.validate()
    ft = f_tilde(m, L, params.alpha, params.beta, params.c)
    return ft / (L**m * params.theta ** (m - 1))


def centering(m: int, L: int, params: Params, time_change: str = "shared") -> float:
    """Centering constant of the scaled homozygosity.

    ``shared`` uses ``L^-m theta^-(m-1) sum_j A_j prod_{s=1}^{j-1}(theta+s beta)
    (1-alpha)_(j-1) / (beta^j theta0^(j-1))``; ``per_group`` replaces the joint
    gamma moment by the product of per-group moments.
    """
    params.validate()
    _check_time_change(time_change)
    alpha, beta, theta, theta0 = params.alpha, params.beta, params.theta, params.theta0
    if time_change == "shared":
        A = asymptotics.A_coefficients(m, L, beta)
        total = 0.0
        for j in range(1, m + 1):
            # prod_{s=1}^{j-1} (theta + s beta) = beta^(j-1) (theta/beta + 1)_(j-1)
            log_g = (j - 1) * math.log(beta) + log_rising(theta / beta + 1.0, j - 1)
            total += A[j - 1] * math.exp(
                log_g + log_rising(1.0 - alpha, j - 1) - j * math.log(beta) - (j - 1) * math.log(theta0)
            )
        return total / (L**m * theta ** (m - 1))
    return _centering_via_gamma_moments(m, L, params, time_change)


def _centering_via_gamma_moments(m: int, L: int, params: Params, time_change: str) -> float:
    # L^-m theta^-m sum_m sum_j K_{m,j} (1-alpha)_(j-1) / theta0^(j-1), K carrying E[gamma^j]
    alpha, theta, theta0 = params.alpha, params.theta, params.theta0
    total = 0.0
    for comp in compositions(m, L):
        logs = _gamma_weighted_poly(comp, params, time_change)
        for j in range(1, logs.size):
            if np.isfinite(logs[j]):
                total += math.exp(
                    logs[j] + log_rising(1.0 - alpha, j - 1) - (j - 1) * math.log(theta0) - m * math.log(theta)
                )
    return total / L**m
