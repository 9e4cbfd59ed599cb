"""Stick-breaking samplers for PD(alpha, theta) and the hierarchical process.

Weights stay in stick-breaking order; every statistic computed here is
permutation invariant.  Group weights of the hierarchical sampler are built
by nested stick-breaking: each group breaks its own GEM(beta, theta) sticks
and sends every stick to a level-one atom drawn from the level-one weights.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .combinatorics import compositions
from .errors import ParameterError
from .moments import centering, f_scale
from .params import Params, TruncationPolicy

__all__ = [
    "Params",
    "TruncationPolicy",
    "StickWeights",
    "HpypSample",
    "sample_gem",
    "sample_hpyp",
    "homozygosity_pd",
    "homozygosity_hpyp",
    "scaled_homozygosity",
]

_MIN_CHUNK = 64


@dataclass(frozen=True, eq=False)
class StickWeights:
    """Truncated stick-breaking weights with the unallocated mass kept aside."""

    weights: np.ndarray
    residual: float
    capped: bool = False

    def __len__(self) -> int:
        return self.weights.size

    @property
    def total(self) -> float:
        return float(self.weights.sum()) + self.residual


@dataclass(frozen=True, eq=False)
class HpypSample:
    """Level-one weights plus an ``L x K`` matrix of group weights.

    The first ``len(level1)`` columns are the shared level-one atoms.  Any
    further columns hold group sticks that landed in the level-one tail; each
    such column is nonzero in exactly one row.
    """

    level1: StickWeights
    group_weights: np.ndarray
    group_residuals: np.ndarray
    capped: bool = False

    @property
    def L(self) -> int:
        return self.group_weights.shape[0]

    @property
    def n_shared(self) -> int:
        return len(self.level1)


def _check_gem(alpha: float, theta: float) -> None:
    if not 0.0 <= alpha < 1.0:
        raise ParameterError(f"alpha must lie in [0, 1), got {alpha}")
    if not theta > -alpha:
        raise ParameterError(f"theta must exceed -alpha, got theta={theta}, alpha={alpha}")


def _chunk_guess(alpha: float, theta: float, epsilon: float) -> int:
    # E[log R_n] ~ -((1-alpha)/alpha) log((theta + n alpha)/theta) for alpha > 0
    if alpha == 0.0:
        n = (theta + 1.0) * math.log(1.0 / epsilon)
    else:
        base = max(theta, alpha)
        n = base / alpha * (epsilon ** (-alpha / (1.0 - alpha)) - 1.0)
    return int(min(max(n, _MIN_CHUNK), 1 << 22))


def sample_gem(
    alpha: float,
    theta: float,
    policy: TruncationPolicy | None = None,
    rng: np.random.Generator | None = None,
) -> StickWeights:
    """Break sticks ``U_k ~ Beta(1 - alpha, theta + k alpha)`` until the policy stops.

    Stops at the first stick whose residual is ``<= policy.epsilon``; if
    ``policy.k_max`` sticks do not get there the draw is returned flagged as
    capped.
    """
    _check_gem(alpha, theta)
    policy = policy or TruncationPolicy()
    rng = rng if rng is not None else np.random.default_rng()
    eps, k_max = policy.epsilon, policy.k_max

    pieces = []
    start_residual = 1.0
    k0 = 0
    chunk = _chunk_guess(alpha, theta, eps)
    while True:
        n = min(chunk, k_max - k0)
        k = np.arange(k0 + 1, k0 + n + 1, dtype=float)
        # Beta(a, b) as X / (X + Y) with gamma X, Y: cheaper than rng.beta with array b
        x = rng.standard_gamma(1.0 - alpha, n)
        u = x / (x + rng.standard_gamma(theta + k * alpha))
        # residual after each stick; weight = previous residual minus current
        r = start_residual * np.cumprod(1.0 - u)
        below = np.flatnonzero(r <= eps)
        if below.size:
            stop = below[0] + 1
            r = r[:stop]
        prev = np.concatenate(([start_residual], r[:-1]))
        pieces.append(prev - r)
        k0 += r.size
        start_residual = float(r[-1])
        if below.size:
            capped = False
            break
        if k0 >= k_max:
            capped = True
            break
        # the first guess is the typical stopping time, so top up in smaller steps
        chunk = max(chunk // 4, _MIN_CHUNK) if len(pieces) == 1 else chunk * 2
    w = pieces[0] if len(pieces) == 1 else np.concatenate(pieces)
    return StickWeights(weights=w, residual=start_residual, capped=capped)


def sample_hpyp(
    params: Params,
    L: int,
    policy: TruncationPolicy | None = None,
    rng: np.random.Generator | None = None,
) -> HpypSample:
    """Draw level-one weights and ``L`` conditionally iid rows of group weights.

    With ``policy.tail == "drop"`` atoms are chosen from the level-one weights
    renormalized by their sum and each group's leftover stick mass stays
    unallocated.  With ``"mean"`` atoms are chosen from the unnormalized
    level-one weights; a stick that falls in the level-one tail becomes its own
    column, and the group's leftover mass ``R`` is spread as ``R * V_i`` over
    the level-one atoms, leaving ``R * R_1`` unallocated.
    """
    params.validate()
    if L < 1:
        raise ParameterError(f"number of groups L must be >= 1, got {L}")
    policy = policy or TruncationPolicy()
    rng = rng if rng is not None else np.random.default_rng()

    level1 = sample_gem(params.alpha, params.theta0, policy, rng)
    v = level1.weights
    K = v.size
    cdf = np.cumsum(v)
    mean_tail = policy.tail == "mean"
    capped = level1.capped

    rows = np.zeros((L, K))
    extras: list[tuple[int, np.ndarray]] = []
    residuals = np.empty(L)
    for ell in range(L):
        sticks = sample_gem(params.beta, params.theta, policy, rng)
        capped = capped or sticks.capped
        # iid atom labels paired with sticks == sorted labels paired with shuffled sticks;
        # sorted keys make the binary search cache friendly
        u = np.sort(rng.random(sticks.weights.size))
        p = rng.permutation(sticks.weights)
        if mean_tail:
            idx = np.searchsorted(cdf, u, side="right")
            inside = idx < K
            rows[ell] = np.bincount(idx[inside], weights=p[inside], minlength=K)
            if not inside.all():
                extras.append((ell, p[~inside]))
            rows[ell] += sticks.residual * v
            residuals[ell] = sticks.residual * level1.residual
        else:
            idx = np.minimum(np.searchsorted(cdf, u * cdf[-1], side="right"), K - 1)
            rows[ell] = np.bincount(idx, weights=p, minlength=K)
            residuals[ell] = sticks.residual

    if extras:
        n_extra = sum(e.size for _, e in extras)
        block = np.zeros((L, n_extra))
        col = 0
        for ell, e in extras:
            block[ell, col : col + e.size] = e
            col += e.size
        rows = np.hstack([rows, block])
    return HpypSample(level1=level1, group_weights=rows, group_residuals=residuals, capped=capped)


def _check_order(m: int) -> None:
    if m < 2:
        raise ParameterError(f"order m must be >= 2, got {m}")


def homozygosity_pd(w: StickWeights | np.ndarray, m: int) -> float:
    """``sum_i w_i^m`` over the retained sticks."""
    _check_order(m)
    arr = w.weights if isinstance(w, StickWeights) else np.asarray(w, dtype=float)
    return float(np.sum(arr**m))


def homozygosity_hpyp(s: HpypSample | np.ndarray, m: int) -> float:
    """``sum_i sum_{comp in M(m, L)} L^-m prod_l Z_{l,i}^{m_l}``, term by term."""
    _check_order(m)
    Z = s.group_weights if isinstance(s, HpypSample) else np.atleast_2d(np.asarray(s, dtype=float))
    L = Z.shape[0]
    if L == 1:
        return float(np.sum(Z[0] ** m))
    powers = [np.ones_like(Z)]
    for _ in range(m):
        powers.append(powers[-1] * Z)
    total = 0.0
    for comp in compositions(m, L):
        prod = np.ones(Z.shape[1])
        for ell, part in enumerate(comp):
            if part:
                prod = prod * powers[part][ell]
        total += prod.sum()
    return total / L**m


def scaled_homozygosity(
    s: HpypSample,
    m: int,
    params: Params,
    L: int | None = None,
    time_change: str = "shared",
) -> float:
    """``sqrt(theta) / f * (H_{m,L} - centering)`` with ``f`` taken at ``c = theta0 / theta``."""
    L = s.L if L is None else L
    if L != s.L:
        raise ParameterError(f"sample has {s.L} groups, L={L} requested")
    h = homozygosity_hpyp(s, m)
    f = f_scale(m, L, params)
    return math.sqrt(params.theta) / f * (h - centering(m, L, params, time_change))
