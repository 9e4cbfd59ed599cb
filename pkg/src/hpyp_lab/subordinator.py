"""Gamma time change and exponentially tilted stable increments.

Given the gamma time ``gamma`` and a level-one weight ``v``, a group
increment ``W`` has Laplace transform ``exp(-s[(lam + 1)^beta - 1])`` with
``s = gamma * v``.  Such a ``W`` is drawn by proposing a positive stable
``S`` with Laplace transform ``exp(-s lam^beta)`` and keeping it with
probability ``exp(-S)``.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from .combinatorics import gfc_table, rising
from .errors import BudgetError, ParameterError

log = logging.getLogger(__name__)

DEFAULT_BUDGET = 25.0


def _check_beta(beta: float) -> None:
    if not 0.0 < beta < 1.0:
        raise ParameterError(f"beta must lie in (0, 1), got {beta}")


def sample_gamma_total(theta: float, beta: float, rng: np.random.Generator, size=None):
    """Gamma time ``gamma_{1/beta}``: shape ``theta / beta``, unit scale."""
    _check_beta(beta)
    if not theta > 0:
        raise ParameterError(f"theta must be > 0, got {theta}")
    return rng.standard_gamma(theta / beta, size)


@dataclass(frozen=True)
class TiltedStableSpec:
    """Law of one increment given ``s = gamma * v``.

    Plain rejection costs ``exp(s)`` proposals per draw; ``budget`` caps ``s``.
    """

    beta: float
    scale_mass: float
    budget: float = DEFAULT_BUDGET

    def __post_init__(self):
        _check_beta(self.beta)
        if not self.scale_mass > 0:
            raise ParameterError(f"scale_mass must be > 0, got {self.scale_mass}")
        if self.scale_mass > self.budget:
            raise BudgetError(
                f"scale_mass={self.scale_mass} exceeds the rejection budget {self.budget} "
                f"(about e^{self.scale_mass:.0f} proposals per draw); reduce s"
            )

    @property
    def acceptance_rate(self) -> float:
        return math.exp(-self.scale_mass)


def sample_positive_stable(beta: float, scale: float, rng: np.random.Generator, size: int) -> np.ndarray:
    """Kanter's representation of ``S`` with ``E exp(-lam S) = exp(-scale lam^beta)``."""
    _check_beta(beta)
    u = np.pi * rng.random(size)
    e = rng.standard_exponential(size)
    a = (np.sin(beta * u) ** beta * np.sin((1.0 - beta) * u) ** (1.0 - beta) / np.sin(u)) ** (
        1.0 / (1.0 - beta)
    )
    return scale ** (1.0 / beta) * (a / e) ** ((1.0 - beta) / beta)


def _tilted_pieces(beta, s, rng, size):
    """``size`` exact draws at mass ``s`` by plain rejection; returns (draws, proposals)."""
    out = np.empty(size)
    filled = 0
    proposals = 0
    rate = math.exp(-s)
    while filled < size:
        need = size - filled
        batch = int(min(max(need / rate * 1.1 + 16, 64), 1 << 22))
        x = sample_positive_stable(beta, s, rng, batch)
        keep = x[rng.random(batch) < np.exp(-x)]
        take = min(keep.size, need)
        out[filled : filled + take] = keep[:take]
        filled += take
        proposals += batch
    return out, proposals


def sample_tilted_stable(spec: TiltedStableSpec, rng: np.random.Generator, size: int | None = None):
    """Draws with Laplace transform ``exp(-s[(lam + 1)^beta - 1])``.

    The law is infinitely divisible in ``s``, so a draw at mass ``s`` is the
    sum of ``n = ceil(s)`` independent draws at mass ``s / n``; each piece is
    accepted with probability ``exp(-s / n) >= e^-1``.
    """
    n_draws = 1 if size is None else int(size)
    if n_draws < 1:
        raise ParameterError(f"size must be >= 1, got {size}")
    pieces = max(1, math.ceil(spec.scale_mass))
    draws, proposals = _tilted_pieces(spec.beta, spec.scale_mass / pieces, rng, n_draws * pieces)
    w = draws.reshape(n_draws, pieces).sum(axis=1)
    log.debug(
        "tilted stable: beta=%g s=%g pieces=%d acceptance=%.4f",
        spec.beta, spec.scale_mass, pieces, n_draws * pieces / proposals,
    )
    return float(w[0]) if size is None else w


def conditional_moment_w(m: int, beta: float, gamma_value: float, v: float) -> float:
    """``E[W^m | V, gamma] = sum_j C(m, j, beta) (gamma v)^j``."""
    _check_beta(beta)
    if m < 1:
        raise ParameterError(f"moment order must be >= 1, got {m}")
    if gamma_value < 0 or v < 0:
        raise ParameterError("gamma_value and v must be >= 0")
    row = gfc_table(beta, m).row(m)
    x = gamma_value * v
    return float(sum(row[j] * x**j for j in range(1, m + 1)))


def gamma_moment(j: int, theta: float, beta: float) -> float:
    """``E[gamma^j] = prod_{s<j} (theta + s beta) / beta^j = (theta / beta)_(j)``."""
    return rising(theta / beta, j)


def unconditional_moment_w(m: int, beta: float, theta: float, v: float) -> float:
    """``E[W^m | V] = sum_j C(m, j, beta) (theta / beta)_(j) v^j``."""
    _check_beta(beta)
    if m < 1:
        raise ParameterError(f"moment order must be >= 1, got {m}")
    if not theta > 0 or v < 0:
        raise ParameterError(f"need theta > 0 and v >= 0, got theta={theta}, v={v}")
    row = gfc_table(beta, m).row(m)
    return float(sum(row[j] * gamma_moment(j, theta, beta) * v**j for j in range(1, m + 1)))
