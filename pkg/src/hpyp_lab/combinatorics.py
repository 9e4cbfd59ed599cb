"""Rising factorials, Stirling numbers and generalized factorial coefficients.

The generalized factorial coefficient ``C(m, j, beta)`` is evaluated from the
three-term recurrence

    C(m + 1, j) = (m - beta * j) * C(m, j) + beta * C(m, j - 1),

whose terms are all nonnegative for ``0 < beta < 1``.  The alternating
binomial sum and the Stirling-pair expansion are kept as exact rational
oracles (:func:`gfc_direct`, :func:`gfc_stirling_expansion`) and are not used
on any production path.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

import numpy as np
from scipy.special import gammaln

from .errors import ParameterError, RangeError

STIRLING_MAX_N = 30
ORACLE_MAX_M = 20

# beyond this many factors the log-gamma difference is cheaper than summing logs
_LOG_SUM_MAX_N = 4096


@dataclass(frozen=True)
class RisingFactorialValue:
    """Sign and natural-log magnitude of ``x (x+1) ... (x+n-1)``."""

    log_value: float
    sign: int

    @property
    def value(self) -> float:
        if self.sign == 0:
            return 0.0
        return self.sign * math.exp(self.log_value)


def rising_factorial(x: float, n: int) -> RisingFactorialValue:
    """Rising factorial ``(x)_(n)`` in sign/log-magnitude form.

    ``n = 0`` is the empty product and yields 1.
    """
    if n < 0:
        raise ParameterError(f"rising factorial order must be >= 0, got {n}")
    if n == 0:
        return RisingFactorialValue(0.0, 1)
    x = float(x)
    if x > 0 and n > _LOG_SUM_MAX_N:
        return RisingFactorialValue(float(gammaln(x + n) - gammaln(x)), 1)
    factors = x + np.arange(n, dtype=float)
    if np.any(factors == 0.0):
        return RisingFactorialValue(-math.inf, 0)
    negatives = int(np.count_nonzero(factors < 0))
    sign = -1 if negatives % 2 else 1
    return RisingFactorialValue(math.fsum(np.log(np.abs(factors))), sign)


def log_rising(x: float, n: int) -> float:
    """``log (x)_(n)`` for ``x > 0``."""
    if x <= 0:
        raise ParameterError(f"log_rising needs x > 0, got {x}")
    return rising_factorial(x, n).log_value


def rising(x: float, n: int) -> float:
    """Plain float value of ``(x)_(n)``."""
    return rising_factorial(x, n).value


def falling_factorial(x: float, n: int) -> RisingFactorialValue:
    """Falling factorial ``x (x-1) ... (x-n+1) = (-1)^n (-x)_(n)``."""
    r = rising_factorial(-x, n)
    return RisingFactorialValue(r.log_value, r.sign * (-1) ** n)


def _check_stirling_range(n: int, k: int) -> None:
    if n < 0 or k < 0:
        raise RangeError(f"Stirling arguments must be >= 0, got ({n}, {k})")
    if n > STIRLING_MAX_N:
        raise RangeError(f"Stirling numbers are capped at n <= {STIRLING_MAX_N}, got n={n}")


@lru_cache(maxsize=None)
def _stirling1_triangle() -> tuple[tuple[int, ...], ...]:
    rows = [[1]]
    for n in range(1, STIRLING_MAX_N + 1):
        prev = rows[-1] + [0]
        row = [0] * (n + 1)
        for k in range(1, n + 1):
            row[k] = prev[k - 1] + (n - 1) * prev[k]
        rows.append(row)
    return tuple(tuple(r) for r in rows)


@lru_cache(maxsize=None)
def _stirling2_triangle() -> tuple[tuple[int, ...], ...]:
    rows = [[1]]
    for n in range(1, STIRLING_MAX_N + 1):
        prev = rows[-1] + [0]
        row = [0] * (n + 1)
        for k in range(1, n + 1):
            row[k] = prev[k - 1] + k * prev[k]
        rows.append(row)
    return tuple(tuple(r) for r in rows)


def stirling_first_unsigned(n: int, k: int) -> int:
    """Unsigned Stirling number of the first kind (permutations of n with k cycles)."""
    _check_stirling_range(n, k)
    return _stirling1_triangle()[n][k] if k <= n else 0


def stirling_second(n: int, k: int) -> int:
    """Stirling number of the second kind (partitions of an n-set into k blocks)."""
    _check_stirling_range(n, k)
    return _stirling2_triangle()[n][k] if k <= n else 0


def _check_beta(beta: float) -> None:
    if not 0.0 < beta < 1.0:
        raise ParameterError(f"beta must lie in (0, 1), got {beta}")


@dataclass(frozen=True, eq=False)
class GfcTable:
    """Immutable triangle of generalized factorial coefficients.

    ``values[m, j]`` holds ``C(m, j, beta)``, or ``C(m, j, beta) / beta**j``
    when ``scaled`` is set.  The scaled table stays well conditioned as
    ``beta -> 0`` where it tends to the unsigned Stirling numbers.
    """

    beta: float
    max_m: int
    scaled: bool
    values: np.ndarray

    def __call__(self, m: int, j: int) -> float:
        if m > self.max_m:
            raise RangeError(f"table built up to m={self.max_m}, asked for m={m}")
        if j < 0 or j > m:
            return 0.0
        return float(self.values[m, j])

    def row(self, m: int) -> np.ndarray:
        """Coefficients ``[C(m, 0), ..., C(m, m)]`` as a polynomial in ascending powers."""
        return self.values[m, : m + 1]


@lru_cache(maxsize=256)
def gfc_table(beta: float, max_m: int, scaled: bool = False) -> GfcTable:
    """Build the coefficient triangle up to ``max_m`` by the positive recurrence."""
    _check_beta(beta)
    if max_m < 0:
        raise RangeError(f"max_m must be >= 0, got {max_m}")
    t = np.zeros((max_m + 1, max_m + 1))
    t[0, 0] = 1.0
    # unscaled: C(m+1,j) = (m - b j) C(m,j) + b C(m,j-1); scaled drops the b on the shift
    shift = 1.0 if scaled else beta
    for m in range(max_m):
        for j in range(1, m + 2):
            t[m + 1, j] = (m - beta * j) * t[m, j] + shift * t[m, j - 1]
    t.setflags(write=False)
    return GfcTable(beta=beta, max_m=max_m, scaled=scaled, values=t)


def gfc(m: int, j: int, beta: float) -> float:
    """Generalized factorial coefficient ``C(m, j, beta)``."""
    _check_beta(beta)
    if m < 0 or j < 0:
        raise ParameterError(f"gfc arguments must be >= 0, got ({m}, {j})")
    if j > m:
        return 0.0
    return gfc_table(beta, m)(m, j)


def _exact_rising(x: Fraction, n: int) -> Fraction:
    out = Fraction(1)
    for i in range(n):
        out *= x + i
    return out


def _check_oracle(m: int, j: int, beta: float) -> None:
    _check_beta(beta)
    if m > ORACLE_MAX_M:
        raise RangeError(f"oracle formulas are capped at m <= {ORACLE_MAX_M}, got {m}")
    if m < 0 or j < 0:
        raise ParameterError(f"gfc arguments must be >= 0, got ({m}, {j})")


def gfc_direct(m: int, j: int, beta: float) -> float:
    """Alternating binomial sum ``(1/j!) sum_k (-1)^k binom(j,k) (-k beta)_(m)``.

    Evaluated in exact rational arithmetic on the binary value of ``beta``;
    the float version cancels catastrophically already near m = 10.
    """
    _check_oracle(m, j, beta)
    b = Fraction(beta)
    total = sum(
        (-1) ** k * math.comb(j, k) * _exact_rising(-k * b, m) for k in range(j + 1)
    )
    return float(total / math.factorial(j))


def gfc_stirling_expansion(m: int, j: int, beta: float) -> float:
    """Expansion ``sum_l (-1)^(l-j) [m, l] {l, j} beta^l`` in exact arithmetic."""
    _check_oracle(m, j, beta)
    b = Fraction(beta)
    total = sum(
        (-1) ** (ell - j)
        * stirling_first_unsigned(m, ell)
        * stirling_second(ell, j)
        * b**ell
        for ell in range(j, m + 1)
    )
    return float(total)


@lru_cache(maxsize=None)
def _compositions(n: int, L: int) -> tuple[tuple[int, ...], ...]:
    if L == 1:
        return ((n,),)
    return tuple(
        (first,) + rest for first in range(n + 1) for rest in _compositions(n - first, L - 1)
    )


def compositions(n: int, L: int) -> tuple[tuple[int, ...], ...]:
    """All ``L``-tuples of nonnegative integers summing to ``n``, lexicographically."""
    if L < 1:
        raise ParameterError(f"number of parts must be >= 1, got {L}")
    if n < 0:
        raise ParameterError(f"total must be >= 0, got {n}")
    return _compositions(n, L)


def n_compositions(n: int, L: int) -> int:
    """``|M_{n,L}| = binom(n + L - 1, L - 1)``."""
    return math.comb(n + L - 1, L - 1)
