"""Process parameters and truncation settings."""
from __future__ import annotations

from dataclasses import asdict, dataclass

from .errors import ParameterError

TAIL_MODES = ("drop", "mean")


@dataclass(frozen=True)
class Params:
    """Level-one ``(alpha, theta0)`` and level-two ``(beta, theta)`` parameters."""

    alpha: float
    theta0: float
    beta: float
    theta: float

    def __post_init__(self):
        self.validate()

    def validate(self) -> "Params":
        if not 0.0 < self.alpha < 1.0:
            raise ParameterError(f"alpha must lie in (0, 1), got {self.alpha}")
        if not 0.0 < self.beta < 1.0:
            raise ParameterError(f"beta must lie in (0, 1), got {self.beta}")
        if not self.theta0 > -self.alpha:
            raise ParameterError(f"theta0 must exceed -alpha, got {self.theta0}")
        if not self.theta > -self.beta:
            raise ParameterError(f"theta must exceed -beta, got {self.theta}")
        return self

    @property
    def c(self) -> float:
        """Finite-scale ratio ``theta0 / theta``."""
        return self.theta0 / self.theta

    @classmethod
    def from_ratio(cls, alpha: float, beta: float, theta: float, c: float) -> "Params":
        return cls(alpha=alpha, theta0=c * theta, beta=beta, theta=theta)

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class TruncationPolicy:
    """When to stop breaking sticks.

    Stops at the first stick leaving residual mass ``<= epsilon``, or at
    ``k_max`` sticks (flagged as capped).  ``tail`` decides what the
    hierarchical sampler does with each group's leftover mass: ``"drop"``
    leaves it unallocated, ``"mean"`` spreads it over the level-one atoms in
    proportion to their weights, which is its conditional expectation.
    """

    epsilon: float = 1e-10
    k_max: int = 10**6
    tail: str = "mean"

    def __post_init__(self):
        if not 0.0 < self.epsilon < 1.0:
            raise ParameterError(f"epsilon must lie in (0, 1), got {self.epsilon}")
        if self.k_max < 1:
            raise ParameterError(f"k_max must be >= 1, got {self.k_max}")
        if self.tail not in TAIL_MODES:
            raise ParameterError(f"tail must be one of {TAIL_MODES}, got {self.tail!r}")

    def to_dict(self) -> dict:
        return asdict(self)
