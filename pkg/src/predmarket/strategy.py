"""Buying strategies and budget accounting.

A predictor buys when its prediction entropy reaches a configured fraction
of the maximal entropy log(K), and it can only show purchase intent while
budget remains. Entropy is in nats throughout the package; the log base
cancels inside the buying rule either way.
"""

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class BuyingStrategy:
    """Entropy-threshold rule: buy iff entropy(p) >= threshold_fraction * ln K."""

    threshold_fraction: float

    def __post_init__(self):
        if not 0.0 <= self.threshold_fraction <= 1.0:
            raise ValueError(
                f"threshold_fraction must be in [0, 1], got {self.threshold_fraction}"
            )


@dataclass(frozen=True)
class Budget:
    """Remaining and initial purchase budget, both non-negative."""

    remaining: int
    initial: int

    def __post_init__(self):
        if not 0 <= self.remaining <= self.initial:
            raise ValueError(
                f"need 0 <= remaining <= initial, got {self.remaining}/{self.initial}"
            )

    @classmethod
    def fresh(cls, n: int) -> "Budget":
        return cls(remaining=n, initial=n)


def shannon_entropy(p) -> float:
    """Entropy of a probability vector in nats, with 0*ln(0) = 0."""
    p = np.asarray(p, dtype=np.float64)
    nz = p[p > 0.0]
    return float(-(nz * np.log(nz)).sum())


def wants_to_buy(s: BuyingStrategy, p, n_classes: int) -> bool:
    """True iff the prediction is uncertain enough to be worth one budget
    unit: entropy(p) >= threshold_fraction * ln(n_classes)."""
    return shannon_entropy(p) >= s.threshold_fraction * np.log(n_classes)


def shows_purchase_intent(b: Budget, wants: bool) -> bool:
    """A predictor shows intent only with budget remaining and desire to buy."""
    return b.remaining >= 1 and wants


def charge(b: Budget) -> Budget:
    """Spend one budget unit."""
    if b.remaining < 1:
        raise ValueError("cannot charge an exhausted budget")
    return Budget(remaining=b.remaining - 1, initial=b.initial)
