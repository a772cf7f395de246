"""Product input measures on a bounded domain.

Marginals are independent by construction. A marginal only has to answer
``mass(lo, hi)`` for arrays of interval endpoints inside its support, so new
marginal families plug in without touching the index engine.
"""
from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence, Tuple

import numpy as np

from src.errors import DimensionMismatchError, DomainError
from src.models.tree import Domain, Interval

# Slack for "inside the support" checks on endpoints that went through arithmetic
_SUPPORT_SLACK = 1e-12


class Marginal(ABC):
    """One-dimensional input distribution with bounded support."""

    lo: float
    hi: float

    @abstractmethod
    def cdf(self, x: np.ndarray) -> np.ndarray:
        pass

    def mass(self, lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
        """Probability of ``[lo, hi)`` elementwise; empty intervals get 0."""
        lo = np.asarray(lo, dtype=float)
        hi = np.asarray(hi, dtype=float)
        return np.where(hi > lo, self.cdf(hi) - self.cdf(lo), 0.0)

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        raise NotImplementedError(f"{type(self).__name__} does not implement sampling")


@dataclass(frozen=True)
class UniformMarginal(Marginal):
    lo: float
    hi: float

    def __post_init__(self):
        if not self.lo < self.hi:
            raise DomainError(f"Uniform marginal needs lo < hi, got [{self.lo}, {self.hi}]")

    def cdf(self, x: np.ndarray) -> np.ndarray:
        return np.clip((np.asarray(x, dtype=float) - self.lo) / (self.hi - self.lo), 0.0, 1.0)

    def mass(self, lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
        # Length ratio, so the full margin has mass exactly 1.0
        width = np.asarray(hi, dtype=float) - np.asarray(lo, dtype=float)
        return np.maximum(width, 0.0) / (self.hi - self.lo)

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        return rng.uniform(self.lo, self.hi, size=n)


@dataclass(frozen=True)
class ProductMeasure:
    """Independent marginals, one per domain dimension."""
    marginals: Tuple[Marginal, ...]

    def __post_init__(self):
        object.__setattr__(self, "marginals", tuple(self.marginals))
        if not self.marginals:
            raise DimensionMismatchError("ProductMeasure needs at least one marginal")

    @classmethod
    def uniform(cls, domain: Domain) -> "ProductMeasure":
        return cls(tuple(UniformMarginal(a, b) for a, b in zip(domain.lo, domain.hi)))

    @property
    def p(self) -> int:
        return len(self.marginals)

    def check_domain(self, domain: Domain) -> None:
        """Raise unless every marginal's support equals the domain margin."""
        if domain.p != self.p:
            raise DimensionMismatchError(f"Measure has p={self.p}, domain has p={domain.p}")
        for j, (mg, a, b) in enumerate(zip(self.marginals, domain.lo, domain.hi)):
            if mg.lo != a or mg.hi != b:
                raise DomainError(
                    f"Marginal {j + 1} support [{mg.lo}, {mg.hi}] differs from domain margin [{a}, {b}]"
                )

    def masses(self, dim: int, lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
        """Vectorized interval probabilities on one dimension, no support checks."""
        return self.marginals[dim].mass(lo, hi)

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        return np.column_stack([mg.sample(rng, n) for mg in self.marginals])


def _check_within(m: ProductMeasure, dim: int, iv: Interval) -> None:
    if not 0 <= dim < m.p:
        raise DimensionMismatchError(f"Dimension {dim + 1} out of range for p={m.p}")
    mg = m.marginals[dim]
    if iv.lo < mg.lo - _SUPPORT_SLACK or iv.hi > mg.hi + _SUPPORT_SLACK or iv.lo > iv.hi:
        raise DomainError(f"Interval [{iv.lo}, {iv.hi}] outside support [{mg.lo}, {mg.hi}] of dimension {dim + 1}")


def interval_prob(m: ProductMeasure, dim: int, iv: Optional[Interval]) -> float:
    """
    Probability mass of an interval under one marginal.

    Args:
        m: Product measure
        dim: 0-based dimension
        iv: Interval inside the marginal's support; None is the empty interval

    Returns:
        Probability in [0, 1]

    Raises:
        DomainError: If the interval leaves the support
    """
    if iv is None:
        return 0.0
    _check_within(m, dim, iv)
    return float(m.masses(dim, np.array(iv.lo), np.array(iv.hi)))


def box_prob(m: ProductMeasure, dims: Iterable[int], box: Sequence[Optional[Interval]]) -> float:
    """Product of ``interval_prob`` over ``dims``; ``box[i]`` is the interval for ``dims[i]``."""
    dims = list(dims)
    if len(dims) != len(box):
        raise DimensionMismatchError(f"{len(dims)} dimensions but {len(box)} intervals")
    prob = 1.0
    for d, iv in zip(dims, box):
        prob *= interval_prob(m, d, iv)
    return prob


def interval_intersect(a: Interval, b: Interval) -> Optional[Interval]:
    """Intersection of two intervals on the same dimension; None when empty."""
    lo = max(a.lo, b.lo)
    hi = min(a.hi, b.hi)
    if lo >= hi:
        return None
    if a.hi == b.hi:
        closed = a.closed and b.closed
    else:
        closed = a.closed if a.hi < b.hi else b.closed
    return Interval(lo, hi, closed=closed)
