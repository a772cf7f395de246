"""Split-count activity measures and the one-dimensional conditional expectation.

The conditional expectation ``h_i(t) = E[E(X) | X_i = t]`` of an ensemble is
piecewise constant with breakpoints at the ensemble's unique cutpoints on
dimension i; its variance is the first-order index V_i and, when all its
levels are distinct, its number of jumps equals the number of unique split
rules on x_i.
"""
from dataclasses import dataclass
from typing import Optional, Tuple
import logging

import numpy as np
import pandas as pd

from src.config.settings import settings
from src.errors import DimensionMismatchError, PreconditionError
from src.models.measure import ProductMeasure
from src.models.tree import Ensemble, Split, unique_cutpoints
from src.sensitivity.sobol import SobolEngine

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class PiecewiseConstant1D:
    """Function equal to ``values[c]`` on ``[breakpoints[c], breakpoints[c+1])`` (top cell closed)."""
    breakpoints: np.ndarray
    values: np.ndarray
    dim: int

    def __post_init__(self):
        b = np.asarray(self.breakpoints, dtype=float)
        v = np.asarray(self.values, dtype=float)
        if b.ndim != 1 or len(b) < 2 or np.any(np.diff(b) <= 0):
            raise PreconditionError("breakpoints must be strictly increasing with at least two entries")
        if len(v) != len(b) - 1:
            raise DimensionMismatchError(f"{len(v)} values for {len(b) - 1} cells")
        object.__setattr__(self, "breakpoints", b)
        object.__setattr__(self, "values", v)

    @property
    def n_cells(self) -> int:
        return len(self.values)

    def __call__(self, t: float) -> float:
        c = int(np.searchsorted(self.breakpoints, t, side="right")) - 1
        c = min(max(c, 0), self.n_cells - 1)
        return float(self.values[c])

    def cell_masses(self, measure: ProductMeasure) -> np.ndarray:
        return measure.masses(self.dim, self.breakpoints[:-1], self.breakpoints[1:])

    def mean(self, weights: np.ndarray) -> float:
        return float(np.dot(weights, self.values))

    def variance(self, weights: np.ndarray) -> float:
        """Variance of the levels under cell probabilities ``weights``."""
        centered = self.values - self.mean(weights)
        return float(np.dot(weights, centered * centered))


def one_way_counts(ens: Ensemble) -> np.ndarray:
    """Internal nodes splitting on each dimension, summed over trees."""
    counts = np.zeros(ens.p, dtype=int)
    for tree in ens.trees:
        for node in tree.nodes():
            if isinstance(node, Split):
                counts[node.rule.dim] += 1
    return counts


def unique_rule_counts(ens: Ensemble) -> np.ndarray:
    """Distinct (dimension, cutpoint) rules per dimension."""
    return np.array([len(unique_cutpoints(ens, i)) for i in range(ens.p)], dtype=int)


def cond_expect_1d(ens: Ensemble, measure: Optional[ProductMeasure], i: int) -> PiecewiseConstant1D:
    """
    Build ``E[E(X) | X_i = .]`` as a piecewise-constant function.

    Args:
        ens: Ensemble
        measure: Input measure (uniform over the domain if None)
        i: 0-based dimension

    Returns:
        PiecewiseConstant1D with breakpoints at the domain ends and every unique cutpoint on i
    """
    if not 0 <= i < ens.p:
        raise DimensionMismatchError(f"Dimension {i + 1} out of range for p={ens.p}")
    engine = SobolEngine(ens, measure)
    breakpoints = np.concatenate((
        [ens.domain.lo[i]], unique_cutpoints(ens, i), [ens.domain.hi[i]]
    ))

    surviving = engine.coeffs((i,))
    pruned = np.setdiff1d(np.arange(len(engine.table.mu)), surviving.leaf_index)
    not_i = [j for j in range(ens.p) if j != i]
    # Nodes never split on i cover the whole margin: their coefficients add a constant
    constant = float(np.sum(engine.table.mu[pruned] * np.prod(engine.probs[pruned][:, not_i], axis=1)))

    mids = 0.5 * (breakpoints[:-1] + breakpoints[1:])
    covers = (surviving.lo[:, 0][None, :] <= mids[:, None]) & (mids[:, None] < surviving.hi[:, 0][None, :])
    values = covers.astype(float) @ surviving.d + constant
    return PiecewiseConstant1D(breakpoints, values, i)


def jump_count(f: PiecewiseConstant1D, tol: Optional[float] = None) -> int:
    """Adjacent cells whose levels differ by more than ``tol``."""
    tol = settings.jump_tolerance if tol is None else tol
    return int(np.sum(np.abs(np.diff(f.values)) > tol))


def standardize(f: PiecewiseConstant1D) -> Tuple[PiecewiseConstant1D, np.ndarray]:
    """
    Center and scale the levels so their corrected sample variance equals the cell count.

    With equal mass 1/K on each of the K cells, the variance of the result is
    K - 1, the number of jumps.

    Args:
        f: Function with pairwise distinct levels and at least two cells

    Returns:
        (standardized function, equal cell masses)

    Raises:
        PreconditionError: If fewer than two cells or duplicate levels
    """
    K = f.n_cells
    if K < 2:
        raise PreconditionError("standardize needs at least two cells")
    if len(np.unique(f.values)) != K:
        raise PreconditionError("standardize needs pairwise distinct levels")
    centered = f.values - f.values.mean()
    s = f.values.std(ddof=1)
    levels = np.sqrt(K) * centered / s
    return PiecewiseConstant1D(f.breakpoints, levels, f.dim), np.full(K, 1.0 / K)


def count_table(posterior, first_order: Optional[np.ndarray] = None) -> pd.DataFrame:
    """
    Per-draw one-way counts, unique-rule counts and (optionally) first-order indices.

    Args:
        posterior: Sequence of ensembles
        first_order: Optional (N, p) array of S_i per draw

    Returns:
        DataFrame with columns draw, var, count, unique_rules[, S]
    """
    rows = []
    for j, ens in enumerate(posterior):
        counts = one_way_counts(ens)
        unique = unique_rule_counts(ens)
        for i in range(ens.p):
            row = {"draw": j, "var": i + 1, "count": int(counts[i]), "unique_rules": int(unique[i])}
            if first_order is not None:
                row["S"] = float(first_order[j][i])
            rows.append(row)
    return pd.DataFrame(rows)
