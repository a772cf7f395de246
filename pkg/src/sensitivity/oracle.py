"""Independent checks for the exact engine.

``GridOracle`` enumerates the grid induced by all cutpoints: an ensemble is
constant on each grid cell, so marginalizing cell values with exact cell
probabilities gives every conditional expectation exactly. ``mc_sobol`` is a
pick-freeze Monte Carlo estimator for arbitrary vectorized functions.
"""
from dataclasses import dataclass
from itertools import combinations, product
from typing import Callable, Dict, Iterable, Iterator, Optional, Tuple
import logging
import math

import numpy as np

from src.config.settings import settings
from src.errors import BudgetExceededError, PreconditionError
from src.models.measure import ProductMeasure
from src.models.tree import Ensemble, Interval, unique_cutpoints
from src.sensitivity.sobol import IndexSet, make_index_set

logger = logging.getLogger(__name__)


class GridOracle:
    """Cutpoint-grid decomposition of one ensemble with memoized V_P."""

    def __init__(self, ens: Ensemble, measure: Optional[ProductMeasure] = None,
                 budget: Optional[int] = None):
        self.ens = ens
        self.measure = measure or ProductMeasure.uniform(ens.domain)
        self.measure.check_domain(ens.domain)
        budget = settings.cell_budget if budget is None else budget

        self.breakpoints = [
            np.concatenate(([ens.domain.lo[j]], unique_cutpoints(ens, j), [ens.domain.hi[j]]))
            for j in range(ens.p)
        ]
        self.shape = tuple(len(b) - 1 for b in self.breakpoints)
        n_cells = math.prod(self.shape)
        if n_cells > budget:
            raise BudgetExceededError(f"Grid has {n_cells} cells, budget is {budget}")
        if n_cells > budget // 2:
            logger.warning(f"Grid has {n_cells} cells, over half the budget of {budget}")

        self.weights = [
            self.measure.masses(j, b[:-1], b[1:]) for j, b in enumerate(self.breakpoints)
        ]
        # Midpoints never lie on a cut hyperplane
        mids = [0.5 * (b[:-1] + b[1:]) for b in self.breakpoints]
        mesh = np.meshgrid(*mids, indexing="ij")
        points = np.column_stack([g.ravel() for g in mesh])
        self.values = ens.predict(points).reshape(self.shape)
        self._V: Dict[IndexSet, float] = {}
        logger.debug(f"Grid oracle built with {n_cells} cells")

    @property
    def n_cells(self) -> int:
        return int(self.values.size)

    def cells(self) -> Iterator[Tuple[Tuple[Interval, ...], float, float]]:
        """Yield (cell box, cell probability, ensemble value) for every cell."""
        for idx in product(*(range(k) for k in self.shape)):
            box = tuple(
                Interval(self.breakpoints[j][c], self.breakpoints[j][c + 1],
                         closed=(c + 1 == self.shape[j]))
                for j, c in enumerate(idx)
            )
            prob = float(np.prod([self.weights[j][c] for j, c in enumerate(idx)]))
            yield box, prob, float(self.values[idx])

    def closed_variance(self, P: IndexSet) -> float:
        """Var(E[f | X_P]) by summing out the other axes."""
        if not P:
            return 0.0
        g = self.values
        for axis in sorted(set(range(self.ens.p)) - set(P), reverse=True):
            g = np.tensordot(g, self.weights[axis], axes=([axis], [0]))
        w = self.weights[P[0]]
        for axis in P[1:]:
            w = np.multiply.outer(w, self.weights[axis])
        mean = float(np.sum(w * g))
        return float(np.sum(w * (g - mean) ** 2))

    def sobol_V(self, P: IndexSet) -> float:
        if P not in self._V:
            value = self.closed_variance(P)
            for size in range(1, len(P)):
                for Q in combinations(P, size):
                    value -= self.sobol_V(Q)
            self._V[P] = value
        return self._V[P]


def grid_sobol_V(ens: Ensemble, measure: Optional[ProductMeasure], P: Iterable[int],
                 budget: Optional[int] = None) -> float:
    """
    Exact V_P by exhaustive enumeration of the cutpoint grid.

    Raises:
        BudgetExceededError: If the grid has more cells than ``budget``
    """
    oracle = GridOracle(ens, measure, budget)
    return oracle.sobol_V(make_index_set(P, ens.p))


@dataclass(frozen=True)
class MonteCarloSobol:
    """Pick-freeze estimates for one index set."""
    closed_variance: float   # Var(E[f | X_P])
    std_error: float         # standard error of closed_variance
    total_variance: float
    S: float                 # closed index Var(E[f | X_P]) / Var(f)
    S_std_error: float
    T: float                 # total effect of the group P


def mc_sobol(f: Callable[[np.ndarray], np.ndarray], p: int, P: Iterable[int], n_samples: int,
             seed: int, shards: int = 1) -> MonteCarloSobol:
    """
    Pick-freeze Monte Carlo estimate of Var(E[f | X_P]) on the unit cube.

    Two independent designs A and B are drawn; C takes the P columns from A
    and the rest from B, so f(A) and f(C) share X_P. The closed variance is
    estimated by ``mean(f(A) * (f(C) - f(B)))`` and the total effect of P by
    Jansen's ``mean((f(A) - f(D))**2) / 2`` where D is A with the P columns
    from B. Each shard draws from its own spawned seed, so results depend only
    on (seed, shards).

    Args:
        f: Vectorized function of an (n, p) array
        p: Input dimension
        P: 0-based index set
        n_samples: Total base sample size (>= 1000)
        seed: Master seed
        shards: Number of independent sample blocks

    Returns:
        MonteCarloSobol
    """
    if n_samples < 1000:
        raise PreconditionError(f"mc_sobol needs n_samples >= 1000, got {n_samples}")
    P = list(make_index_set(P, p))
    sizes = [n_samples // shards + (1 if s < n_samples % shards else 0) for s in range(shards)]

    fA, fB, fC, fD = [], [], [], []
    for child, n in zip(np.random.SeedSequence(seed).spawn(shards), sizes):
        rng = np.random.default_rng(child)
        A = rng.random((n, p))
        B = rng.random((n, p))
        C = B.copy()
        C[:, P] = A[:, P]
        D = A.copy()
        D[:, P] = B[:, P]
        fA.append(f(A))
        fB.append(f(B))
        fC.append(f(C))
        fD.append(f(D))
    fA, fB, fC, fD = (np.concatenate(v) for v in (fA, fB, fC, fD))

    samples = fA * (fC - fB)
    closed = float(samples.mean())
    se = float(samples.std(ddof=1) / math.sqrt(n_samples))
    total = float(np.var(np.concatenate((fA, fB)), ddof=1))
    total_effect = float(np.mean((fA - fD) ** 2) / 2.0)
    if total <= 0.0:
        return MonteCarloSobol(closed, se, 0.0, 0.0, 0.0, 0.0)
    return MonteCarloSobol(closed, se, total, closed / total, se / total, total_effect / total)
