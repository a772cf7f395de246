"""Competition rankings of activity measures and the multi-stage discordance discrepancy.

Rank 1 is the most active item. Ties share the smallest rank of their group
and the following rank skips by the group size ("1224" ranking).
"""
from dataclasses import dataclass
from typing import Sequence, Tuple
import logging

import numpy as np
from scipy.stats import rankdata

from src.errors import RankingError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Ranking:
    ranks: Tuple[int, ...]

    def __post_init__(self):
        ranks = tuple(int(r) for r in self.ranks)
        object.__setattr__(self, "ranks", ranks)
        if not ranks:
            raise RankingError("Ranking must be nonempty")
        # Attainable competition ranking: a block of u ties at rank r is followed by rank r + u
        expected = 1
        for r, u in zip(*np.unique(ranks, return_counts=True)):
            if r != expected:
                raise RankingError(f"Not a standard-competition ranking: {ranks}")
            expected = r + u

    def __len__(self) -> int:
        return len(self.ranks)

    def __getitem__(self, i: int) -> int:
        return self.ranks[i]

    @property
    def array(self) -> np.ndarray:
        return np.asarray(self.ranks)


def competition_rank(values: Sequence[float], tie_tol: float = 0.0) -> Ranking:
    """
    Rank values with larger = more active = smaller rank number.

    Args:
        values: Activity measures
        tie_tol: Values within ``tie_tol`` of their neighbour in sorted order are tied (chained)

    Returns:
        Ranking in standard-competition form
    """
    v = np.asarray(values, dtype=float)
    if v.size == 0:
        raise RankingError("Cannot rank an empty vector")
    if tie_tol <= 0.0:
        return Ranking(tuple(rankdata(-v, method="min").astype(int)))

    order = np.argsort(-v, kind="stable")
    ranks = np.empty(len(v), dtype=int)
    group_rank = 1
    for pos, idx in enumerate(order):
        if pos > 0 and v[order[pos - 1]] - v[idx] > tie_tol:
            group_rank = pos + 1
        ranks[idx] = group_rank
    return Ranking(tuple(ranks))


def _check_pair(a: Ranking, b: Ranking) -> None:
    if len(a) != len(b):
        raise RankingError(f"Rankings have different lengths: {len(a)} and {len(b)}")


def discordances(rho_f: Ranking, rho_E: Ranking) -> np.ndarray:
    """
    Sequential discordances W_1..W_q of ``rho_E`` against the reference ``rho_f``.

    At each stage the items tied for most active in ``rho_f`` among those
    remaining are located within ``rho_E`` restricted to the remaining items;
    W_k is the best such position minus one. The item achieving it (lowest
    index on ties) is then removed.
    """
    _check_pair(rho_f, rho_E)
    f = rho_f.array
    e = rho_E.array
    remaining = list(range(len(f)))
    W = np.zeros(len(f), dtype=int)
    for k in range(len(f)):
        rem = np.array(remaining)
        best_f = f[rem].min()
        candidates = rem[f[rem] == best_f]
        # Position within rho_E among remaining items, ties sharing the best position
        positions = np.array([1 + np.sum(e[rem] < e[i]) for i in candidates])
        j = int(positions.min())
        W[k] = j - 1
        remaining.remove(int(candidates[np.argmin(positions)]))
    return W


def d_r(rho_f: Ranking, rho_E: Ranking) -> int:
    """Discrepancy ``2 * sum_k W_k``; not symmetric in its arguments when ties exist."""
    return int(2 * discordances(rho_f, rho_E).sum())


def kemeny_snell(alpha: Ranking, beta: Ranking) -> float:
    """Kemeny-Snell distance ``1/2 sum_ij |A_ij - B_ij|`` with A_ij in {-1, 0, 1}."""
    _check_pair(alpha, beta)
    a = alpha.array
    b = beta.array
    A = np.sign(a[None, :] - a[:, None])
    B = np.sign(b[None, :] - b[:, None])
    return 0.5 * float(np.abs(A - B).sum())


def max_discrepancy(q: int) -> int:
    """Largest possible d_r for q items (fully reversed, untied)."""
    return q * (q - 1)
