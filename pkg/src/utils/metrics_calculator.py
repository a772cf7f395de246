from typing import Optional, Sequence
import logging

import numpy as np

from src.config.settings import settings
from src.errors import DimensionMismatchError, RankingError
from src.sensitivity.ranking import competition_rank, d_r, max_discrepancy

logger = logging.getLogger(__name__)


class MetricsCalculator:
    """Accuracy and ranking metrics of per-draw activity measures against a truth vector"""

    @staticmethod
    def l1_metric(per_draw: Sequence[Sequence[float]], truth: Sequence[float]) -> float:
        """
        Posterior-mean L1 distance to the truth

        Args:
            per_draw: One vector of indices per posterior draw
            truth: True indices

        Returns:
            Mean over draws of sum_i |S_i - S_i^f|
        """
        values = np.atleast_2d(np.asarray(per_draw, dtype=float))
        truth = np.asarray(truth, dtype=float)
        if values.shape[1] != truth.shape[0]:
            raise DimensionMismatchError(
                f"Index vectors have length {values.shape[1]}, truth has {truth.shape[0]}"
            )
        return float(np.mean(np.abs(values - truth).sum(axis=1)))

    @staticmethod
    def per_draw_d_r(per_draw: Sequence[Sequence[float]], truth: Sequence[float],
                     tie_tol: Optional[float] = None) -> np.ndarray:
        """
        Ranking discrepancy of every draw against the truth ranking

        Args:
            per_draw: One activity vector per draw (indices or counts)
            truth: True indices
            tie_tol: Tie tolerance for the truth ranking (settings.tie_tolerance if None)

        Returns:
            Array of d_r values, one per draw
        """
        tie_tol = settings.tie_tolerance if tie_tol is None else tie_tol
        values = np.atleast_2d(np.asarray(per_draw, dtype=float))
        truth = np.asarray(truth, dtype=float)
        if values.shape[1] != truth.shape[0]:
            raise DimensionMismatchError(
                f"Activity vectors have length {values.shape[1]}, truth has {truth.shape[0]}"
            )
        rho_f = competition_rank(truth, tie_tol=tie_tol)
        limit = max_discrepancy(len(truth))
        out = np.array([d_r(rho_f, competition_rank(v)) for v in values], dtype=int)
        if np.any(out > limit):
            raise RankingError(f"d_r exceeded its maximum {limit}")
        return out

    @staticmethod
    def d_r_metric(per_draw: Sequence[Sequence[float]], truth: Sequence[float],
                   tie_tol: Optional[float] = None) -> float:
        """Mean d_r over draws"""
        return float(MetricsCalculator.per_draw_d_r(per_draw, truth, tie_tol).mean())
