from .sobol import SobolEngine, SobolReport, PosteriorReport, aggregate, report
from .activity import PiecewiseConstant1D, cond_expect_1d, jump_count, one_way_counts, unique_rule_counts
from .ranking import Ranking, competition_rank, d_r, discordances, kemeny_snell

__all__ = [
    'SobolEngine', 'SobolReport', 'PosteriorReport', 'aggregate', 'report',
    'PiecewiseConstant1D', 'cond_expect_1d', 'jump_count', 'one_way_counts', 'unique_rule_counts',
    'Ranking', 'competition_rank', 'd_r', 'discordances', 'kemeny_snell',
]
