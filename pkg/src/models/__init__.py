from .tree import (
    Domain,
    Ensemble,
    Interval,
    Leaf,
    Split,
    SplitRule,
    TerminalRegion,
    Tree,
    ensemble_eval,
    terminal_regions,
    unique_cutpoints,
)
from .measure import ProductMeasure, UniformMarginal, box_prob, interval_intersect, interval_prob

__all__ = [
    'Domain', 'Ensemble', 'Interval', 'Leaf', 'Split', 'SplitRule', 'TerminalRegion', 'Tree',
    'ensemble_eval', 'terminal_regions', 'unique_cutpoints',
    'ProductMeasure', 'UniformMarginal', 'box_prob', 'interval_intersect', 'interval_prob',
]
