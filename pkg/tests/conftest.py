"""Shared fixtures: worked-example trees and a random ensemble factory."""
import numpy as np
import pytest

from src.models.tree import Domain, Ensemble, Leaf, Split, SplitRule, Tree

# Leaf values of the four-leaf example tree
FOUR_LEAF_MU = (1.0, 2.0, 3.0, 4.0)


def split(dim, cut, left, right):
    return Split(SplitRule(dim, cut), left, right)


@pytest.fixture
def four_leaf_tree():
    """Root x2 < 0.7; left child x1 < 0.2; right child x1 < 0.4."""
    mu1, mu2, mu3, mu4 = (Leaf(v) for v in FOUR_LEAF_MU)
    return Tree(split(1, 0.7, split(0, 0.2, mu1, mu2), split(0, 0.4, mu3, mu4)))


@pytest.fixture
def two_tree_ensemble():
    """Tree A: x_i < 0.5 -> {1, 100}; tree B: levels -2, 0, 2 on thirds of x_j."""
    tree_a = Tree(split(0, 0.5, Leaf(1.0), Leaf(100.0)))
    tree_b = Tree(split(1, 2.0 / 3.0, split(1, 1.0 / 3.0, Leaf(-2.0), Leaf(0.0)), Leaf(2.0)))
    return Ensemble((tree_a, tree_b), Domain.unit(2))


@pytest.fixture
def interaction_ensemble():
    """Indicator of x1 >= 0.5 and x2 >= 0.5."""
    tree = Tree(split(0, 0.5, Leaf(0.0), split(1, 0.5, Leaf(0.0), Leaf(1.0))))
    return Ensemble((tree,), Domain.unit(2))


def _grow(rng, lo, hi, n_leaves, grid):
    if n_leaves == 1:
        return Leaf(float(rng.normal()))
    p = len(lo)
    for d in rng.permutation(p):
        cuts = [c for c in grid if lo[d] < c < hi[d]]
        if cuts:
            break
    else:
        return Leaf(float(rng.normal()))
    c = float(cuts[rng.integers(len(cuts))])
    n_left = int(rng.integers(1, n_leaves))
    left_hi = list(hi)
    left_hi[d] = c
    right_lo = list(lo)
    right_lo[d] = c
    return Split(
        SplitRule(int(d), c),
        _grow(rng, lo, left_hi, n_left, grid),
        _grow(rng, right_lo, hi, n_leaves - n_left, grid),
    )


def random_ensemble(rng, p, max_trees=6, max_leaves=8, grid_size=8):
    """Random ensemble on the unit cube with cutpoints on a shared k/grid_size grid and N(0, 1) leaves."""
    grid = (np.arange(1, grid_size) / grid_size).tolist()
    trees = []
    for _ in range(int(rng.integers(1, max_trees + 1))):
        n_leaves = int(rng.integers(1, max_leaves + 1))
        trees.append(Tree(_grow(rng, [0.0] * p, [1.0] * p, n_leaves, grid)))
    return Ensemble(tuple(trees), Domain.unit(p))


@pytest.fixture
def make_ensemble():
    return random_ensemble
