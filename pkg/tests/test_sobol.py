from dataclasses import dataclass
from itertools import combinations

import numpy as np
import pytest

from src.errors import DimensionMismatchError, NegativeVarianceError, PreconditionError
from src.models.measure import Marginal, ProductMeasure
from src.models.tree import Domain, Ensemble, Leaf, Tree
from src.sensitivity.sobol import (
    SobolEngine, aggregate, format_set, make_index_set, report, sobol_S, sobol_V,
    total_effects, total_variance, var_cond_expect,
)
from tests.conftest import random_ensemble, split


@dataclass(frozen=True)
class SquareCdfMarginal(Marginal):
    """Density 2x on [0, 1]."""
    lo: float = 0.0
    hi: float = 1.0

    def cdf(self, x):
        return np.clip(np.asarray(x, dtype=float), 0.0, 1.0) ** 2


@dataclass(frozen=True)
class SqrtMassMarginal(Marginal):
    """Non-additive interval mass sqrt(width); gives a negative kernel sum."""
    lo: float = 0.0
    hi: float = 1.0

    def cdf(self, x):
        return np.clip(np.asarray(x, dtype=float), 0.0, 1.0)

    def mass(self, lo, hi):
        return np.sqrt(np.maximum(np.asarray(hi, dtype=float) - np.asarray(lo, dtype=float), 0.0))


def test_two_tree_first_order(two_tree_ensemble):
    assert sobol_V(two_tree_ensemble, None, [0]) == pytest.approx(2450.25)
    assert sobol_V(two_tree_ensemble, None, [1]) == pytest.approx(8.0 / 3.0)
    assert sobol_V(two_tree_ensemble, None, [0, 1]) == pytest.approx(0.0, abs=1e-9)
    assert sobol_S(two_tree_ensemble, None, [0]) == pytest.approx(0.998913, abs=1e-6)
    assert total_variance(two_tree_ensemble) == pytest.approx(2450.25 + 8.0 / 3.0)


def test_interaction_indices(interaction_ensemble):
    rep = report(interaction_ensemble)
    assert rep.total_variance == pytest.approx(3.0 / 16.0)
    np.testing.assert_allclose(rep.first_order_V, [1.0 / 16.0, 1.0 / 16.0])
    assert rep.second_order_V[(0, 1)] == pytest.approx(1.0 / 16.0)
    np.testing.assert_allclose(rep.first_order, [1.0 / 3.0, 1.0 / 3.0])
    assert rep.S(0, 1) == pytest.approx(1.0 / 3.0)
    np.testing.assert_allclose(rep.total_effects, [2.0 / 3.0, 2.0 / 3.0])
    assert total_effects(interaction_ensemble, None, 0) == pytest.approx(2.0 / 3.0)


def test_nonuniform_marginal(interaction_ensemble):
    measure = ProductMeasure((SquareCdfMarginal(), SquareCdfMarginal()))
    assert total_variance(interaction_ensemble, measure) == pytest.approx(0.5625 * 0.4375)
    assert sobol_V(interaction_ensemble, measure, [0]) == pytest.approx(0.5625 * 0.75 * 0.25)


def test_decomposition_sums_to_total():
    rng = np.random.default_rng(0)
    for _ in range(30):
        p = int(rng.integers(1, 5))
        ens = random_ensemble(rng, p)
        engine = SobolEngine(ens)
        parts = [engine.sobol_V(P) for size in range(1, p + 1) for P in combinations(range(p), size)]
        assert sum(parts) == pytest.approx(engine.total_variance(), rel=1e-9, abs=1e-12)


def test_total_effect_is_sum_over_containing_sets():
    rng = np.random.default_rng(1)
    for _ in range(20):
        ens = random_ensemble(rng, 3)
        engine = SobolEngine(ens)
        for i in range(3):
            containing = [
                engine.sobol_V(P) for size in range(1, 4) for P in combinations(range(3), size) if i in P
            ]
            assert engine.total_effect_V(i) == pytest.approx(sum(containing), rel=1e-9, abs=1e-12)


def test_pruning_is_bitwise_identical():
    rng = np.random.default_rng(2)
    for _ in range(50):
        p = int(rng.integers(1, 5))
        ens = random_ensemble(rng, p)
        for size in range(1, p + 1):
            for P in combinations(range(p), size):
                assert var_cond_expect(ens, None, P, prune=True) == var_cond_expect(ens, None, P, prune=False)


def test_pruning_reduces_kernel_terms(two_tree_ensemble):
    engine = SobolEngine(two_tree_ensemble)
    assert engine.kernel_terms((0,)) == 3
    assert engine.kernel_terms((0,), prune=False) == 15


def test_shift_and_scale():
    rng = np.random.default_rng(3)
    ens = random_ensemble(rng, 3)
    shifted = Ensemble(
        (ens.trees[0].map_leaves(lambda v: v + 7.5),) + ens.trees[1:], ens.domain
    )
    scaled = Ensemble(tuple(t.map_leaves(lambda v: -3.0 * v) for t in ens.trees), ens.domain)
    base, moved, big = report(ens), report(shifted), report(scaled)
    np.testing.assert_allclose(moved.first_order_V, base.first_order_V, rtol=1e-9, atol=1e-12)
    np.testing.assert_allclose(big.first_order_V, 9.0 * base.first_order_V, rtol=1e-9, atol=1e-12)
    if not base.degenerate:
        np.testing.assert_allclose(big.first_order, base.first_order, rtol=1e-9, atol=1e-12)
        np.testing.assert_allclose(big.total_effects, base.total_effects, rtol=1e-9, atol=1e-12)


def test_inert_dimension_gets_zero():
    ens = Ensemble((Tree(split(0, 0.25, Leaf(0.0), Leaf(4.0))), Tree(Leaf(0.0))), Domain.unit(3))
    rep = report(ens)
    assert rep.first_order[1] == 0.0 and rep.first_order[2] == 0.0
    assert rep.total_effects[2] == 0.0
    assert rep.first_order[0] == pytest.approx(1.0)


def test_constant_ensemble_is_degenerate():
    ens = Ensemble((Tree(Leaf(3.0)), Tree(Leaf(-1.0))), Domain.unit(2))
    rep = report(ens)
    assert rep.degenerate
    assert rep.total_variance == 0.0
    assert np.all(rep.first_order == 0.0) and np.all(rep.total_effects == 0.0)
    assert sobol_S(ens, None, [0]) == 0.0


def test_higher_order_report():
    rng = np.random.default_rng(4)
    ens = random_ensemble(rng, 3, max_trees=4)
    rep = report(ens, max_order=3)
    assert set(rep.higher_order_V) == {(0, 1, 2)}
    frame = rep.to_frame()
    assert list(frame.columns) == ["draw", "set", "V", "S", "T"]
    assert frame["set"].tolist() == ["1", "2", "3", "1,2", "1,3", "2,3", "1,2,3"]
    assert len(rep.second_order_vector()) == 3


def test_index_set_validation():
    assert make_index_set([2, 0, 2], 3) == (0, 2)
    assert format_set((0, 2)) == "1,3"
    with pytest.raises(PreconditionError):
        make_index_set([], 3)
    with pytest.raises(DimensionMismatchError):
        make_index_set([3], 3)


def test_aggregate_means_per_draw_indices(two_tree_ensemble, interaction_ensemble):
    constant = Ensemble((Tree(Leaf(1.0)),), Domain.unit(2))
    post = aggregate([two_tree_ensemble, interaction_ensemble, constant], max_order=2)
    assert post.n_degenerate == 1
    assert post.n_used == 2
    expected = (report(two_tree_ensemble).first_order + report(interaction_ensemble).first_order) / 2
    np.testing.assert_allclose(post.mean.first_order, expected)
    summary = post.summary()
    assert summary["set"].tolist() == ["1", "2", "1,2"]
    assert summary.loc[0, "S_mean"] == pytest.approx(expected[0])
    assert (post.to_frame()["draw"] == "mean").sum() == 3


def test_aggregate_rejects_mixed_dimensions(two_tree_ensemble):
    other = Ensemble((Tree(Leaf(1.0)),), Domain.unit(3))
    with pytest.raises(DimensionMismatchError):
        aggregate([two_tree_ensemble, other])
    with pytest.raises(PreconditionError):
        aggregate([])


def test_aggregate_workers_match_serial():
    rng = np.random.default_rng(5)
    draws = [random_ensemble(rng, 3) for _ in range(8)]
    serial = aggregate(draws, workers=1)
    parallel = aggregate(draws, workers=2)
    np.testing.assert_array_equal(serial.mean.first_order, parallel.mean.first_order)
    np.testing.assert_array_equal(serial.mean.total_effects, parallel.mean.total_effects)


def test_negative_tolerance_scales_with_terms():
    # Kernel sum is 2 * (sqrt(.5) - .5) - 1 = -0.586 against sum|terms| = sqrt(2)
    ens = Ensemble((Tree(split(0, 0.5, Leaf(1.0), Leaf(1.0))),), Domain.unit(1))
    measure = ProductMeasure((SqrtMassMarginal(),))
    assert SobolEngine(ens, measure, negative_tolerance=0.5).var_cond_expect((0,)) == 0.0
    with pytest.raises(NegativeVarianceError):
        SobolEngine(ens, measure, negative_tolerance=0.3).var_cond_expect((0,))
