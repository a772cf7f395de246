import math

import numpy as np
import pytest
from scipy.stats import multivariate_normal

from src.errors import ConfigError, DataError, DimensionMismatchError
from src.models.tree import Domain, Leaf, Tree
from src.sampler.bart import (
    BartSampler, Dataset, SamplerConfig, fit, log_marginal_likelihood, predict, sigma_trend,
)
from src.sensitivity.sobol import report
from src.simulation.design import maximin_lhd
from src.simulation.test_functions import get_function
from tests.conftest import split


def small_config(**overrides):
    values = dict(m=5, n_draws=5, n_burn=5, grid_size=20, seed=1, progress=False)
    values.update(overrides)
    return SamplerConfig(**values)


@pytest.fixture
def toy_data():
    rng = np.random.default_rng(0)
    X = rng.random((60, 3))
    y = 4.0 * (X[:, 0] > 0.5) + X[:, 1] + 0.1 * rng.standard_normal(60)
    return Dataset(X, y)


def test_stump_marginal_likelihood_closed_form():
    n = 25
    X = np.random.default_rng(1).random((n, 2))
    value = log_marginal_likelihood(Tree(Leaf(0.0)), X, np.zeros(n), sigma=1.0, leaf_prior_sd=1.0)
    expected = -0.5 * n * math.log(2.0 * math.pi) - 0.5 * math.log1p(n)
    assert value == pytest.approx(expected, rel=1e-12)


def test_marginal_likelihood_matches_gaussian_density():
    rng = np.random.default_rng(2)
    n, sigma, tau = 20, 0.7, 1.3
    X = rng.random((n, 2))
    r = rng.standard_normal(n)
    tree = Tree(split(0, 0.5, Leaf(0.0), split(1, 0.4, Leaf(0.0), Leaf(0.0))))
    leaf = tree.apply(X)
    Z = np.eye(tree.n_leaves)[leaf]
    cov = sigma ** 2 * np.eye(n) + tau ** 2 * Z @ Z.T
    expected = multivariate_normal(np.zeros(n), cov).logpdf(r)
    assert log_marginal_likelihood(tree, X, r, sigma, tau) == pytest.approx(expected, rel=1e-9)


def test_marginal_likelihood_is_permutation_invariant():
    rng = np.random.default_rng(3)
    X = rng.random((40, 2))
    r = rng.standard_normal(40)
    tree = Tree(split(1, 0.3, Leaf(0.0), Leaf(0.0)))
    perm = rng.permutation(40)
    a = log_marginal_likelihood(tree, X, r, 1.0, 0.5)
    b = log_marginal_likelihood(tree, X[perm], r[perm], 1.0, 0.5)
    assert a == pytest.approx(b, rel=1e-12)


def test_empty_leaf_has_zero_likelihood():
    X = np.array([[0.1], [0.2], [0.3]])
    tree = Tree(split(0, 0.9, Leaf(0.0), Leaf(0.0)))
    assert log_marginal_likelihood(tree, X, np.zeros(3), 1.0, 1.0) == -np.inf


def test_config_validation():
    with pytest.raises(ConfigError):
        SamplerConfig(m=0)
    with pytest.raises(ConfigError):
        SamplerConfig(alpha=1.0)
    with pytest.raises(ConfigError):
        SamplerConfig.from_settings(trees=10)
    assert SamplerConfig.from_settings(m=3).m == 3


def test_dataset_validation():
    with pytest.raises(DimensionMismatchError):
        Dataset(np.zeros((3, 2)), np.zeros(4))
    with pytest.raises(DataError):
        Dataset(np.zeros((3, 2)), np.array([0.0, np.nan, 1.0]))
    with pytest.raises(DataError):
        Dataset(np.zeros((1, 2)), np.zeros(1))


def test_data_outside_domain():
    data = Dataset(np.array([[0.5], [1.5]]), np.array([0.0, 1.0]))
    with pytest.raises(DataError):
        BartSampler(data, small_config())


def test_leaf_prior_scale(toy_data):
    cfg = small_config(m=8, k=2.0)
    sampler = BartSampler(toy_data, cfg)
    assert sampler.tau == pytest.approx(np.ptp(toy_data.y) / (2.0 * 2.0 * math.sqrt(8)))
    assert sampler.grid[0][0] == pytest.approx(1.0 / 21.0)


def test_fit_is_deterministic(toy_data):
    X_test = np.random.default_rng(5).random((50, 3))
    a = fit(toy_data, small_config())
    b = fit(toy_data, small_config())
    assert len(a) == 5
    for da, db in zip(a, b):
        assert da.sigma == db.sigma
        np.testing.assert_array_equal(da.ensemble.predict(X_test), db.ensemble.predict(X_test))


def test_fit_workers_do_not_change_draws(toy_data):
    cfg = small_config(n_chains=2)
    X_test = np.random.default_rng(6).random((20, 3))
    serial = fit(toy_data, cfg, workers=1)
    parallel = fit(toy_data, cfg, workers=2)
    assert len(serial) == len(parallel) == 10
    for a, b in zip(serial, parallel):
        np.testing.assert_array_equal(a.ensemble.predict(X_test), b.ensemble.predict(X_test))


def test_exported_draws_are_valid_ensembles(toy_data):
    draws = fit(toy_data, small_config(n_draws=10))
    for d in draws:
        assert d.sigma > 0.0
        assert d.ensemble.m == 5
        assert d.ensemble.domain == Domain.unit(3)
        rep = report(d.ensemble, max_order=1)
        assert np.all(rep.first_order >= 0.0)
    prediction = predict(draws, toy_data.X)
    assert prediction.shape == (toy_data.n,)


def test_constant_responses():
    X = np.random.default_rng(7).random((30, 2))
    data = Dataset(X, np.full(30, 3.0))
    assert data.constant_y
    draws = fit(data, small_config())
    np.testing.assert_allclose(predict(draws, X), 3.0, atol=1e-6)


def test_sigma_trend():
    rng = np.random.default_rng(8)
    trace = 1.0 + 0.01 * np.arange(500) + 0.05 * rng.standard_normal(500)
    trend = sigma_trend(trace)
    assert trend["slope"] == pytest.approx(0.01, abs=1e-3)
    assert trend["p_value"] < 1e-6
    flat = sigma_trend(1.0 + 0.05 * rng.standard_normal(500))
    assert abs(flat["slope"]) < 1e-3


def test_sampler_records_moves(toy_data):
    sampler = BartSampler(toy_data, small_config())
    sampler.run()
    diag = sampler.diagnostics
    assert diag.birth_proposed > 0
    assert 0.0 <= diag.birth_rate <= 1.0
    assert len(diag.sigma_trace) == 10


@pytest.mark.slow
def test_prior_only_tree_sizes():
    rng = np.random.default_rng(9)
    data = Dataset(rng.random((10, 5)), rng.standard_normal(10))
    cfg = SamplerConfig(m=1, n_draws=40_000, n_burn=1000, grid_size=100, seed=3, progress=False,
                        likelihood=False)
    draws = BartSampler(data, cfg).run()
    sizes = np.array([d.ensemble.trees[0].n_leaves for d in draws])
    alpha = 0.95
    # Root splits, both children stop: alpha * (1 - alpha / 4)^2
    assert np.mean(sizes == 1) == pytest.approx(1.0 - alpha, abs=0.02)
    assert np.mean(sizes == 2) == pytest.approx(alpha * (1.0 - alpha / 4.0) ** 2, abs=0.04)


@pytest.fixture(scope="module")
def friedman_fit():
    fn = get_function("friedman")
    X = maximin_lhd(250, 5, 10, restarts=5)
    y = fn(X) + np.random.default_rng(10).normal(0.0, 0.5, size=250)
    draws = fit(Dataset(X, y), SamplerConfig(m=50, n_draws=500, n_burn=500, seed=4, progress=False))
    return fn, draws


@pytest.mark.slow
def test_friedman_fit_quality(friedman_fit):
    fn, draws = friedman_fit
    X_test = maximin_lhd(500, 5, 11, restarts=5)
    rmse = math.sqrt(np.mean((predict(draws, X_test) - fn(X_test)) ** 2))
    assert rmse < 1.5
    assert np.mean([d.sigma for d in draws]) == pytest.approx(0.5, abs=0.3)


@pytest.mark.slow
def test_friedman_sigma_chain_has_no_trend(friedman_fit):
    _, draws = friedman_fit
    # Thinned so neighbouring draws are close to independent
    trend = sigma_trend([d.sigma for d in draws][::10])
    assert trend["p_value"] > 0.001
