import numpy as np
import pytest

from src.simulation.design import Scenario
from src.simulation.harness import METRICS, run_demo_counts, run_scenario, truth_for

TINY_SAMPLER = {"m": 5, "n_burn": 20, "grid_size": 20}


def tiny_scenario(function="morris", **overrides):
    values = dict(n_factor=4, replicates=2, n_draws=5, seed=11, sampler=TINY_SAMPLER)
    values.update(overrides)
    return Scenario(function, **values)


def test_truth_sources():
    published, S2 = truth_for(tiny_scenario("friedman", p_ratio=2))
    assert published.source == "published" and published.p == 10
    assert len(S2) == 45
    quad, _ = truth_for(tiny_scenario("friedman", truth_source="quadrature"))
    assert quad.source == "quadrature"
    assert quad.S[3] == pytest.approx(0.350, abs=3e-3)


def test_tied_truth_scores_zero_discrepancy():
    row = run_scenario(tiny_scenario(), progress=False)
    assert row.scenario == "morris(p=5,n=20,noise=0.1)"
    for key in ("dr_S", "dr_T", "dr_count_S", "dr_count_T", "dr_S2"):
        assert row.mean[key] == 0.0
    assert row.mean["l1_S"] > 0.0
    frame = row.to_frame()
    assert list(frame.columns) == ["scenario"] + [f"{k}_{s}" for k in METRICS for s in ("mean", "sd")]
    assert len(row.replicates_frame()) == 2


def test_replicates_do_not_depend_on_workers():
    scenario = tiny_scenario("bratley")
    serial = run_scenario(scenario, workers=1, progress=False)
    parallel = run_scenario(scenario, workers=2, progress=False)
    assert serial.mean == parallel.mean
    assert serial.replicates == parallel.replicates


def test_demo_counts_table():
    table = run_demo_counts(n=30, seed=3, n_draws=4, sampler=TINY_SAMPLER)
    assert list(table.columns) == ["draw", "var", "count", "unique_rules", "S"]
    assert len(table) == 12
    assert np.all((table["S"] >= 0.0) & (table["S"] <= 1.0))


@pytest.mark.slow
def test_demo_counts_favor_interacting_inputs():
    table = run_demo_counts(n=300, seed=5, n_draws=500, sampler={"m": 50, "n_burn": 500})
    means = table.groupby("var")[["count", "S"]].mean()
    assert means.loc[1, "count"] > means.loc[3, "count"]
    assert means.loc[2, "count"] > means.loc[3, "count"]
    assert means.loc[3, "S"] > means.loc[1, "S"]
    assert means.loc[3, "S"] == pytest.approx(0.75, abs=0.1)


@pytest.fixture(scope="module")
def friedman_row():
    scenario = Scenario("friedman", n_factor=50, noise_ratio=0.10, replicates=10, n_draws=400, seed=2,
                        sampler={"m": 50, "n_burn": 300})
    return run_scenario(scenario, workers=4, progress=False)


@pytest.mark.slow
def test_friedman_index_accuracy(friedman_row):
    assert 0.02 <= friedman_row.mean["l1_S"] <= 0.15
    assert 0.05 <= friedman_row.mean["l1_T"] <= 0.30


@pytest.mark.slow
def test_friedman_indices_outrank_counts(friedman_row):
    assert friedman_row.mean["dr_S"] <= 2.5
    assert friedman_row.mean["dr_count_S"] >= 3.5
    wins = sum(r["dr_S"] < r["dr_count_S"] for r in friedman_row.replicates)
    assert wins >= 8
