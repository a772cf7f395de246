"""Simulation scenarios: fit the sampler on synthetic replicates and score its indices.

For every replicate the posterior draws are turned into first-order,
second-order and total-effect indices plus one-way split counts. Each metric is
averaged over draws, and the MetricRow reports the mean and standard deviation
of those averages over replicates.
"""
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple
import logging

import numpy as np
import pandas as pd
from tqdm import tqdm

from src.config.settings import settings
from src.errors import DataError
from src.sampler.bart import SamplerConfig, fit
from src.sensitivity.activity import count_table, one_way_counts
from src.sensitivity.sobol import aggregate
from src.simulation.design import Scenario, make_dataset
from src.simulation.test_functions import TrueReport, quadrature_report, true_report
from src.utils.metrics_calculator import MetricsCalculator

logger = logging.getLogger(__name__)

METRICS = (
    "l1_S", "l1_S2", "l1_T",
    "dr_S", "dr_count_S", "dr_T", "dr_count_T", "dr_S2",
)


@dataclass
class MetricRow:
    """Mean and sd over replicates of every per-replicate metric."""
    scenario: str
    mean: Dict[str, float]
    sd: Dict[str, float]
    replicates: List[Dict[str, float]] = field(default_factory=list)

    def to_frame(self) -> pd.DataFrame:
        row = {"scenario": self.scenario}
        for key in METRICS:
            row[f"{key}_mean"] = self.mean[key]
            row[f"{key}_sd"] = self.sd[key]
        return pd.DataFrame([row])

    def replicates_frame(self) -> pd.DataFrame:
        frame = pd.DataFrame(self.replicates)
        frame.insert(0, "replicate", range(len(frame)))
        frame.insert(0, "scenario", self.scenario)
        return frame


def truth_for(scenario: Scenario) -> Tuple[TrueReport, np.ndarray]:
    """First-order/total truth per the scenario's source, and second-order truth from quadrature."""
    quad = quadrature_report(scenario.function, scenario.p)
    first = quad if scenario.truth_source == "quadrature" else true_report(scenario.function, scenario.p)
    return first, quad.second_order_vector()


def _sampler_config(scenario: Scenario, seed: int) -> SamplerConfig:
    overrides = dict(scenario.sampler)
    overrides.update(n_draws=scenario.n_draws, seed=seed, progress=False)
    return SamplerConfig.from_settings(**overrides)


def _replicate(args) -> Dict[str, float]:
    scenario, child = args
    data_seed, sampler_seed = child.spawn(2)
    data = make_dataset(scenario, data_seed)
    cfg = _sampler_config(scenario, int(sampler_seed.generate_state(1)[0]))
    draws = fit(data, cfg)
    posterior = aggregate([d.ensemble for d in draws], max_order=2, workers=1)

    used = [(d.ensemble, r) for d, r in zip(draws, posterior.draws) if not r.degenerate]
    if not used:
        raise DataError(f"Every posterior draw of a {scenario.id} replicate has zero variance")
    S = np.array([r.first_order for _, r in used])
    T = np.array([r.total_effects for _, r in used])
    S2 = np.array([r.second_order_vector() for _, r in used])
    counts = np.array([one_way_counts(e) for e, _ in used])

    truth, truth_S2 = truth_for(scenario)
    calc = MetricsCalculator
    return {
        "l1_S": calc.l1_metric(S, truth.S),
        "l1_S2": calc.l1_metric(S2, truth_S2),
        "l1_T": calc.l1_metric(T, truth.T),
        "dr_S": calc.d_r_metric(S, truth.S),
        "dr_count_S": calc.d_r_metric(counts, truth.S),
        "dr_T": calc.d_r_metric(T, truth.T),
        "dr_count_T": calc.d_r_metric(counts, truth.T),
        "dr_S2": calc.d_r_metric(S2, truth_S2),
        "n_degenerate": float(posterior.n_degenerate),
    }


def run_scenario(scenario: Scenario, workers: Optional[int] = None, progress: bool = True) -> MetricRow:
    """
    Run every replicate of a scenario and summarize the metrics.

    Replicate ``r`` uses the ``r``-th child of the scenario seed, so results
    do not depend on ``workers``.

    Args:
        scenario: Scenario to run
        workers: Replicates run in parallel (settings.harness_workers if None)
        progress: Show a progress bar over replicates

    Returns:
        MetricRow
    """
    workers = settings.harness_workers if workers is None else workers
    children = np.random.SeedSequence(scenario.seed).spawn(scenario.replicates)
    jobs = [(scenario, child) for child in children]
    logger.info(f"Running {scenario.id} with {scenario.replicates} replicates")

    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(tqdm(pool.map(_replicate, jobs), total=len(jobs), desc=scenario.id,
                                disable=not progress))
    else:
        results = [_replicate(job) for job in tqdm(jobs, desc=scenario.id, disable=not progress)]

    frame = pd.DataFrame(results)
    ddof = 1 if len(frame) > 1 else 0
    row = MetricRow(
        scenario=scenario.id,
        mean={key: float(frame[key].mean()) for key in METRICS},
        sd={key: float(frame[key].std(ddof=ddof)) for key in METRICS},
        replicates=results,
    )
    logger.info(
        f"{scenario.id}: L1(S)={row.mean['l1_S']:.3f}, L1(T)={row.mean['l1_T']:.3f}, "
        f"d_r(S)={row.mean['dr_S']:.3f}, d_r(count)={row.mean['dr_count_S']:.3f}"
    )
    return row


def run_demo_counts(n: int = 300, noise_ratio: float = 0.01, seed: Optional[int] = None,
                    n_draws: Optional[int] = None, sampler: Optional[Dict] = None) -> pd.DataFrame:
    """
    Fit ``(x1 - 0.5)(x2 - 0.5) + 0.5 (x3 - 0.5)`` and tabulate counts next to indices.

    The interacting inputs x1 and x2 collect more splits than x3, while x3
    carries the largest first-order index.

    Args:
        n: Number of observations (a multiple of 3)
        noise_ratio: Noise variance as a fraction of Var(f)
        seed: Master seed (settings.master_seed if None)
        n_draws: Posterior draws to keep (sampler default if None)
        sampler: Sampler overrides

    Returns:
        DataFrame with columns draw, var, count, unique_rules, S
    """
    seed = settings.master_seed if seed is None else seed
    extra = {} if n_draws is None else {"n_draws": n_draws}
    scenario = Scenario("count_demo", p_ratio=1, n_factor=max(1, n // 3), noise_ratio=noise_ratio,
                        replicates=1, seed=seed, sampler=dict(sampler or {}), **extra)
    data_seed, sampler_seed = np.random.SeedSequence(seed).spawn(2)
    data = make_dataset(scenario, data_seed)
    cfg = _sampler_config(scenario, int(sampler_seed.generate_state(1)[0]))
    draws = fit(data, cfg)
    ensembles = [d.ensemble for d in draws]
    posterior = aggregate(ensembles, max_order=1, workers=1)
    table = count_table(ensembles, first_order=np.array([r.first_order for r in posterior.draws]))

    means = table.groupby("var")[["count", "S"]].mean()
    logger.info(f"Count demo: mean counts {means['count'].round(2).tolist()}, mean S {means['S'].round(3).tolist()}")
    return table
