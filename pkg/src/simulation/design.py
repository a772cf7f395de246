"""Space-filling designs and synthetic datasets for simulation scenarios."""
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Optional, Union
import logging

import numpy as np
import yaml
from scipy.spatial.distance import pdist

from src.config.settings import settings
from src.errors import ConfigError, PreconditionError
from src.sampler.bart import Dataset
from src.simulation.test_functions import get_function, quadrature_report

logger = logging.getLogger(__name__)

SeedLike = Union[int, np.random.SeedSequence]


def _latin_hypercube(n: int, p: int, rng: np.random.Generator) -> np.ndarray:
    """One jittered point per stratum [k/n, (k+1)/n) in every column."""
    strata = np.column_stack([rng.permutation(n) for _ in range(p)])
    return (strata + rng.random((n, p))) / n


def maximin_lhd(n: int, p: int, seed: SeedLike, restarts: Optional[int] = None) -> np.ndarray:
    """
    Random-restart maximin Latin hypercube on [0, 1]^p.

    Candidates are drawn from a single generator seeded by ``seed``; the one
    with the largest minimum pairwise distance wins, the earliest on ties. The
    first candidate is therefore the same for any number of restarts.

    Args:
        n: Number of points (>= 2)
        p: Number of dimensions
        seed: Seed or SeedSequence
        restarts: Number of candidates (settings.lhd_restarts if None)

    Returns:
        Array (n, p)
    """
    if n < 2:
        raise PreconditionError(f"maximin_lhd needs n >= 2, got {n}")
    if p < 1:
        raise PreconditionError(f"maximin_lhd needs p >= 1, got {p}")
    restarts = settings.lhd_restarts if restarts is None else restarts
    if restarts < 1:
        raise PreconditionError(f"maximin_lhd needs restarts >= 1, got {restarts}")

    rng = np.random.default_rng(seed)
    best = _latin_hypercube(n, p, rng)
    if restarts == 1:
        return best
    best_score = pdist(best).min()
    for _ in range(restarts - 1):
        candidate = _latin_hypercube(n, p, rng)
        score = pdist(candidate).min()
        if score > best_score:
            best, best_score = candidate, score
    logger.debug(f"Maximin LHD n={n}, p={p}: min distance {best_score:.4f} after {restarts} restarts")
    return best


@dataclass(frozen=True)
class Scenario:
    """One simulation setting: function, p = p_ratio * p0, n = n_factor * p, noise ratio."""
    function: str
    p_ratio: int = 1
    n_factor: int = 50
    noise_ratio: float = 0.10
    replicates: int = field(default_factory=lambda: settings.replicates)
    n_draws: int = field(default_factory=lambda: int(settings.sampler_defaults.get("n_draws", 1000)))
    seed: int = field(default_factory=lambda: settings.master_seed)
    truth_source: str = field(default_factory=lambda: settings.truth_source)
    sampler: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        get_function(self.function)
        if self.p_ratio < 1:
            raise ConfigError(f"p_ratio must be >= 1, got {self.p_ratio}")
        if self.n_factor < 1:
            raise ConfigError(f"n_factor must be >= 1, got {self.n_factor}")
        if self.noise_ratio < 0:
            raise ConfigError(f"noise_ratio must be >= 0, got {self.noise_ratio}")
        if self.replicates < 1 or self.n_draws < 1:
            raise ConfigError("replicates and n_draws must be >= 1")
        if self.truth_source not in ("published", "quadrature"):
            raise ConfigError(f"truth_source must be 'published' or 'quadrature', got {self.truth_source!r}")

    @property
    def p0(self) -> int:
        return get_function(self.function).p0

    @property
    def p(self) -> int:
        return self.p_ratio * self.p0

    @property
    def n(self) -> int:
        return self.n_factor * self.p

    @property
    def id(self) -> str:
        return f"{self.function}(p={self.p},n={self.n},noise={self.noise_ratio:g})"

    @classmethod
    def from_yaml(cls, path: Union[str, Path]) -> "Scenario":
        """Load a scenario file; keys mirror the dataclass fields."""
        try:
            with open(path, 'r') as f:
                raw = yaml.safe_load(f) or {}
        except FileNotFoundError as e:
            logger.error(f"Scenario file not found: {path}")
            raise ConfigError(f"Scenario file not found: {path}") from e
        if "function" not in raw:
            raise ConfigError(f"Scenario file {path} is missing key: function")
        unknown = set(raw) - set(cls.__dataclass_fields__)
        if unknown:
            raise ConfigError(f"Unknown scenario keys in {path}: {', '.join(sorted(unknown))}")
        return cls(**raw)


def make_dataset(scenario: Scenario, seed: SeedLike, lhd_restarts: Optional[int] = None) -> Dataset:
    """
    Draw one replicate: maximin LHD inputs and ``f(x) + N(0, sigma^2)`` responses.

    ``sigma^2`` is the scenario's noise ratio times Var(f(X)) as recomputed by
    quadrature, which differs from the published variance for the g-function.
    The design and the noise use independent children of ``seed``.
    """
    fn = get_function(scenario.function)
    if not isinstance(seed, np.random.SeedSequence):
        seed = np.random.SeedSequence(seed)
    # Same children as seed.spawn(2) on a fresh sequence, without mutating ``seed``
    design_seed, noise_seed = (
        np.random.SeedSequence(seed.entropy, spawn_key=seed.spawn_key + (k,)) for k in range(2)
    )
    X = maximin_lhd(scenario.n, scenario.p, design_seed, lhd_restarts)
    y = fn(X)
    if scenario.noise_ratio > 0:
        sigma = np.sqrt(scenario.noise_ratio * quadrature_report(scenario.function).variance)
        y = y + np.random.default_rng(noise_seed).normal(0.0, sigma, size=len(y))
    return Dataset(X, y)
