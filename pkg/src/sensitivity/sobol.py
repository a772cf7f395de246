"""Exact Sobol' indices of a sum-of-trees ensemble.

For an index set P the conditional expectation ``E[E(X) | X_P]`` is itself a
sum of indicator functions of the terminal boxes projected onto P, with
coefficients ``d_k = mu_k * P_{-P}(R_k^{-P})``. Its variance is the double sum

    sum_k sum_l d_k d_l (P_P(R_k^P & R_l^P) - P_P(R_k^P) P_P(R_l^P))

and only terminal nodes whose root path splits on some dimension of P can
contribute a nonzero covariance, so all other nodes are dropped before the
double sum is formed.
"""
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from itertools import combinations
from typing import Dict, Iterable, List, Optional, Sequence, Tuple
import logging
import math

import numpy as np
import pandas as pd
from tqdm import tqdm

from src.config.settings import settings
from src.errors import DimensionMismatchError, NegativeVarianceError, PreconditionError
from src.models.measure import ProductMeasure
from src.models.tree import Ensemble

logger = logging.getLogger(__name__)

IndexSet = Tuple[int, ...]


def make_index_set(dims: Iterable[int], p: int, allow_empty: bool = False) -> IndexSet:
    """Sorted, deduplicated 0-based index set, validated against ``p``."""
    P = tuple(sorted(set(int(d) for d in dims)))
    if not P and not allow_empty:
        raise PreconditionError("Index set must be nonempty")
    if P and (P[0] < 0 or P[-1] >= p):
        raise DimensionMismatchError(f"Index set {format_set(P)} out of range for p={p}")
    return P


def format_set(P: Sequence[int]) -> str:
    """1-based label used in reports and CSV files, e.g. ``"1,3"``."""
    return ",".join(str(d + 1) for d in P)


@dataclass(frozen=True)
class CondExpectCoeffs:
    """Surviving terminal nodes for index set ``dims`` and their coefficients."""
    dims: IndexSet
    d: np.ndarray           # (n,) coefficients d_k^{-P}
    lo: np.ndarray          # (n, |P|) projected box lower bounds
    hi: np.ndarray          # (n, |P|) projected box upper bounds
    leaf_index: np.ndarray  # (n,) rows of the ensemble's leaf table

    def __len__(self) -> int:
        return len(self.d)


class SobolEngine:
    """
    Index computations for one ensemble under one product measure.

    Per-leaf interval probabilities are computed once at construction; closed
    variances ``Var(E[E(X) | X_P])`` and the recursive ``V_P`` are memoized
    per engine, so one engine serves one posterior draw.
    """

    def __init__(self, ens: Ensemble, measure: Optional[ProductMeasure] = None,
                 negative_tolerance: Optional[float] = None, prune: bool = True):
        self.ens = ens
        self.measure = measure or ProductMeasure.uniform(ens.domain)
        self.measure.check_domain(ens.domain)
        self.negative_tolerance = (
            settings.negative_tolerance if negative_tolerance is None else negative_tolerance
        )
        self.prune = prune
        self.table = ens.leaf_table
        self.probs = np.column_stack([
            self.measure.masses(j, self.table.lo[:, j], self.table.hi[:, j]) for j in range(ens.p)
        ]) if len(self.table.mu) else np.zeros((0, ens.p))
        self._closed: Dict[IndexSet, float] = {}
        self.V_cache: Dict[IndexSet, float] = {}

    @property
    def p(self) -> int:
        return self.ens.p

    def coeffs(self, P: IndexSet, prune: Optional[bool] = None) -> CondExpectCoeffs:
        prune = self.prune if prune is None else prune
        P = list(P)
        not_P = [j for j in range(self.p) if j not in P]
        if prune:
            keep = self.table.split_mask[:, P].any(axis=1)
        else:
            keep = np.ones(len(self.table.mu), dtype=bool)
        d = self.table.mu[keep] * np.prod(self.probs[keep][:, not_P], axis=1)
        return CondExpectCoeffs(
            dims=tuple(P),
            d=d,
            lo=self.table.lo[keep][:, P],
            hi=self.table.hi[keep][:, P],
            leaf_index=np.flatnonzero(keep),
        )

    def kernel_terms(self, P: IndexSet, prune: Optional[bool] = None) -> int:
        """Number of (k, l) pairs with k <= l the double sum evaluates."""
        n = len(self.coeffs(P, prune))
        return n * (n + 1) // 2

    def var_cond_expect(self, P: IndexSet, prune: Optional[bool] = None) -> float:
        """
        Exact closed variance of P, memoized for the engine's pruning mode.

        A negative rounding residue is clamped to 0 when it lies within
        ``negative_tolerance * max(1, sum|terms|)`` of zero, so the tolerance is
        relative to the size of the kernel terms rather than absolute.

        Raises:
            NegativeVarianceError: If the sum is further below zero
        """
        P = tuple(P)
        use_cache = prune is None or prune == self.prune
        if use_cache and P in self._closed:
            return self._closed[P]
        value = self._var_cond_expect(P, self.prune if prune is None else prune)
        if use_cache:
            self._closed[P] = value
        return value

    def _var_cond_expect(self, P: IndexSet, prune: bool) -> float:
        if not P:
            return 0.0
        c = self.coeffs(P, prune)
        n = len(c)
        if n == 0:
            return 0.0

        iu, ju = np.triu_indices(n)
        joint = np.ones(len(iu))
        marg = np.ones(n)
        for col, j in enumerate(P):
            marg *= self.probs[c.leaf_index, j]
            joint *= self.measure.masses(
                j, np.maximum(c.lo[iu, col], c.lo[ju, col]), np.minimum(c.hi[iu, col], c.hi[ju, col])
            )
        terms = c.d[iu] * c.d[ju] * (joint - marg[iu] * marg[ju])
        terms[iu != ju] *= 2.0

        # fsum is exact-rounded, so zero terms from unpruned nodes never change the result
        value = math.fsum(terms.tolist())
        if value < 0.0:
            scale = max(1.0, math.fsum(np.abs(terms).tolist()))
            if value < -self.negative_tolerance * scale:
                raise NegativeVarianceError(
                    f"negative variance beyond tolerance: {value!r} for P={{{format_set(P)}}}"
                )
            value = 0.0
        return value

    def total_variance(self) -> float:
        return self.var_cond_expect(tuple(range(self.p)))

    def sobol_V(self, P: IndexSet) -> float:
        P = tuple(P)
        if P in self.V_cache:
            return self.V_cache[P]
        value = self.var_cond_expect(P)
        for size in range(1, len(P)):
            for Q in combinations(P, size):
                value -= self.sobol_V(Q)
        self.V_cache[P] = value
        return value

    def total_effect_V(self, i: int) -> float:
        """Unnormalized total effect ``Var - Var(E[E(X) | X_{-i}])``."""
        rest = tuple(j for j in range(self.p) if j != i)
        return self.total_variance() - self.var_cond_expect(rest)


@dataclass
class SobolReport:
    """Indices of one ensemble. Keys of the dict fields are 0-based sorted tuples."""
    p: int
    total_variance: float
    first_order_V: np.ndarray
    first_order: np.ndarray
    second_order_V: Dict[IndexSet, float]
    second_order: Dict[IndexSet, float]
    total_effects_V: np.ndarray
    total_effects: np.ndarray
    higher_order_V: Dict[IndexSet, float] = field(default_factory=dict)
    higher_order: Dict[IndexSet, float] = field(default_factory=dict)
    degenerate: bool = False

    def S(self, *dims: int) -> float:
        """Normalized index of any computed set, e.g. ``report.S(0, 1)``."""
        P = tuple(sorted(dims))
        if len(P) == 1:
            return float(self.first_order[P[0]])
        if len(P) == 2:
            return self.second_order[P]
        return self.higher_order[P]

    def second_order_vector(self) -> np.ndarray:
        """S_ij over all pairs i < j in lexicographic order."""
        return np.array([self.second_order[pair] for pair in combinations(range(self.p), 2)])

    def to_frame(self, draw: Optional[int] = None) -> pd.DataFrame:
        """Rows (draw, set, V, S, T); T is only defined for single-variable sets."""
        rows = []
        for i in range(self.p):
            rows.append((draw, format_set((i,)), self.first_order_V[i], self.first_order[i], self.total_effects[i]))
        for P in sorted(self.second_order, key=lambda k: k):
            rows.append((draw, format_set(P), self.second_order_V[P], self.second_order[P], np.nan))
        for P in sorted(self.higher_order, key=lambda k: (len(k), k)):
            rows.append((draw, format_set(P), self.higher_order_V[P], self.higher_order[P], np.nan))
        return pd.DataFrame(rows, columns=["draw", "set", "V", "S", "T"])


def cond_expect_coeffs(ens: Ensemble, measure: Optional[ProductMeasure], P: Iterable[int]) -> CondExpectCoeffs:
    engine = SobolEngine(ens, measure)
    return engine.coeffs(make_index_set(P, ens.p, allow_empty=True))


def var_cond_expect(ens: Ensemble, measure: Optional[ProductMeasure], P: Iterable[int],
                    prune: bool = True) -> float:
    """Exact ``Var(E[E(X) | X_P])``; ``prune=False`` keeps every terminal node."""
    engine = SobolEngine(ens, measure, prune=prune)
    return engine.var_cond_expect(make_index_set(P, ens.p, allow_empty=True))


def sobol_V(ens: Ensemble, measure: Optional[ProductMeasure], P: Iterable[int],
            cache: Optional[SobolEngine] = None) -> float:
    """
    Unnormalized Sobol' index V_P by the subset recursion.

    Args:
        ens: Ensemble
        measure: Input measure (uniform over the domain if None)
        P: Nonempty set of 0-based dimensions
        cache: Engine to reuse; its memo tables are filled as a side effect

    Returns:
        V_P
    """
    engine = cache or SobolEngine(ens, measure)
    return engine.sobol_V(make_index_set(P, ens.p))


def total_variance(ens: Ensemble, measure: Optional[ProductMeasure] = None) -> float:
    return SobolEngine(ens, measure).total_variance()


def sobol_S(ens: Ensemble, measure: Optional[ProductMeasure], P: Iterable[int]) -> float:
    """V_P divided by the total variance; 0 for a degenerate (constant) ensemble."""
    engine = SobolEngine(ens, measure)
    total = engine.total_variance()
    if total <= settings.degenerate_tolerance:
        logger.warning("Zero-variance ensemble; normalized index reported as 0")
        return 0.0
    return engine.sobol_V(make_index_set(P, ens.p)) / total


def total_effects(ens: Ensemble, measure: Optional[ProductMeasure], i: int) -> float:
    """T_i = 1 - Var(E[E(X) | X_{-i}]) / Var."""
    engine = SobolEngine(ens, measure)
    make_index_set([i], ens.p)
    total = engine.total_variance()
    if total <= settings.degenerate_tolerance:
        logger.warning("Zero-variance ensemble; total effect reported as 0")
        return 0.0
    return engine.total_effect_V(i) / total


def report(ens: Ensemble, measure: Optional[ProductMeasure] = None,
           max_order: Optional[int] = None) -> SobolReport:
    """
    First-order, second-order and total-effect indices of one ensemble.

    Args:
        ens: Ensemble
        measure: Input measure (uniform over the domain if None)
        max_order: Highest interaction order to report (default from settings, at least 1)

    Returns:
        SobolReport; normalized fields are 0 and ``degenerate`` is set when the
        total variance is zero
    """
    max_order = settings.max_order if max_order is None else max_order
    engine = SobolEngine(ens, measure)
    p = ens.p
    total = engine.total_variance()
    degenerate = total <= settings.degenerate_tolerance
    norm = 0.0 if degenerate else 1.0 / total

    first_V = np.array([engine.sobol_V((i,)) for i in range(p)])
    second_V = {}
    if max_order >= 2:
        second_V = {P: engine.sobol_V(P) for P in combinations(range(p), 2)}
    higher_V = {}
    for size in range(3, min(max_order, p) + 1):
        for P in combinations(range(p), size):
            higher_V[P] = engine.sobol_V(P)
    total_V = np.array([engine.total_effect_V(i) for i in range(p)])

    return SobolReport(
        p=p,
        total_variance=total,
        first_order_V=first_V,
        first_order=first_V * norm,
        second_order_V=second_V,
        second_order={P: v * norm for P, v in second_V.items()},
        total_effects_V=total_V,
        total_effects=total_V * norm,
        higher_order_V=higher_V,
        higher_order={P: v * norm for P, v in higher_V.items()},
        degenerate=degenerate,
    )


@dataclass
class PosteriorReport:
    """Posterior-mean indices plus every per-draw report."""
    mean: SobolReport
    draws: List[SobolReport]
    n_degenerate: int

    @property
    def n_used(self) -> int:
        return len(self.draws) - self.n_degenerate

    def summary(self, quantiles: Tuple[float, float] = (0.05, 0.95)) -> pd.DataFrame:
        """Posterior mean, sd and quantiles of S (and T) per index set, over non-degenerate draws."""
        frames = [r.to_frame(draw=j) for j, r in enumerate(self.draws) if not r.degenerate]
        if not frames:
            return pd.DataFrame(columns=["set", "S_mean", "S_sd", "S_lo", "S_hi", "T_mean", "T_sd"])
        long = pd.concat(frames, ignore_index=True)
        grouped = long.groupby("set", sort=False)
        out = pd.DataFrame({
            "S_mean": grouped["S"].mean(),
            "S_sd": grouped["S"].std(ddof=1),
            "S_lo": grouped["S"].quantile(quantiles[0]),
            "S_hi": grouped["S"].quantile(quantiles[1]),
            "T_mean": grouped["T"].mean(),
            "T_sd": grouped["T"].std(ddof=1),
        })
        return out.reset_index()

    def to_frame(self) -> pd.DataFrame:
        """Per-draw rows followed by the aggregate rows (draw = "mean")."""
        frames = [r.to_frame(draw=j) for j, r in enumerate(self.draws)]
        agg = self.mean.to_frame(draw=None)
        agg["draw"] = "mean"
        return pd.concat(frames + [agg], ignore_index=True)


def _report_worker(args) -> SobolReport:
    ens, measure, max_order = args
    return report(ens, measure, max_order)


def aggregate(posterior: Sequence[Ensemble], measure: Optional[ProductMeasure] = None,
              max_order: Optional[int] = None, workers: Optional[int] = None,
              progress: bool = False) -> PosteriorReport:
    """
    Posterior point estimate: arithmetic mean over draws of each draw's normalized indices.

    Each draw is normalized by its own total variance. Zero-variance draws are
    excluded from the mean and counted.
    """
    if not posterior:
        raise PreconditionError("aggregate needs a nonempty posterior")
    max_order = settings.max_order if max_order is None else max_order
    workers = settings.engine_workers if workers is None else workers
    p = posterior[0].p
    if any(e.p != p for e in posterior):
        raise DimensionMismatchError("Posterior draws disagree on dimension p")

    jobs = [(e, measure, max_order) for e in posterior]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            draws = list(tqdm(pool.map(_report_worker, jobs, chunksize=16), total=len(jobs),
                              desc="Sobol indices", disable=not progress))
    else:
        draws = [_report_worker(job) for job in tqdm(jobs, desc="Sobol indices", disable=not progress)]

    used = [r for r in draws if not r.degenerate]
    n_degenerate = len(draws) - len(used)
    if n_degenerate:
        logger.warning(f"Excluded {n_degenerate} zero-variance draws out of {len(draws)}")
    mean = _mean_report(used, p, max_order)
    logger.info(f"Aggregated Sobol' indices over {len(used)} draws")
    return PosteriorReport(mean=mean, draws=draws, n_degenerate=n_degenerate)


def _mean_report(reports: List[SobolReport], p: int, max_order: int) -> SobolReport:
    if not reports:
        pairs = list(combinations(range(p), 2)) if max_order >= 2 else []
        zeros = np.zeros(p)
        return SobolReport(p, 0.0, zeros, zeros.copy(), {P: 0.0 for P in pairs}, {P: 0.0 for P in pairs},
                           zeros.copy(), zeros.copy(), degenerate=True)

    def _mean_dict(key: str) -> Dict[IndexSet, float]:
        keys = getattr(reports[0], key).keys()
        return {P: float(np.mean([getattr(r, key)[P] for r in reports])) for P in keys}

    return SobolReport(
        p=p,
        total_variance=float(np.mean([r.total_variance for r in reports])),
        first_order_V=np.mean([r.first_order_V for r in reports], axis=0),
        first_order=np.mean([r.first_order for r in reports], axis=0),
        second_order_V=_mean_dict("second_order_V"),
        second_order=_mean_dict("second_order"),
        total_effects_V=np.mean([r.total_effects_V for r in reports], axis=0),
        total_effects=np.mean([r.total_effects for r in reports], axis=0),
        higher_order_V=_mean_dict("higher_order_V"),
        higher_order=_mean_dict("higher_order"),
        degenerate=False,
    )
