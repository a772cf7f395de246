"""Minimal Bayesian sum-of-trees sampler.

Backfitting Gibbs sampler: each tree is updated against the residual of all
other trees, first its structure by a birth/death Metropolis-Hastings step
using the marginal likelihood with leaf means integrated out, then its leaf
means from their conjugate normal full conditional. The error variance is
drawn last from its scaled inverse chi-square full conditional.
"""
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Sequence
import logging
import math

import numpy as np
from scipy.stats import chi2, linregress
from tqdm import tqdm

from src.config.settings import settings
from src.errors import ConfigError, DataError, DimensionMismatchError
from src.models.tree import Domain, Ensemble, Leaf, Split, SplitRule, Tree

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Dataset:
    """Design matrix ``X`` (n, p) and responses ``y`` (n,)."""
    X: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        X = np.atleast_2d(np.asarray(self.X, dtype=float))
        y = np.asarray(self.y, dtype=float).ravel()
        if X.shape[0] != y.shape[0]:
            raise DimensionMismatchError(f"X has {X.shape[0]} rows but y has {y.shape[0]}")
        if X.shape[0] < 2:
            raise DataError("Dataset needs at least two observations")
        if not np.all(np.isfinite(y)):
            raise DataError("Responses contain non-finite values")
        if not np.all(np.isfinite(X)):
            raise DataError("Design matrix contains non-finite values")
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def p(self) -> int:
        return self.X.shape[1]

    @property
    def constant_y(self) -> bool:
        return bool(np.ptp(self.y) == 0.0)


@dataclass(frozen=True)
class SamplerConfig:
    m: int = 200
    n_draws: int = 1000
    n_burn: int = 1000
    alpha: float = 0.95
    beta: float = 2.0
    k: float = 2.0
    nu: float = 3.0
    q: float = 0.90
    grid_size: int = 100
    seed: int = 0
    n_chains: int = 1
    progress: bool = True
    # Test mode: drop the likelihood so the chain targets the tree prior
    likelihood: bool = True

    def __post_init__(self):
        if self.m < 1:
            raise ConfigError(f"sampler.m must be >= 1, got {self.m}")
        if not 0.0 < self.alpha < 1.0:
            raise ConfigError(f"sampler.alpha must lie in (0, 1), got {self.alpha}")
        if self.beta < 0.0:
            raise ConfigError(f"sampler.beta must be >= 0, got {self.beta}")
        if self.grid_size < 2:
            raise ConfigError(f"sampler.grid_size must be >= 2, got {self.grid_size}")
        if self.n_draws < 1 or self.n_burn < 0:
            raise ConfigError("sampler.n_draws must be >= 1 and sampler.n_burn >= 0")
        if self.k <= 0 or self.nu <= 0 or not 0.0 < self.q < 1.0:
            raise ConfigError("sampler.k and sampler.nu must be positive and sampler.q in (0, 1)")
        if self.n_chains < 1:
            raise ConfigError(f"sampler.n_chains must be >= 1, got {self.n_chains}")

    @classmethod
    def from_settings(cls, **overrides) -> "SamplerConfig":
        """Defaults from the ``sampler`` block of the config file, then overrides."""
        known = set(cls.__dataclass_fields__)
        values = {key: val for key, val in settings.sampler_defaults.items() if key in known}
        unknown = set(overrides) - known
        if unknown:
            raise ConfigError(f"Unknown sampler settings: {', '.join(sorted(unknown))}")
        values.update(overrides)
        return cls(**values)


@dataclass(frozen=True)
class PosteriorDraw:
    ensemble: Ensemble
    sigma: float


@dataclass
class SamplerDiagnostics:
    birth_proposed: int = 0
    birth_accepted: int = 0
    death_proposed: int = 0
    death_accepted: int = 0
    sigma_trace: List[float] = field(default_factory=list)

    @property
    def birth_rate(self) -> float:
        return self.birth_accepted / self.birth_proposed if self.birth_proposed else 0.0

    @property
    def death_rate(self) -> float:
        return self.death_accepted / self.death_proposed if self.death_proposed else 0.0


def leaf_log_marginal(n: np.ndarray, s: np.ndarray, sigma2: float, tau2: float) -> np.ndarray:
    """Structure-dependent part of a leaf's integrated likelihood given count n and residual sum s."""
    return -0.5 * np.log1p(n * tau2 / sigma2) + tau2 * s * s / (2.0 * sigma2 * (sigma2 + n * tau2))


def log_marginal_likelihood(tree: Tree, X: np.ndarray, residuals: np.ndarray, sigma: float,
                            leaf_prior_sd: float) -> float:
    """
    Log likelihood of ``residuals`` under ``tree`` with leaf means integrated
    against independent N(0, leaf_prior_sd**2) priors.

    Args:
        tree: Tree structure (leaf values ignored)
        X: Inputs used to route observations to leaves
        residuals: Responses the tree is fitted to
        sigma: Error standard deviation
        leaf_prior_sd: Prior standard deviation of each leaf mean

    Returns:
        Log marginal likelihood; ``-inf`` when some leaf receives no observation
    """
    residuals = np.asarray(residuals, dtype=float)
    leaf = tree.apply(X)
    n_leaves = tree.n_leaves
    n = np.bincount(leaf, minlength=n_leaves).astype(float)
    if np.any(n == 0):
        return -np.inf
    s = np.bincount(leaf, weights=residuals, minlength=n_leaves)
    sigma2 = sigma * sigma
    tau2 = leaf_prior_sd * leaf_prior_sd
    const = -0.5 * len(residuals) * math.log(2.0 * math.pi * sigma2) - float(residuals @ residuals) / (2.0 * sigma2)
    return const + float(np.sum(leaf_log_marginal(n, s, sigma2, tau2)))


class _TreeState:
    """Mutable tree used while sampling; boxes are kept as open grid-index bounds."""

    def __init__(self, n: int, p: int, grid_size: int):
        self.var: List[int] = [-1]
        self.cut: List[int] = [-1]
        self.left: List[int] = [-1]
        self.right: List[int] = [-1]
        self.parent: List[int] = [-1]
        self.depth: List[int] = [0]
        self.mu: List[float] = [0.0]
        self.alive: List[bool] = [True]
        self.glo: List[np.ndarray] = [np.full(p, -1)]
        self.ghi: List[np.ndarray] = [np.full(p, grid_size)]
        self.free: List[int] = []
        self.leaf_ids = np.zeros(n, dtype=np.intp)

    @property
    def size(self) -> int:
        return len(self.var)

    def leaves(self) -> List[int]:
        return [i for i in range(self.size) if self.alive[i] and self.var[i] < 0]

    def nogs(self) -> List[int]:
        """Internal nodes whose two children are both leaves."""
        return [
            i for i in range(self.size)
            if self.alive[i] and self.var[i] >= 0 and self.var[self.left[i]] < 0 and self.var[self.right[i]] < 0
        ]

    def available_vars(self, node: int) -> np.ndarray:
        return np.flatnonzero(self.ghi[node] - self.glo[node] > 1)

    def _alloc(self) -> int:
        if self.free:
            i = self.free.pop()
            self.alive[i] = True
            return i
        for lst, val in ((self.var, -1), (self.cut, -1), (self.left, -1), (self.right, -1),
                         (self.parent, -1), (self.depth, 0), (self.mu, 0.0), (self.alive, True)):
            lst.append(val)
        self.glo.append(None)
        self.ghi.append(None)
        return self.size - 1

    def birth(self, node: int, var: int, g: int, rows: np.ndarray, go_left: np.ndarray) -> None:
        a, b = self._alloc(), self._alloc()
        self.var[node], self.cut[node] = var, g
        self.left[node], self.right[node] = a, b
        for child in (a, b):
            self.var[child] = -1
            self.cut[child] = -1
            self.left[child] = self.right[child] = -1
            self.parent[child] = node
            self.depth[child] = self.depth[node] + 1
            self.mu[child] = 0.0
            self.glo[child] = self.glo[node].copy()
            self.ghi[child] = self.ghi[node].copy()
        self.ghi[a][var] = g
        self.glo[b][var] = g
        self.leaf_ids[rows[go_left]] = a
        self.leaf_ids[rows[~go_left]] = b

    def death(self, node: int) -> None:
        a, b = self.left[node], self.right[node]
        self.leaf_ids[(self.leaf_ids == a) | (self.leaf_ids == b)] = node
        for child in (a, b):
            self.alive[child] = False
            self.free.append(child)
        self.var[node] = self.cut[node] = -1
        self.left[node] = self.right[node] = -1

    def to_tree(self, grid: Sequence[np.ndarray], offset: float) -> Tree:
        def _build(i: int):
            if self.var[i] < 0:
                return Leaf(float(self.mu[i] + offset))
            rule = SplitRule(int(self.var[i]), float(grid[self.var[i]][self.cut[i]]))
            return Split(rule, _build(self.left[i]), _build(self.right[i]))
        return Tree(_build(0))


class BartSampler:
    """One Markov chain of the sum-of-trees model on one dataset."""

    def __init__(self, data: Dataset, cfg: SamplerConfig, domain: Optional[Domain] = None,
                 seed: Optional[int] = None):
        self.data = data
        self.cfg = cfg
        self.domain = domain or Domain.unit(data.p)
        if self.domain.p != data.p:
            raise DimensionMismatchError(f"Domain has p={self.domain.p}, data has p={data.p}")
        lo = np.asarray(self.domain.lo)
        hi = np.asarray(self.domain.hi)
        if np.any(data.X < lo) or np.any(data.X > hi):
            raise DataError("Design points lie outside the sampler domain")
        self.rng = np.random.default_rng(cfg.seed if seed is None else seed)
        self.diagnostics = SamplerDiagnostics()

        G = cfg.grid_size
        steps = np.arange(1, G + 1) / (G + 1)
        self.grid = [lo[j] + (hi[j] - lo[j]) * steps for j in range(data.p)]

        self.y_mean = float(data.y.mean())
        self.y_c = data.y - self.y_mean
        scale = float(np.ptp(data.y))
        floor = 1e-8 * max(1.0, abs(self.y_mean))
        if scale <= 0.0:
            logger.warning("Responses are constant; leaf and error priors use a tiny floor scale")
            scale = floor
        self.tau = scale / (2.0 * cfg.k * math.sqrt(cfg.m))
        sigma_hat = max(self._sigma_guess(), floor)
        self.lam = sigma_hat ** 2 * chi2.ppf(1.0 - cfg.q, cfg.nu) / cfg.nu
        self.sigma2 = sigma_hat ** 2

        self.trees = [_TreeState(data.n, data.p, G) for _ in range(cfg.m)]
        self.fits = np.zeros((cfg.m, data.n))
        self.total_fit = np.zeros(data.n)

    def _sigma_guess(self) -> float:
        """Residual sd of a linear fit when n > p + 1, else the response sd."""
        X, y = self.data.X, self.y_c
        n, p = X.shape
        if n > p + 1:
            design = np.column_stack((np.ones(n), X))
            coef, *_ = np.linalg.lstsq(design, y, rcond=None)
            resid = y - design @ coef
            return float(math.sqrt(resid @ resid / (n - p - 1)))
        return float(np.std(y, ddof=1))

    def _log_split_prob(self, depth: int) -> float:
        return math.log(self.cfg.alpha) - self.cfg.beta * math.log1p(depth)

    def _log_no_split_prob(self, depth: int) -> float:
        return math.log1p(-self.cfg.alpha * (1.0 + depth) ** (-self.cfg.beta))

    def _leaf_lml(self, n, s) -> float:
        if not self.cfg.likelihood:
            return 0.0
        return float(leaf_log_marginal(n, s, self.sigma2, self.tau ** 2))

    def _birth(self, tree: _TreeState, r: np.ndarray, n_nogs: int) -> None:
        self.diagnostics.birth_proposed += 1
        leaves = tree.leaves()
        leaf = leaves[self.rng.integers(len(leaves))]
        vars_ = tree.available_vars(leaf)
        if len(vars_) == 0:
            return
        var = int(vars_[self.rng.integers(len(vars_))])
        lo, hi = tree.glo[leaf][var], tree.ghi[leaf][var]
        g = int(lo + 1 + self.rng.integers(hi - lo - 1))

        rows = np.flatnonzero(tree.leaf_ids == leaf)
        go_left = self.data.X[rows, var] < self.grid[var][g]
        n_left = int(go_left.sum())
        n_right = len(rows) - n_left
        if self.cfg.likelihood and (n_left == 0 or n_right == 0):
            return
        s_left = float(r[rows[go_left]].sum())
        s_right = float(r[rows[~go_left]].sum())
        delta = (self._leaf_lml(n_left, s_left) + self._leaf_lml(n_right, s_right)
                 - self._leaf_lml(len(rows), s_left + s_right))

        d = tree.depth[leaf]
        log_prior = self._log_split_prob(d) + 2.0 * self._log_no_split_prob(d + 1) - self._log_no_split_prob(d)
        parent = tree.parent[leaf]
        # The parent stops being a nog if the new leaf's sibling was a leaf
        parent_was_nog = parent >= 0 and tree.var[tree.left[parent]] < 0 and tree.var[tree.right[parent]] < 0
        nogs_after = n_nogs + 1 - (1 if parent_was_nog else 0)
        p_birth = 1.0 if tree.var[0] < 0 else 0.5
        log_proposal = math.log(0.5) - math.log(p_birth) + math.log(len(leaves)) - math.log(nogs_after)

        if math.log(self.rng.random()) < delta + log_prior + log_proposal:
            tree.birth(leaf, var, g, rows, go_left)
            self.diagnostics.birth_accepted += 1

    def _death(self, tree: _TreeState, r: np.ndarray, nogs: List[int]) -> None:
        self.diagnostics.death_proposed += 1
        node = nogs[self.rng.integers(len(nogs))]
        a, b = tree.left[node], tree.right[node]
        in_a = tree.leaf_ids == a
        in_b = tree.leaf_ids == b
        n_a, n_b = int(in_a.sum()), int(in_b.sum())
        s_a, s_b = float(r[in_a].sum()), float(r[in_b].sum())
        delta = self._leaf_lml(n_a + n_b, s_a + s_b) - self._leaf_lml(n_a, s_a) - self._leaf_lml(n_b, s_b)

        d = tree.depth[node]
        log_prior = self._log_no_split_prob(d) - self._log_split_prob(d) - 2.0 * self._log_no_split_prob(d + 1)
        n_leaves_after = len(tree.leaves()) - 1
        p_birth_after = 1.0 if node == 0 else 0.5
        log_proposal = math.log(p_birth_after) - math.log(0.5) + math.log(len(nogs)) - math.log(n_leaves_after)

        if math.log(self.rng.random()) < delta + log_prior + log_proposal:
            tree.death(node)
            self.diagnostics.death_accepted += 1

    def _draw_leaves(self, tree: _TreeState, r: np.ndarray) -> None:
        n = np.bincount(tree.leaf_ids, minlength=tree.size).astype(float)
        s = np.bincount(tree.leaf_ids, weights=r, minlength=tree.size)
        tau2 = self.tau ** 2
        if not self.cfg.likelihood:
            n = np.zeros_like(n)
            s = np.zeros_like(s)
        post_var = self.sigma2 * tau2 / (self.sigma2 + n * tau2)
        post_mean = tau2 * s / (self.sigma2 + n * tau2)
        for leaf in tree.leaves():
            tree.mu[leaf] = post_mean[leaf] + math.sqrt(post_var[leaf]) * self.rng.standard_normal()

    def _draw_sigma2(self) -> None:
        cfg = self.cfg
        if cfg.likelihood:
            resid = self.y_c - self.total_fit
            sse = float(resid @ resid)
            dof = cfg.nu + self.data.n
        else:
            sse = 0.0
            dof = cfg.nu
        self.sigma2 = (cfg.nu * self.lam + sse) / self.rng.chisquare(dof)

    def step(self) -> None:
        """One full sweep: every tree, then the error variance."""
        for t, tree in enumerate(self.trees):
            r = self.y_c - self.total_fit + self.fits[t]
            nogs = tree.nogs()
            if not nogs or self.rng.random() < 0.5:
                self._birth(tree, r, len(nogs))
            else:
                self._death(tree, r, nogs)
            self._draw_leaves(tree, r)
            new_fit = np.asarray(tree.mu)[tree.leaf_ids]
            self.total_fit += new_fit - self.fits[t]
            self.fits[t] = new_fit
        self._draw_sigma2()
        self.diagnostics.sigma_trace.append(math.sqrt(self.sigma2))

    def snapshot(self) -> PosteriorDraw:
        offset = self.y_mean / self.cfg.m
        trees = tuple(tree.to_tree(self.grid, offset) for tree in self.trees)
        return PosteriorDraw(Ensemble(trees, self.domain), math.sqrt(self.sigma2))

    def run(self) -> List[PosteriorDraw]:
        cfg = self.cfg
        draws = []
        total = cfg.n_burn + cfg.n_draws
        for it in tqdm(range(total), desc="BART", disable=not cfg.progress):
            self.step()
            if it >= cfg.n_burn:
                draws.append(self.snapshot())
        logger.debug(
            f"Chain finished: birth acceptance {self.diagnostics.birth_rate:.3f}, "
            f"death acceptance {self.diagnostics.death_rate:.3f}"
        )
        return draws


def _run_chain(args) -> List[PosteriorDraw]:
    data, cfg, domain, seed = args
    return BartSampler(data, cfg, domain, seed=seed).run()


def fit(data: Dataset, cfg: Optional[SamplerConfig] = None, domain: Optional[Domain] = None,
        workers: int = 1) -> List[PosteriorDraw]:
    """
    Fit the sum-of-trees model and return post-burn-in draws.

    Args:
        data: Training data
        cfg: Sampler configuration (defaults from settings)
        domain: Input domain (unit cube if None)
        workers: Processes for running chains in parallel

    Returns:
        ``n_draws * n_chains`` PosteriorDraws, chain by chain
    """
    cfg = cfg or SamplerConfig.from_settings()
    if data.constant_y:
        logger.warning("Fitting constant responses")
    logger.info(f"Fitting {cfg.m} trees on n={data.n}, p={data.p} ({cfg.n_chains} chain(s))")
    seeds = [
        int(child.generate_state(1)[0])
        for child in np.random.SeedSequence(cfg.seed).spawn(cfg.n_chains)
    ]
    jobs = [(data, cfg, domain, s) for s in seeds]
    if workers > 1 and cfg.n_chains > 1:
        quiet = replace(cfg, progress=False)
        jobs = [(data, quiet, domain, s) for s in seeds]
        with ProcessPoolExecutor(max_workers=min(workers, cfg.n_chains)) as pool:
            chains = list(pool.map(_run_chain, jobs))
    else:
        chains = [_run_chain(job) for job in jobs]
    draws = [d for chain in chains for d in chain]
    logger.info(f"Collected {len(draws)} posterior draws")
    return draws


def predict(draws: Sequence[PosteriorDraw], X: np.ndarray) -> np.ndarray:
    """Posterior-mean prediction at the rows of ``X``."""
    return np.mean([d.ensemble.predict(X) for d in draws], axis=0)


def sigma_trend(trace: Sequence[float]) -> Dict[str, float]:
    """Least-squares slope of a sigma trace against iteration, with its t statistic and p-value."""
    trace = np.asarray(trace, dtype=float)
    result = linregress(np.arange(len(trace)), trace)
    t_stat = result.slope / result.stderr if result.stderr > 0 else 0.0
    return {"slope": float(result.slope), "t": float(t_stat), "p_value": float(result.pvalue)}
