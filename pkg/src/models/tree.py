"""Regression trees, sum-of-trees ensembles and their terminal-node boxes.

Traversal convention: an input with ``x[dim] < cut`` goes LEFT, otherwise
RIGHT. Terminal boxes are therefore half-open ``[lo, hi)`` on every margin,
closed at the top only where ``hi`` equals the domain's upper bound.
Dimensions are 0-based here; file formats and reports are 1-based.
"""
from dataclasses import dataclass
from functools import cached_property
from typing import FrozenSet, Iterator, List, Sequence, Tuple, Union
import logging

import numpy as np

from src.errors import DegenerateSplitError, DimensionMismatchError, DomainError, EnsembleFormatError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Interval:
    """Interval ``[lo, hi)``, or ``[lo, hi]`` when ``closed`` is set."""
    lo: float
    hi: float
    closed: bool = False

    def contains(self, x: float) -> bool:
        if self.closed:
            return self.lo <= x <= self.hi
        return self.lo <= x < self.hi

    @property
    def length(self) -> float:
        return self.hi - self.lo


@dataclass(frozen=True)
class Domain:
    """Bounded hyperrectangle ``prod_j [lo[j], hi[j]]``."""
    lo: Tuple[float, ...]
    hi: Tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "lo", tuple(float(v) for v in self.lo))
        object.__setattr__(self, "hi", tuple(float(v) for v in self.hi))
        if len(self.lo) != len(self.hi):
            raise DimensionMismatchError(f"Domain bounds have lengths {len(self.lo)} and {len(self.hi)}")
        if len(self.lo) < 1:
            raise DimensionMismatchError("Domain needs at least one dimension")
        for j, (a, b) in enumerate(zip(self.lo, self.hi)):
            if not a < b:
                raise DomainError(f"Domain margin {j + 1} is empty: [{a}, {b}]")

    @classmethod
    def unit(cls, p: int) -> "Domain":
        return cls((0.0,) * p, (1.0,) * p)

    @property
    def p(self) -> int:
        return len(self.lo)

    def margin(self, dim: int) -> Interval:
        return Interval(self.lo[dim], self.hi[dim], closed=True)

    def contains(self, x: Sequence[float]) -> bool:
        if len(x) != self.p:
            return False
        return all(a <= v <= b for v, a, b in zip(x, self.lo, self.hi))

    @property
    def volume(self) -> float:
        return float(np.prod(np.subtract(self.hi, self.lo)))


@dataclass(frozen=True)
class SplitRule:
    """Boolean rule ``x[dim] < cut``."""
    dim: int
    cut: float


@dataclass(frozen=True)
class Leaf:
    value: float


@dataclass(frozen=True)
class Split:
    rule: SplitRule
    left: "Node"
    right: "Node"


Node = Union[Leaf, Split]


@dataclass(frozen=True)
class TerminalRegion:
    """Box ``R_k`` mapped to leaf value ``mu``; ``split_dims`` is v(k)."""
    box: Tuple[Interval, ...]
    mu: float
    split_dims: FrozenSet[int]

    def contains(self, x: Sequence[float]) -> bool:
        return all(iv.contains(v) for iv, v in zip(self.box, x))

    @property
    def volume(self) -> float:
        return float(np.prod([iv.length for iv in self.box]))


@dataclass(frozen=True)
class Tree:
    root: Node

    def nodes(self) -> Iterator[Node]:
        stack = [self.root]
        while stack:
            node = stack.pop()
            yield node
            if isinstance(node, Split):
                stack.append(node.right)
                stack.append(node.left)

    def rules(self) -> Iterator[SplitRule]:
        for node in self.nodes():
            if isinstance(node, Split):
                yield node.rule

    @property
    def n_leaves(self) -> int:
        return sum(1 for node in self.nodes() if isinstance(node, Leaf))

    def evaluate(self, x: Sequence[float]) -> float:
        node = self.root
        while isinstance(node, Split):
            node = node.left if x[node.rule.dim] < node.rule.cut else node.right
        return node.value

    def predict(self, X: np.ndarray) -> np.ndarray:
        """Vectorized traversal of the rows of ``X``."""
        X = np.asarray(X, dtype=float)
        out = np.empty(X.shape[0])
        stack = [(self.root, np.arange(X.shape[0]))]
        while stack:
            node, rows = stack.pop()
            if isinstance(node, Leaf):
                out[rows] = node.value
                continue
            go_left = X[rows, node.rule.dim] < node.rule.cut
            stack.append((node.left, rows[go_left]))
            stack.append((node.right, rows[~go_left]))
        return out

    def apply(self, X: np.ndarray) -> np.ndarray:
        """Index of the leaf (left-to-right order) each row of ``X`` falls into."""
        X = np.asarray(X, dtype=float)
        out = np.empty(X.shape[0], dtype=int)
        counter = 0
        stack = [(self.root, np.arange(X.shape[0]))]
        while stack:
            node, rows = stack.pop()
            if isinstance(node, Leaf):
                out[rows] = counter
                counter += 1
                continue
            go_left = X[rows, node.rule.dim] < node.rule.cut
            stack.append((node.right, rows[~go_left]))
            stack.append((node.left, rows[go_left]))
        return out

    def map_leaves(self, fn) -> "Tree":
        """New tree with every leaf value replaced by ``fn(value)``."""
        def _walk(node: Node) -> Node:
            if isinstance(node, Leaf):
                return Leaf(float(fn(node.value)))
            return Split(node.rule, _walk(node.left), _walk(node.right))
        return Tree(_walk(self.root))


def terminal_regions(tree: Tree, domain: Domain) -> List[TerminalRegion]:
    """
    Extract one TerminalRegion per leaf, left to right.

    Args:
        tree: Tree to decompose
        domain: Domain the tree is defined on

    Returns:
        List of regions partitioning the domain

    Raises:
        DegenerateSplitError: If a cutpoint is not strictly inside the node's box
        DimensionMismatchError: If a rule names a dimension outside the domain
    """
    regions = []
    stack = [(tree.root, list(domain.lo), list(domain.hi), frozenset())]
    while stack:
        node, lo, hi, dims = stack.pop()
        if isinstance(node, Leaf):
            box = tuple(
                Interval(a, b, closed=(b == domain.hi[j])) for j, (a, b) in enumerate(zip(lo, hi))
            )
            regions.append(TerminalRegion(box, float(node.value), dims))
            continue
        d, c = node.rule.dim, node.rule.cut
        if not 0 <= d < domain.p:
            raise DimensionMismatchError(f"Split on dimension {d + 1} but domain has p={domain.p}")
        if not lo[d] < c < hi[d]:
            raise DegenerateSplitError(
                f"degenerate split x_{d + 1} < {c!r} outside node box [{lo[d]}, {hi[d]}]"
            )
        left_hi = list(hi)
        left_hi[d] = c
        right_lo = list(lo)
        right_lo[d] = c
        stack.append((node.right, right_lo, hi, dims | {d}))
        stack.append((node.left, lo, left_hi, dims | {d}))
    return regions


@dataclass(frozen=True)
class LeafTable:
    """Terminal regions of a whole ensemble flattened into arrays."""
    lo: np.ndarray          # (N, p)
    hi: np.ndarray          # (N, p)
    mu: np.ndarray          # (N,)
    split_mask: np.ndarray  # (N, p) bool, True where j in v(k)
    tree_index: np.ndarray  # (N,)


@dataclass(frozen=True)
class Ensemble:
    """Sum of ``m`` trees over a common domain."""
    trees: Tuple[Tree, ...]
    domain: Domain

    def __post_init__(self):
        object.__setattr__(self, "trees", tuple(self.trees))
        if len(self.trees) < 1:
            raise EnsembleFormatError("Ensemble needs at least one tree")
        # Validates every split against the domain
        _ = self.regions

    @property
    def m(self) -> int:
        return len(self.trees)

    @property
    def p(self) -> int:
        return self.domain.p

    @cached_property
    def regions(self) -> Tuple[Tuple[TerminalRegion, ...], ...]:
        return tuple(tuple(terminal_regions(t, self.domain)) for t in self.trees)

    @cached_property
    def leaf_table(self) -> LeafTable:
        flat = [(t, r) for t, regs in enumerate(self.regions) for r in regs]
        p = self.p
        lo = np.array([[iv.lo for iv in r.box] for _, r in flat], dtype=float).reshape(-1, p)
        hi = np.array([[iv.hi for iv in r.box] for _, r in flat], dtype=float).reshape(-1, p)
        mask = np.zeros((len(flat), p), dtype=bool)
        for k, (_, r) in enumerate(flat):
            mask[k, list(r.split_dims)] = True
        return LeafTable(
            lo=lo,
            hi=hi,
            mu=np.array([r.mu for _, r in flat], dtype=float),
            split_mask=mask,
            tree_index=np.array([t for t, _ in flat], dtype=int),
        )

    def predict(self, X: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if X.shape[1] != self.p:
            raise DimensionMismatchError(f"Inputs have {X.shape[1]} columns, ensemble has p={self.p}")
        return np.sum([t.predict(X) for t in self.trees], axis=0)


def ensemble_eval(ens: Ensemble, x: Sequence[float]) -> float:
    """Sum over trees of the leaf value reached by ``x``."""
    if not ens.domain.contains(x):
        raise DomainError(f"Point {tuple(x)} lies outside the ensemble domain")
    return float(sum(t.evaluate(x) for t in ens.trees))


def unique_cutpoints(ens: Ensemble, dim: int) -> np.ndarray:
    """Strictly increasing cutpoints used on ``dim`` anywhere in the ensemble."""
    if not 0 <= dim < ens.p:
        raise DimensionMismatchError(f"Dimension {dim + 1} out of range for p={ens.p}")
    cuts = [r.cut for t in ens.trees for r in t.rules() if r.dim == dim]
    return np.unique(np.asarray(cuts, dtype=float))
