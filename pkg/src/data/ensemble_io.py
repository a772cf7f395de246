"""JSON files for single ensembles and posterior samples.

Ensemble file::

    {"domain": {"lo": [...], "hi": [...]},
     "trees": [{"split": {"dim": 1, "cut": 0.5}, "left": {"leaf": 1.0}, "right": {"leaf": 2.0}}]}

A posterior file is a JSON list of ensemble objects, each with an extra
``sigma`` field. Dimensions are 1-based in files.
"""
from pathlib import Path
from typing import Any, Dict, List, Sequence, Union
import json
import logging
import math

from src.errors import EnsembleFormatError, TreeSobolError
from src.models.tree import Domain, Ensemble, Leaf, Node, Split, SplitRule, Tree
from src.sampler.bart import PosteriorDraw

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]


def _node_from_dict(obj: Any) -> Node:
    if not isinstance(obj, dict):
        raise EnsembleFormatError(f"Tree node must be an object, got {type(obj).__name__}")
    if "leaf" in obj:
        extra = {"split", "left", "right"} & set(obj)
        if extra:
            raise EnsembleFormatError(f"Leaf node also carries {sorted(extra)}")
        value = obj["leaf"]
        if isinstance(value, bool) or not isinstance(value, (int, float)) or not math.isfinite(value):
            raise EnsembleFormatError(f"Leaf value must be a finite number, got {value!r}")
        return Leaf(float(value))
    if "split" not in obj:
        raise EnsembleFormatError(f"Tree node needs 'leaf' or 'split': {sorted(obj)}")
    if "left" not in obj or "right" not in obj:
        raise EnsembleFormatError("unary node: a split needs both 'left' and 'right' children")
    rule = obj["split"]
    try:
        dim, cut = rule["dim"], rule["cut"]
    except (KeyError, TypeError) as e:
        raise EnsembleFormatError(f"Split rule needs 'dim' and 'cut': {rule!r}") from e
    if isinstance(dim, bool) or not isinstance(dim, int) or dim < 1:
        raise EnsembleFormatError(f"Split dim must be a 1-based integer, got {dim!r}")
    if isinstance(cut, bool) or not isinstance(cut, (int, float)) or not math.isfinite(cut):
        raise EnsembleFormatError(f"Split cut must be a finite number, got {cut!r}")
    return Split(SplitRule(dim - 1, float(cut)), _node_from_dict(obj["left"]), _node_from_dict(obj["right"]))


def _node_to_dict(node: Node) -> Dict[str, Any]:
    if isinstance(node, Leaf):
        return {"leaf": node.value}
    return {
        "split": {"dim": node.rule.dim + 1, "cut": node.rule.cut},
        "left": _node_to_dict(node.left),
        "right": _node_to_dict(node.right),
    }


def ensemble_from_dict(obj: Any) -> Ensemble:
    """Build and validate an Ensemble from its JSON object."""
    if not isinstance(obj, dict):
        raise EnsembleFormatError("Ensemble must be a JSON object")
    try:
        domain = Domain(obj["domain"]["lo"], obj["domain"]["hi"])
        trees = obj["trees"]
    except (KeyError, TypeError) as e:
        raise EnsembleFormatError(f"Ensemble needs 'domain' {{lo, hi}} and 'trees': {e}") from e
    if not isinstance(trees, list):
        raise EnsembleFormatError("'trees' must be a list")
    return Ensemble(tuple(Tree(_node_from_dict(t)) for t in trees), domain)


def ensemble_to_dict(ens: Ensemble) -> Dict[str, Any]:
    return {
        "domain": {"lo": list(ens.domain.lo), "hi": list(ens.domain.hi)},
        "trees": [_node_to_dict(t.root) for t in ens.trees],
    }


def _read_json(path: PathLike) -> Any:
    try:
        with open(path, 'r') as f:
            return json.load(f)
    except json.JSONDecodeError as e:
        raise EnsembleFormatError(f"{path} is not valid JSON: {e}") from e


def load_ensemble(path: PathLike) -> Ensemble:
    """
    Load one ensemble file.

    Args:
        path: JSON file path

    Returns:
        Validated Ensemble

    Raises:
        EnsembleFormatError: Malformed file or unary node
        DimensionMismatchError: Split dimension outside the domain
        DegenerateSplitError: Cutpoint outside its node's box
    """
    try:
        ens = ensemble_from_dict(_read_json(path))
        logger.info(f"Loaded ensemble with {ens.m} trees, p={ens.p} from {path}")
        return ens
    except TreeSobolError as e:
        logger.error(f"Error loading ensemble {path}: {e}")
        raise


def posterior_from_list(raw: Any) -> List[PosteriorDraw]:
    if not isinstance(raw, list) or not raw:
        raise EnsembleFormatError("Posterior file must be a nonempty JSON list")
    draws = []
    for k, obj in enumerate(raw):
        sigma = obj.get("sigma") if isinstance(obj, dict) else None
        if isinstance(sigma, bool) or not isinstance(sigma, (int, float)) or not sigma > 0:
            raise EnsembleFormatError(f"Draw {k} needs a positive 'sigma', got {sigma!r}")
        draws.append(PosteriorDraw(ensemble_from_dict(obj), float(sigma)))
    return draws


def ensembles_from_json(raw: Any) -> List[Ensemble]:
    """Ensembles of a parsed ensemble file (one) or posterior file (one per draw)."""
    if isinstance(raw, list):
        return [d.ensemble for d in posterior_from_list(raw)]
    return [ensemble_from_dict(raw)]


def load_posterior(path: PathLike) -> List[PosteriorDraw]:
    """Load a posterior file: a list of ensembles, each carrying its draw's ``sigma``."""
    try:
        draws = posterior_from_list(_read_json(path))
        logger.info(f"Loaded {len(draws)} posterior draws from {path}")
        return draws
    except TreeSobolError as e:
        logger.error(f"Error loading posterior {path}: {e}")
        raise


def load_any(path: PathLike) -> List[Ensemble]:
    """Load either file kind as a list of ensembles."""
    try:
        ensembles = ensembles_from_json(_read_json(path))
        logger.info(f"Loaded {len(ensembles)} ensemble(s) from {path}")
        return ensembles
    except TreeSobolError as e:
        logger.error(f"Error loading {path}: {e}")
        raise


def save_ensemble(ens: Ensemble, path: PathLike) -> None:
    try:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, 'w') as f:
            json.dump(ensemble_to_dict(ens), f)
        logger.info(f"Ensemble saved to {path}")
    except OSError as e:
        logger.error(f"Error saving ensemble: {e}")
        raise


def posterior_to_list(draws: Sequence[PosteriorDraw]) -> List[Dict[str, Any]]:
    return [dict(ensemble_to_dict(d.ensemble), sigma=d.sigma) for d in draws]


def save_posterior(draws: Sequence[PosteriorDraw], path: PathLike) -> None:
    try:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        payload = posterior_to_list(draws)
        with open(path, 'w') as f:
            json.dump(payload, f)
        logger.info(f"Saved {len(draws)} posterior draws to {path}")
    except OSError as e:
        logger.error(f"Error saving posterior: {e}")
        raise
