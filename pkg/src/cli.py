"""Command-line entry point: ``treesobol <command> ...``."""
from typing import Dict, List, Optional
import argparse
import logging
import sys

import pandas as pd
import yaml

from src.backend import SensitivityBackend
from src.config.settings import settings
from src.data.ensemble_io import load_any, save_posterior
from src.data.preprocessor import CSVProcessor
from src.errors import ConfigError, TreeSobolError
from src.sampler.bart import SamplerConfig, fit, sigma_trend
from src.simulation.design import Scenario

logger = logging.getLogger(__name__)


def _emit(df: pd.DataFrame, output: Optional[str]) -> None:
    if output:
        CSVProcessor.save_results(df, output)
    else:
        df.to_csv(sys.stdout, index=False)


def _sampler_overrides(path: Optional[str]) -> Dict:
    """Sampler settings from a YAML file: either a ``sampler:`` block or top-level keys."""
    if not path:
        return {}
    try:
        with open(path, 'r') as f:
            raw = yaml.safe_load(f) or {}
    except FileNotFoundError as e:
        raise ConfigError(f"Config file not found: {path}") from e
    return dict(raw.get("sampler", raw))


def cmd_indices(args: argparse.Namespace) -> int:
    backend = SensitivityBackend()
    ensembles = load_any(args.file)
    posterior = backend.compute_indices(ensembles, max_order=args.max_order, progress=len(ensembles) > 1)
    if len(ensembles) == 1:
        _emit(posterior.draws[0].to_frame().drop(columns="draw"), args.output)
    elif args.per_draw:
        _emit(posterior.to_frame(), args.output)
    else:
        _emit(posterior.summary(), args.output)
    if posterior.n_degenerate:
        logger.warning(f"{posterior.n_degenerate} zero-variance draws excluded")
    if args.counts:
        CSVProcessor.save_results(backend.count_table(ensembles, posterior), args.counts)
    return 0


def cmd_fit(args: argparse.Namespace) -> int:
    data, stats = SensitivityBackend().load_data(args.csv)
    logger.info(f"Training data: n={stats['n']}, p={stats['p']}, y mean {stats['y_mean']:.4g}, sd {stats['y_sd']:.4g}")
    overrides = _sampler_overrides(args.config)
    if args.seed is not None:
        overrides["seed"] = args.seed
    cfg = SamplerConfig.from_settings(**overrides)
    draws = fit(data, cfg, workers=args.workers or settings.harness_workers)
    save_posterior(draws, args.output)
    trend = sigma_trend([d.sigma for d in draws])
    logger.info(f"Sigma trace slope {trend['slope']:.3g} (t={trend['t']:.2f}, p={trend['p_value']:.3f})")
    return 0


def cmd_scenario(args: argparse.Namespace) -> int:
    backend = SensitivityBackend()
    scenario = Scenario.from_yaml(args.config)
    row = backend.run_scenario(scenario, workers=args.workers)
    _emit(row.to_frame(), args.output)
    if args.replicates:
        CSVProcessor.save_results(row.replicates_frame(), args.replicates)
    return 0


def cmd_demo_counts(args: argparse.Namespace) -> int:
    backend = SensitivityBackend()
    table = backend.demo_counts(n=args.n, noise_ratio=args.noise, seed=args.seed, n_draws=args.draws,
                                sampler=_sampler_overrides(args.config))
    _emit(table, args.output)
    return 0


def cmd_lhd(args: argparse.Namespace) -> int:
    _emit(SensitivityBackend().lhd(args.n, args.p, args.seed, args.restarts), args.output)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="treesobol", description="Exact Sobol' indices for tree ensembles")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("indices", help="Sobol' indices of an ensemble or posterior file")
    p.add_argument("file")
    p.add_argument("--max-order", type=int, default=None)
    p.add_argument("--per-draw", action="store_true", help="Emit every draw instead of the summary")
    p.add_argument("--counts", help="Also write the count-vs-index CSV here")
    p.add_argument("--output", "-o")
    p.set_defaults(func=cmd_indices)

    p = sub.add_parser("fit", help="Fit the sampler to a data CSV and write a posterior file")
    p.add_argument("csv")
    p.add_argument("--config", help="YAML file with sampler settings")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--workers", type=int, default=None)
    p.add_argument("--output", "-o", default="posterior.json")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("scenario", help="Run a simulation scenario and emit its metric row")
    p.add_argument("config")
    p.add_argument("--workers", type=int, default=None)
    p.add_argument("--replicates", help="Also write per-replicate metrics here")
    p.add_argument("--output", "-o")
    p.set_defaults(func=cmd_scenario)

    p = sub.add_parser("demo-counts", help="Split counts versus indices on the interaction demo")
    p.add_argument("--n", type=int, default=300)
    p.add_argument("--noise", type=float, default=0.01)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--draws", type=int, default=None)
    p.add_argument("--config", help="YAML file with sampler settings")
    p.add_argument("--output", "-o")
    p.set_defaults(func=cmd_demo_counts)

    p = sub.add_parser("lhd", help="Maximin Latin hypercube design")
    p.add_argument("n", type=int)
    p.add_argument("p", type=int)
    p.add_argument("seed", type=int)
    p.add_argument("--restarts", type=int, default=None)
    p.add_argument("--output", "-o")
    p.set_defaults(func=cmd_lhd)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    logging.basicConfig(level=settings.log_level, format=settings.log_format)
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (TreeSobolError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
