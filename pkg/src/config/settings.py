import os
from pathlib import Path
from typing import Any, Dict, Optional

import yaml
from dotenv import load_dotenv

from src.errors import ConfigError

DEFAULT_CONFIG_PATH = Path(__file__).resolve().parents[2] / "config" / "config.yaml"


class Settings:
    """Application settings and configuration"""

    def __init__(self, config_path: Optional[str] = None):
        load_dotenv()
        self.config_path = Path(config_path or os.getenv("TREESOBOL_CONFIG") or DEFAULT_CONFIG_PATH)
        self._load_config()
        self._load_env_vars()

    def _load_config(self):
        """Load YAML configuration"""
        try:
            with open(self.config_path, 'r') as f:
                config = yaml.safe_load(f) or {}
        except FileNotFoundError as e:
            raise ConfigError(f"Config file not found: {self.config_path}") from e

        try:
            engine = config['engine']
            self.negative_tolerance = float(engine['negative_tolerance'])
            self.degenerate_tolerance = float(engine['degenerate_tolerance'])
            self.jump_tolerance = float(engine['jump_tolerance'])
            self.max_order = int(engine['max_order'])
            self.engine_workers = int(engine.get('workers', 1))

            self.cell_budget = int(config['oracle']['cell_budget'])

            # Sampler defaults, handed to SamplerConfig as keyword arguments
            self.sampler_defaults: Dict[str, Any] = dict(config['sampler'])

            harness = config['harness']
            self.replicates = int(harness['replicates'])
            self.lhd_restarts = int(harness['lhd_restarts'])
            self.truth_source = str(harness['truth_source'])
            self.tie_tolerance = float(harness['tie_tolerance'])
            self.master_seed = int(harness['master_seed'])
            self.harness_workers = int(harness.get('workers', 1))

            self.log_level = config['logging']['level']
            self.log_format = config['logging']['format']
        except KeyError as e:
            raise ConfigError(f"Missing configuration key: {e.args[0]}") from e

        if self.truth_source not in ("published", "quadrature"):
            raise ConfigError(f"harness.truth_source must be 'published' or 'quadrature', got {self.truth_source!r}")

    def _load_env_vars(self):
        """Load environment variables"""
        self.log_level = os.getenv("TREESOBOL_LOG_LEVEL", self.log_level)

        workers = os.getenv("TREESOBOL_WORKERS")
        if workers:
            try:
                self.engine_workers = self.harness_workers = int(workers)
            except ValueError as e:
                raise ConfigError(f"TREESOBOL_WORKERS must be an integer, got {workers!r}") from e


# Global settings instance
settings = Settings()
