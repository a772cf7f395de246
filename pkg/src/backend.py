from typing import IO, Dict, List, Optional, Tuple, Union
import json
import logging

import numpy as np
import pandas as pd

from src.data.ensemble_io import ensembles_from_json, posterior_to_list
from src.data.preprocessor import CSVProcessor
from src.errors import EnsembleFormatError
from src.models.tree import Ensemble
from src.sampler.bart import Dataset, PosteriorDraw, SamplerConfig, fit
from src.sensitivity.activity import count_table
from src.sensitivity.sobol import PosteriorReport, aggregate
from src.simulation.design import Scenario, maximin_lhd
from src.simulation.harness import MetricRow, run_demo_counts, run_scenario

logger = logging.getLogger(__name__)


class SensitivityBackend:
    """Main backend interface for the CLI and the Streamlit app"""

    def load_ensembles(self, file_obj: IO) -> List[Ensemble]:
        """Parse an uploaded ensemble or posterior JSON file"""
        try:
            raw = json.load(file_obj)
        except json.JSONDecodeError as e:
            raise EnsembleFormatError(f"Uploaded file is not valid JSON: {e}") from e
        return ensembles_from_json(raw)

    def compute_indices(self, ensembles: List[Ensemble], max_order: Optional[int] = None,
                        progress: bool = False) -> PosteriorReport:
        """Exact indices of every ensemble and their posterior mean"""
        return aggregate(ensembles, max_order=max_order, progress=progress)

    def count_table(self, ensembles: List[Ensemble], posterior: PosteriorReport) -> pd.DataFrame:
        """Per-draw split counts next to first-order indices"""
        return count_table(ensembles, first_order=np.array([r.first_order for r in posterior.draws]))

    def load_data(self, file_obj) -> Tuple[Dataset, Dict]:
        """Parse a data CSV and summarize it"""
        data = CSVProcessor.load_dataset(file_obj)
        return data, CSVProcessor.get_data_statistics(data)

    def fit(self, data: Union[Dataset, IO, str], overrides: Optional[Dict] = None) -> List[PosteriorDraw]:
        """Fit the sampler to a Dataset or a data CSV"""
        if not isinstance(data, Dataset):
            data, _ = self.load_data(data)
        cfg = SamplerConfig.from_settings(**(overrides or {}))
        return fit(data, cfg)

    def posterior_json(self, draws: List[PosteriorDraw]) -> str:
        """Posterior file contents for a download button"""
        return json.dumps(posterior_to_list(draws))

    def run_scenario(self, scenario: Scenario, workers: Optional[int] = None,
                     progress: bool = True) -> MetricRow:
        return run_scenario(scenario, workers=workers, progress=progress)

    def demo_counts(self, **kwargs) -> pd.DataFrame:
        return run_demo_counts(**kwargs)

    def lhd(self, n: int, p: int, seed: int, restarts: Optional[int] = None) -> pd.DataFrame:
        design = maximin_lhd(n, p, seed, restarts)
        return pd.DataFrame(design, columns=[f"x{j + 1}" for j in range(p)])
