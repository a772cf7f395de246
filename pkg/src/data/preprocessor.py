import pandas as pd
from typing import Dict, List, Optional
from pathlib import Path
import logging

import numpy as np

from src.errors import DataError
from src.sampler.bart import Dataset

logger = logging.getLogger(__name__)

RESPONSE_COLUMN = 'y'


class CSVProcessor:
    """Read and write the CSV files used by the CLI and the app"""

    @staticmethod
    def validate_columns(df: pd.DataFrame, required_columns: List[str]) -> bool:
        """
        Validate that DataFrame contains required columns

        Args:
            df: DataFrame to validate
            required_columns: List of required column names

        Returns:
            bool: True if all columns present

        Raises:
            DataError: If columns are missing
        """
        missing_cols = [col for col in required_columns if col not in df.columns]
        if missing_cols:
            raise DataError(f"Missing required columns: {', '.join(missing_cols)}")
        return True

    @staticmethod
    def frame_to_dataset(df: pd.DataFrame) -> Dataset:
        """
        Split a frame into features and response

        The response is the last column and must be named ``y``; every column
        before it is a feature, in order.
        """
        CSVProcessor.validate_columns(df, [RESPONSE_COLUMN])
        if df.columns[-1] != RESPONSE_COLUMN:
            raise DataError(f"Response column '{RESPONSE_COLUMN}' must be the last column")
        if df.shape[1] < 2:
            raise DataError("Data needs at least one feature column before 'y'")
        try:
            values = df.to_numpy(dtype=float)
        except (TypeError, ValueError) as e:
            raise DataError(f"Data contains non-numeric values: {e}") from e
        if np.isnan(values).any():
            raise DataError("Data contains missing values")
        return Dataset(values[:, :-1], values[:, -1])

    @staticmethod
    def load_dataset(file_path: str) -> Dataset:
        """
        Load training data: header row, p feature columns, then ``y``

        Args:
            file_path: Path to CSV file

        Returns:
            Dataset
        """
        try:
            df = pd.read_csv(file_path)
            data = CSVProcessor.frame_to_dataset(df)

            logger.info(f"Loaded {data.n} observations with p={data.p} from {file_path}")
            return data

        except Exception as e:
            logger.error(f"Error loading data: {e}")
            raise

    @staticmethod
    def dataset_to_frame(data: Dataset, feature_names: Optional[List[str]] = None) -> pd.DataFrame:
        names = feature_names or [f"x{j + 1}" for j in range(data.p)]
        df = pd.DataFrame(data.X, columns=names)
        df[RESPONSE_COLUMN] = data.y
        return df

    @staticmethod
    def save_results(df: pd.DataFrame, output_path: str) -> None:
        """
        Save results to CSV

        Args:
            df: DataFrame to save
            output_path: Output file path
        """
        try:
            output_path = Path(output_path)
            output_path.parent.mkdir(parents=True, exist_ok=True)

            df.to_csv(output_path, index=False)
            logger.info(f"Results saved to {output_path}")

        except Exception as e:
            logger.error(f"Error saving results: {e}")
            raise

    @staticmethod
    def get_data_statistics(data: Dataset) -> Dict:
        """Summary numbers shown before a fit"""
        return {
            'n': data.n,
            'p': data.p,
            'y_mean': float(data.y.mean()),
            'y_sd': float(data.y.std(ddof=1)),
            'constant_y': data.constant_y,
            'x_min': float(data.X.min()),
            'x_max': float(data.X.max()),
        }
