import numpy as np
import pandas as pd
import pytest

from src.data.preprocessor import CSVProcessor
from src.errors import DataError
from src.sampler.bart import Dataset


def test_round_trip_through_csv(tmp_path):
    rng = np.random.default_rng(0)
    data = Dataset(rng.random((12, 3)), rng.standard_normal(12))
    path = tmp_path / "data" / "train.csv"
    CSVProcessor.save_results(CSVProcessor.dataset_to_frame(data), path)
    loaded = CSVProcessor.load_dataset(path)
    np.testing.assert_allclose(loaded.X, data.X)
    np.testing.assert_allclose(loaded.y, data.y)


def test_response_must_be_last():
    df = pd.DataFrame({"y": [1.0, 2.0], "x1": [0.1, 0.2]})
    with pytest.raises(DataError, match="last column"):
        CSVProcessor.frame_to_dataset(df)


def test_missing_response():
    with pytest.raises(DataError, match="Missing required columns"):
        CSVProcessor.frame_to_dataset(pd.DataFrame({"x1": [0.1, 0.2]}))


def test_non_numeric_and_missing_values():
    with pytest.raises(DataError):
        CSVProcessor.frame_to_dataset(pd.DataFrame({"x1": ["a", "b"], "y": [1.0, 2.0]}))
    with pytest.raises(DataError):
        CSVProcessor.frame_to_dataset(pd.DataFrame({"x1": [0.1, None], "y": [1.0, 2.0]}))


def test_data_statistics():
    data = Dataset(np.array([[0.0], [0.5], [1.0]]), np.array([1.0, 1.0, 1.0]))
    stats = CSVProcessor.get_data_statistics(data)
    assert stats["n"] == 3 and stats["p"] == 1
    assert stats["constant_y"] is True
    assert (stats["x_min"], stats["x_max"]) == (0.0, 1.0)
