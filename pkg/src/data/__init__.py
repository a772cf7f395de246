from .preprocessor import CSVProcessor
from .ensemble_io import load_any, load_ensemble, load_posterior, save_ensemble, save_posterior

__all__ = ['CSVProcessor', 'load_any', 'load_ensemble', 'load_posterior', 'save_ensemble', 'save_posterior']
