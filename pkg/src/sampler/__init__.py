from .bart import (
    BartSampler, Dataset, PosteriorDraw, SamplerConfig, SamplerDiagnostics,
    fit, log_marginal_likelihood, predict, sigma_trend,
)

__all__ = [
    'BartSampler', 'Dataset', 'PosteriorDraw', 'SamplerConfig', 'SamplerDiagnostics',
    'fit', 'log_marginal_likelihood', 'predict', 'sigma_trend',
]
