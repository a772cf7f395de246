from .test_functions import FUNCTIONS, TestFunction, TrueReport, get_function, quadrature_report, true_report
from .design import Scenario, make_dataset, maximin_lhd
from .harness import MetricRow, run_demo_counts, run_scenario

__all__ = [
    'FUNCTIONS', 'TestFunction', 'TrueReport', 'get_function', 'quadrature_report', 'true_report',
    'Scenario', 'make_dataset', 'maximin_lhd',
    'MetricRow', 'run_demo_counts', 'run_scenario',
]
