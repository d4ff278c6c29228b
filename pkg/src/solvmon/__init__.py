"""Continuous solvency-ratio monitoring with polynomial NAV proxies.

Subpackage map: ``transitions`` (risk factors and probable boxes), ``esg``
(risk-neutral scenario tables), ``alm`` (participating-savings projection),
``proxy`` (polynomial proxy calibration), ``econometrics`` (covariances,
tests, intervals), ``solvency`` (standard-formula assembly), ``monitor``
(the monitoring service), ``comparison`` (equal-budget strategy study),
``config``/``cli``/``api`` (run configuration, command line, HTTP surface).
"""

from . import alm, api, cli, comparison, config, econometrics, esg, monitor, proxy, solvency, transitions
from .errors import (
    CalibrationError,
    ConfigError,
    DataError,
    DomainError,
    FitError,
    NumericalError,
    SolvmonError,
)

__version__ = "0.1.0"

__all__ = [
    "alm", "api", "cli", "comparison", "config", "econometrics", "esg",
    "monitor", "proxy", "solvency", "transitions",
    "SolvmonError", "ConfigError", "DataError", "CalibrationError",
    "DomainError", "NumericalError", "FitError",
    "__version__",
]
