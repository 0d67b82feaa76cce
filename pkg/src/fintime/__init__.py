"""Finite-time stability certificates for differential inclusions."""

from .functions import ComparisonNonlinearity, ConfigError, GainFunction, RateSpec
from .comparison import (
    SettlingCertificate,
    barrier_integral,
    check_comparison,
    check_gronwall_power,
    comparison_solution,
    cumulative_gain,
    settling_time_bound,
)

__version__ = "0.1.0"

__all__ = [
    "ComparisonNonlinearity",
    "ConfigError",
    "GainFunction",
    "RateSpec",
    "SettlingCertificate",
    "barrier_integral",
    "check_comparison",
    "check_gronwall_power",
    "comparison_solution",
    "cumulative_gain",
    "settling_time_bound",
]
