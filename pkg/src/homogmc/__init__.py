"""Monte Carlo laboratory for a 1-d parabolic PDE with a large, rapidly
oscillating random potential: probabilistic solver, limit objects, and
epsilon-sweep experiments that test the limit laws statistically."""

__version__ = "0.1.0"

from .field import (
    CorrelationModel,
    KernelField,
    correlation_model,
    empirical_correlation,
    make_field,
    sample_field,
)
from .fk import RegimeTag, ScalingRegime, classify, estimate_u
from .paths import LocalTimeGrid, PathGrid, local_time, rescale_path, simulate_path

__all__ = [
    "CorrelationModel",
    "KernelField",
    "LocalTimeGrid",
    "PathGrid",
    "RegimeTag",
    "ScalingRegime",
    "classify",
    "correlation_model",
    "empirical_correlation",
    "estimate_u",
    "local_time",
    "make_field",
    "rescale_path",
    "sample_field",
    "simulate_path",
    "__version__",
]
