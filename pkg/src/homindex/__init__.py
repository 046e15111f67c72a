"""Numerical verification of a resolvent trace formula for Schroedinger-type operators.

The package assembles D = d/dt + A(t) with A(t) = D2 + h(t) A on a
discretized line, evaluates the homological index on one side and a path
integral over the inner space on the other, and provides the multi-index
calculus for derivatives of resolvent powers used in the comparison.
"""

from .errors import (
    AccuracyError,
    ConfigurationError,
    DegenerateEndpointError,
    DimensionError,
    DiscretizationError,
    DomainError,
    GuardError,
    HomIndexError,
    ParameterError,
    ResourceError,
    SpectralError,
)
from .model import (
    PROFILE_PRESETS,
    Generator,
    LineDiscretization,
    ModelSpec,
    Profile,
    scalar_model,
)
from .operators import HermitianOperator, KroneckerShape
from .trace_formula import (
    TraceReport,
    c_constant,
    homological_index_lhs,
    rhs_integral,
    spectral_flow_crossings,
    witten_index_estimate,
)

__version__ = "0.1.0"

__all__ = [
    "AccuracyError",
    "ConfigurationError",
    "DegenerateEndpointError",
    "DimensionError",
    "DiscretizationError",
    "DomainError",
    "Generator",
    "GuardError",
    "HermitianOperator",
    "HomIndexError",
    "KroneckerShape",
    "LineDiscretization",
    "ModelSpec",
    "PROFILE_PRESETS",
    "ParameterError",
    "Profile",
    "ResourceError",
    "SpectralError",
    "TraceReport",
    "c_constant",
    "homological_index_lhs",
    "rhs_integral",
    "scalar_model",
    "spectral_flow_crossings",
    "witten_index_estimate",
]
