"""Privacy-preserving release of pandemic data products.

Subgroup case counts go through a consistent hierarchical Laplace release,
case locations through geo-indistinguishable doppelganger sets, and contact
networks through location perturbation or edge randomized response.
"""

from .errors import (
    ContractError,
    InvalidInputError,
    InvalidParameterError,
    PrivacyToolkitError,
    SingularDesignError,
    StateError,
)
from .geo import GeoPoint
from .privacy import (
    BudgetKind,
    PrivacyBudget,
    RandomSource,
    Sensitivity,
    compose_parallel,
    compose_sequential,
    perturb_location,
    sample_laplace,
    sample_planar_offset,
    sanitize_scalar,
)

__all__ = [
    "BudgetKind",
    "ContractError",
    "GeoPoint",
    "InvalidInputError",
    "InvalidParameterError",
    "PrivacyBudget",
    "PrivacyToolkitError",
    "RandomSource",
    "Sensitivity",
    "SingularDesignError",
    "StateError",
    "compose_parallel",
    "compose_sequential",
    "perturb_location",
    "sample_laplace",
    "sample_planar_offset",
    "sanitize_scalar",
]

__version__ = "0.1.0"
