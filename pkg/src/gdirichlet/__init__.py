"""Weighted Dirichlet-type approximation: weights, lattice geometry, windowed
solvability oracles, badly approximable systems and zero-one experiments."""

__version__ = "0.1.0"

from .errors import (  # noqa: E402
    BudgetError,
    CertificateError,
    ConfigError,
    ContractError,
    DomainError,
    ExtrapolationError,
    GDirichletError,
    RangeError,
)
from .kernels import IMPLEMENTATION  # noqa: E402
from .geometry import AffinePair  # noqa: E402
from .weights import WeightSystem  # noqa: E402
from .oracle import dirichlet_on_window, witness_interval  # noqa: E402

__all__ = [
    "AffinePair",
    "BudgetError",
    "CertificateError",
    "ConfigError",
    "ContractError",
    "DomainError",
    "ExtrapolationError",
    "GDirichletError",
    "IMPLEMENTATION",
    "RangeError",
    "WeightSystem",
    "dirichlet_on_window",
    "witness_interval",
    "__version__",
]
