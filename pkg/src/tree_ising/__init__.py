"""Ferromagnetic Ising models on sparse, locally tree-like graphs.

Exact tree solvers, belief propagation, population dynamics for the cavity
fixed point, the Bethe free entropy, and brute-force / Monte Carlo oracles.
"""

from tree_ising.core import (
    CapacityError,
    CriticalPoint,
    IsingError,
    IsingParams,
    ParameterError,
    SpinDistribution,
    atanh_clamped,
    critical_beta,
    xi,
)

__version__ = "0.1.0"

__all__ = [
    "CapacityError",
    "CriticalPoint",
    "IsingError",
    "IsingParams",
    "ParameterError",
    "SpinDistribution",
    "atanh_clamped",
    "critical_beta",
    "xi",
    "__version__",
]
