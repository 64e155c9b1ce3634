"""Economic MPC with dissipation-constrained, parameter-varying storage.

Builds and solves the per-step finite-horizon problem with controlled-
dissipativity constraints, simulates the closed loop, and verifies the
feasibility/stability/performance guarantees numerically at runtime.
"""

from empc.errors import (ConfigError, DomainError, EmpcError,
                         InfeasibleProblemError, NotPeriodicError,
                         NumericFailureError, SimulationError)

__all__ = [
    "ConfigError", "DomainError", "EmpcError", "InfeasibleProblemError",
    "NotPeriodicError", "NumericFailureError", "SimulationError",
]

__version__ = "0.1.0"
