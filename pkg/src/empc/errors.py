"""Exception types shared across the package."""


class EmpcError(Exception):
    """Base class for all package-specific errors."""


class ConfigError(EmpcError):
    """Invalid or inconsistent experiment configuration."""


class DomainError(EmpcError):
    """Argument outside its declared domain (e.g. theta outside its box)."""


class InfeasibleProblemError(EmpcError):
    """No feasible point could be produced for a problem that requires one."""


class NotPeriodicError(EmpcError):
    """Zero-input orbit failed to close within tolerance."""


class NumericFailureError(EmpcError):
    """A callable produced a non-finite value during a solve."""

    def __init__(self, label: str):
        super().__init__(f"non-finite value in block '{label}'")
        self.label = label


class SimulationError(EmpcError):
    """Closed-loop run aborted; carries the failing step index."""

    def __init__(self, step: int, message: str):
        super().__init__(f"step {step}: {message}")
        self.step = step
