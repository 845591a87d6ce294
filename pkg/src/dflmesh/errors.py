"""Exception types shared across the package.

The CLI maps these onto exit codes: configuration problems exit with 2,
numeric/protocol failures exit with 3.
"""

__all__ = [
    "DflmeshError",
    "ConfigError",
    "DisconnectedGraphError",
    "NotConvergedError",
    "MixingPropertyError",
    "NonFiniteParameterError",
    "BoundGuardError",
]


class DflmeshError(Exception):
    """Base class for errors raised by this package."""


class ConfigError(DflmeshError):
    """Invalid experiment configuration (bad key, bad value, bad file)."""


class DisconnectedGraphError(DflmeshError):
    """An operation that requires a connected graph received a disconnected one."""


class NotConvergedError(DflmeshError):
    """An iterative eigensolve exhausted its iteration budget."""


class MixingPropertyError(DflmeshError):
    """A constructed gossip matrix violates the required mixing-matrix axioms."""


class NonFiniteParameterError(DflmeshError):
    """Training produced NaN or infinite parameters."""


class BoundGuardError(DflmeshError):
    """Bound evaluation outside its validity region (stepsize guard, sign guard)."""
