"""Exception types raised across the package."""


class MacrowitnessError(Exception):
    """Base class for all package errors."""


class ArgumentError(MacrowitnessError, ValueError):
    """An argument is outside the domain of an operation."""


class CapacityError(MacrowitnessError):
    """The requested register exceeds the configured qubit ceiling."""


class StateValidityError(MacrowitnessError, ValueError):
    """A matrix fails the density-matrix checks (Hermitian, unit trace, PSD)."""


class ParameterError(MacrowitnessError, ValueError):
    """Noise or timing parameters are physically inconsistent."""
