"""Exception types raised across the package."""


class SquidHQCError(Exception):
    """Base class for all package errors."""


class TruncationError(SquidHQCError):
    """Photon cutoff too small for the requested system."""


class DomainError(SquidHQCError, ValueError):
    """Control coordinates outside the parametrization domain."""


class DegeneracyResolutionError(SquidHQCError):
    """The kernel tolerance window does not separate the zero cluster cleanly."""

    def __init__(self, message, candidate_dims=()):
        super().__init__(message)
        self.candidate_dims = tuple(candidate_dims)


class GaugeDiscontinuityError(SquidHQCError):
    """Overlap between consecutive frames is (nearly) singular."""


class StepSizeError(SquidHQCError):
    """Integration or discretisation step too coarse for the requested accuracy."""


class InfeasibleTargetError(SquidHQCError):
    """No loop in the synthesis family reaches the requested gate angle."""


class ConfigError(SquidHQCError, ValueError):
    """Invalid scenario configuration; ``path`` names the offending field."""

    def __init__(self, path, message):
        super().__init__(f"{path}: {message}")
        self.path = path
