"""
Exception types raised by toruscascade.

Each error also derives from the builtin exception a caller would expect,
so ``except ValueError`` style handling keeps working.
"""


class CascadeError(Exception):
    """Base class for all toruscascade errors."""


class LatticeOverflowError(CascadeError, OverflowError):
    """An integer quantity left the supported 128-bit signed range, or a phase its exact range."""


class MultiplierSearchError(CascadeError, RuntimeError):
    """The multiplier search hit its cap (an internal bug, never expected)."""


class ReductionMismatchError(CascadeError, RuntimeError):
    """Brute-force interactions differ from the reduced chain pattern."""


class BetaUnderflowError(CascadeError, ArithmeticError):
    """A paper-mode amplitude is not representable in binary64."""


class ScheduleError(CascadeError, ValueError):
    """A schedule cannot be built with the requested parameters."""


class ResolutionError(CascadeError, ValueError):
    """A real-space grid is too coarse for the active Fourier mode."""


class IntegrationError(CascadeError, RuntimeError):
    """The adaptive integrator failed on a segment."""


class ConfigError(CascadeError, ValueError):
    """Invalid run configuration."""


class ArtifactError(CascadeError, FileNotFoundError):
    """A required artifact is missing or unreadable."""


class VerificationError(CascadeError, RuntimeError):
    """A certification or acceptance criterion failed."""
