"""Exception taxonomy shared across the toolkit.

The CLI maps these onto distinct exit codes, so raise the most specific
class that applies.
"""


class KftuneError(Exception):
    """Base class for all toolkit errors."""


class ConfigError(KftuneError):
    """Bad or inconsistent configuration (unknown preset, invalid combo)."""


class ShapeError(KftuneError):
    """Operand shapes incompatible with the requested operation."""


class DefinitenessError(KftuneError):
    """A matrix required to be SPD failed its Cholesky factorization."""


class SingularityError(KftuneError):
    """Geometric degeneracy (e.g. target at the sensor origin)."""


class ContractError(KftuneError):
    """Caller violated an API precondition (misaligned lengths, unpaired data)."""


class InsufficientDataError(KftuneError):
    """Not enough samples for the requested statistic."""


class ParseError(KftuneError):
    """Malformed input file."""

    def __init__(self, message, line_number=None):
        if line_number is not None:
            message = f"line {line_number}: {message}"
        super().__init__(message)
        self.line_number = line_number


class UnavailableError(KftuneError):
    """The requested quantity does not exist in this configuration
    (e.g. oracle noise on a Cartesian-noise benchmark)."""


class TrainingError(KftuneError):
    """Optimization aborted (non-finite loss or gradient)."""
