"""Exception types raised by the simulator."""


class GkpStabError(Exception):
    """Base class for all errors raised by this package."""


class TruncationError(GkpStabError):
    """Fock-space cutoff too small for the requested operation."""


class DivergenceError(GkpStabError):
    """Matrix exponential failed its a-posteriori accuracy check."""


class ShapeError(GkpStabError):
    """Operand shapes do not match the expected space."""


class ConvergenceError(GkpStabError):
    """An iterative construction did not converge."""


class DegeneracyError(GkpStabError):
    """Code words overlap too strongly to define a logical qubit."""


class SpecError(GkpStabError):
    """Inconsistent protocol specification."""


class CompletenessError(GkpStabError):
    """Kraus operators do not sum to the identity."""


class StepControlError(GkpStabError):
    """Adaptive integrator could not meet its tolerance."""


class FitError(GkpStabError):
    """Exponential fit of a decay trajectory is unreliable."""


class PrepError(GkpStabError):
    """Logical state preparation did not reach the target quality."""


class ConfigError(GkpStabError):
    """Invalid run configuration."""
