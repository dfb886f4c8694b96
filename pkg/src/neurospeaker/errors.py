"""Exception taxonomy shared by every stage.

The CLI maps these onto its exit-code contract: usage 1, IO 2, config 3,
numeric 4.
"""


class NeurospeakerError(Exception):
    """Base class for all package-specific failures."""


class InputError(NeurospeakerError, ValueError):
    """An operation was called with arguments violating its precondition."""


class DimensionError(InputError):
    """Shapes or dimensionalities contradict each other or the configuration."""


class DegenerateInputError(InputError):
    """Input data is numerically degenerate (e.g. rank-deficient covariance)."""


class ReducedRankError(InputError):
    """A decomposition has fewer usable components than requested."""

    def __init__(self, message: str, usable: int):
        super().__init__(message)
        self.usable = usable


class FilterDesignError(InputError):
    """Filter specification is unrealizable (e.g. cutoff beyond Nyquist)."""


class AlignmentError(InputError):
    """Two feature streams cannot be fused (rate, id, or modality mismatch)."""


class ConfigError(NeurospeakerError, ValueError):
    """Configuration file or option is invalid."""


class FormatError(NeurospeakerError, IOError):
    """A data file is corrupt or not in the declared format."""


class NumericError(NeurospeakerError, ArithmeticError):
    """A computation produced non-finite values."""


class UsageError(NeurospeakerError):
    """Command line was malformed."""
