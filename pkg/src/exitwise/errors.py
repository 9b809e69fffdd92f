"""Exception types raised by the exitwise toolkit."""


class ExitwiseError(Exception):
    """Base class for all toolkit errors."""


class DimensionError(ExitwiseError, ValueError):
    """Array shapes do not line up for the requested operation."""


class DegenerateInputError(ExitwiseError, ValueError):
    """Input is mathematically degenerate (zero norm, all-zero confidences)."""


class EmptyDomainError(ExitwiseError, ValueError):
    """A non-empty sample set was required."""


class UnassignedExitError(ExitwiseError, RuntimeError):
    """Self-training entries were used before exits were assigned."""


class MissingLabelsError(ExitwiseError, ValueError):
    """Evaluation needs labels but the set carries none."""


class BudgetError(ExitwiseError, ValueError):
    """Requested compute budget cannot be met by any exit policy."""


class CsvFormatError(ExitwiseError, ValueError):
    """Delimited data file violates the expected row layout."""


class CheckpointFormatError(ExitwiseError, ValueError):
    """Checkpoint header or version is not recognized."""


class CheckpointParseError(ExitwiseError, ValueError):
    """Checkpoint body is truncated or malformed."""


class ConfigError(ExitwiseError, ValueError):
    """Configuration file or run options are invalid."""
