"""
Errors
======
One hierarchy for everything the services raise. Management commands map
these onto exit codes; library callers can catch ``EntroCertError``.
"""


class EntroCertError(Exception):
    """Base class for all entrocert failures."""


class InvalidDistributionError(EntroCertError, ValueError):
    """Probability vector, matrix or density violates positivity/normalization."""


class DimensionMismatchError(EntroCertError, ValueError):
    pass


class OperatorError(EntroCertError, ValueError):
    """Doubly-stochastic operator invariant violated."""


class UnderResolvedError(EntroCertError, ValueError):
    """Density grid too coarse for the narrowest filter or feature."""


class DegenerateRatioError(EntroCertError, ValueError):
    """Filter weight fell below the configured floor."""

    def __init__(self, message: str, filter_index: int | None = None, arm: str | None = None):
        super().__init__(message)
        self.filter_index = filter_index
        self.arm          = arm


class CoverageError(EntroCertError, ValueError):
    """Filter banks do not cover the density's support."""


class IncommensurateBinError(EntroCertError, ValueError):
    pass


class KindMismatchError(EntroCertError, ValueError):
    """Entropy bound kinds do not match the requested inequality."""


class SchemaError(EntroCertError, ValueError):
    """Input file does not follow its CSV/JSON schema."""

    def __init__(self, message: str, line: int | None = None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class EmptyHistogramError(EntroCertError, ValueError):
    pass


class PeakInWingsError(EntroCertError, ValueError):
    """Background wings contain part of the coincidence peak."""


class ConfigError(EntroCertError, ValueError):
    pass


class UnsupportedProfileError(EntroCertError, ValueError):
    pass


class InvalidBankError(EntroCertError, ValueError):
    """Filter bank geometry is inconsistent (ordering, lengths, emptiness)."""
