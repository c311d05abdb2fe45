"""Exceptions raised by the walsh-hardness toolkit.

Every error derives from ``ValueError`` so callers that only care about bad
input can keep catching that, while the CLI maps specific kinds to exit codes.
"""
from typing import Optional, Sequence, Tuple


class WalshHardnessError(ValueError):
    """Base class for all toolkit errors."""


class DimensionError(WalshHardnessError):
    """An input has the wrong length or shape for the problem."""


class ConfigurationError(WalshHardnessError):
    """Invalid problem parameters, experiment settings or CLI arguments."""


class CapacityError(WalshHardnessError):
    """A request exceeds what exhaustive enumeration or dense matrices allow."""


class SchemaParseError(WalshHardnessError):
    """A schema string contains symbols other than 0, 1 and *."""


class ArgumentError(WalshHardnessError):
    """An operation received arguments that contradict its preconditions."""


class NoIndependentPairError(WalshHardnessError):
    """The linkage structure has no pair of variables in different groups."""


class UndefinedCorrelationError(WalshHardnessError):
    """A correlation was requested on constant or fully tied input."""


class DegenerateDistributionError(WalshHardnessError):
    """Every repetition of an entropy-based metric was degenerate."""


class IngestionError(WalshHardnessError):
    """Run or metric records could not be joined."""


class InsufficientCoverageError(WalshHardnessError):
    """A schema cell has no samples in the population estimator."""

    def __init__(self, subset: Sequence[int], cell: Tuple[int, ...]):
        self.subset = tuple(subset)
        self.cell = tuple(cell)
        super().__init__(
            f"No samples match cell {self.cell} over variables {self.subset}"
        )


class UnreachableReliabilityError(WalshHardnessError):
    """Population doubling hit the cap before runs became reliable."""

    def __init__(self, message: str, last_population: Optional[int] = None):
        self.last_population = last_population
        super().__init__(message)


class CollinearityError(WalshHardnessError):
    """Regression columns are linearly dependent."""

    def __init__(self, columns: Sequence[str]):
        self.columns = list(columns)
        super().__init__(
            "Regressors are collinear: " + ", ".join(self.columns)
            if self.columns
            else "Regressors are collinear"
        )
