"""Exception hierarchy shared by every subsystem.

The CLI maps these onto exit codes, so each class belongs to exactly one of
the input/schema, recipe-compatibility, or runtime families.
"""


class CohortComfortError(Exception):
    """Base class for all library errors."""


# input / schema family (exit code 2)


class InputError(CohortComfortError):
    pass


class SchemaError(InputError):
    """A required column or feature is missing."""

    def __init__(self, message, missing=()):
        super().__init__(message)
        self.missing = tuple(missing)


class LabelMappingError(InputError):
    def __init__(self, message, row_index=None):
        super().__init__(message)
        self.row_index = row_index


class EmptyDatasetError(InputError):
    pass


class ValidationError(InputError, ValueError):
    """A value violates a domain-type invariant."""


# configuration / recipe family (exit code 3)


class ConfigurationError(CohortComfortError):
    pass


class RecipeIncompatibleError(ConfigurationError):
    def __init__(self, message, missing=()):
        super().__init__(message)
        self.missing = tuple(missing)


# runtime family (exit code 4)


class ParameterError(CohortComfortError, ValueError):
    pass


class DegenerateSplitError(CohortComfortError):
    pass


class EmptyRecordError(CohortComfortError):
    pass


class InsufficientDataError(CohortComfortError):
    pass


class MetricInputError(CohortComfortError, ValueError):
    pass


class NormalizationError(CohortComfortError, ValueError):
    pass


class AlignmentError(CohortComfortError):
    pass


class DegenerateClusteringError(CohortComfortError):
    pass


class NoUsableFeaturesError(ConfigurationError, DegenerateClusteringError):
    """Every clustering feature was dropped for having zero variance."""


class UndefinedMetricError(CohortComfortError):
    pass


class SparseCohortError(CohortComfortError):
    pass


class AssignmentError(CohortComfortError):
    pass


class NumericalError(CohortComfortError, ArithmeticError):
    def __init__(self, message, last_iterate=None):
        super().__init__(message)
        self.last_iterate = last_iterate
