"""Exception hierarchy shared across the package."""


class NoShowError(Exception):
    """Base class for all errors raised by this package."""


class SchemaError(NoShowError):
    """Input file does not match the expected column schema."""


class ValidationError(NoShowError):
    """A value or parameter violates its contract."""


class EncodingError(NoShowError):
    """A record carries a level the feature schema does not know."""


class DimensionError(NoShowError):
    """A row's width does not match the model's input width."""


class SplitError(NoShowError):
    """Train/test split cannot satisfy its stratification contract."""


class WeightError(NoShowError):
    """Class weights are undefined (e.g. a single-class label vector)."""


class ConvergenceError(NoShowError):
    """Solver failed to converge; carries the last objective value."""

    def __init__(self, message, last_objective=None):
        super().__init__(message)
        self.last_objective = last_objective


class DivergenceError(NoShowError):
    """Training produced a non-finite loss; carries the iteration index."""

    def __init__(self, message, iteration=None):
        super().__init__(message)
        self.iteration = iteration


class CriterionError(NoShowError):
    """Impurity criterion called on an empty node."""


class SearchError(NoShowError):
    """Every cell of a hyperparameter grid failed."""


class MetricError(NoShowError):
    """A metric is undefined for the given inputs."""


class PolicyError(NoShowError):
    """Cut-off policy fractions are invalid."""


class PropagationError(NoShowError):
    """Relevance propagation hit a non-finite activation."""


class PersistenceError(NoShowError):
    """A persisted artifact cannot be loaded or is of the wrong kind."""


class UnknownIdError(PersistenceError):
    """No dataset, model, or policy is stored under the given id."""
