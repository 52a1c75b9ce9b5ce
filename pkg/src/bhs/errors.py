"""Exception types shared across the package."""


class InvalidInputError(ValueError):
    """An argument violates an operation's preconditions."""


class DegenerateDenominatorError(InvalidInputError):
    """The control-arm mean is zero, so the ratio estimator is undefined."""


class UnsupportedHyperparameterError(InvalidInputError):
    """The closed-form path was asked for hyperparameters it cannot handle."""


class ConfigurationError(ValueError):
    """A scenario, statistic or axis specification is inconsistent."""


class EmptySelectionError(ValueError):
    """No experiments survived selection, so metrics are undefined."""


class NotFoundError(KeyError):
    """A namespace is absent from the hyperparameter store."""

    def __str__(self) -> str:
        return str(self.args[0]) if self.args else "not found"


class StoreConflictError(RuntimeError):
    """Another writer holds the store lock. Safe to retry."""

    retryable = True
