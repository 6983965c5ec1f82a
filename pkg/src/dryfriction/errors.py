"""Exception types raised by the simulator."""


class ConfigurationError(ValueError):
    """A configuration value violates one of the documented invariants."""


class ContractError(ValueError):
    """An operation was called with arguments outside its precondition."""


class NumericalFailure(RuntimeError):
    """The state became non-finite, or a root solve failed to converge."""

    def __init__(self, message, step=None):
        super().__init__(message)
        self.step = step
