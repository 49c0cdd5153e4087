"""Exception types shared across the package."""


class ConfigurationError(ValueError):
    """Invalid or inconsistent configuration (bad dimensions, missing parameters)."""


class NumericalError(RuntimeError):
    """A linear-algebra step failed beyond repair (indefinite system, no PSD fix).

    ``context`` carries structured extras such as the experiment round in which
    the failure happened.
    """

    def __init__(self, message, **context):
        super().__init__(message)
        self.context = dict(context)
