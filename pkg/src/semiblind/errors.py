"""Exception types raised across the package."""


class DimensionError(ValueError):
    """Operand shapes are incompatible."""


class ConfigError(ValueError):
    """Invalid system or experiment configuration.

    ``fields`` lists the offending configuration keys (dotted key paths when
    the error comes from a configuration file).
    """

    def __init__(self, message, fields=()):
        super().__init__(message)
        self.fields = tuple(fields)


class DegenerateInputError(ValueError):
    """Input is valid in shape but degenerate (e.g. all zeros)."""


class UsageError(ValueError):
    """An operation was called on data of the wrong kind (e.g. wrong protocol)."""


class NumericalFailure(ArithmeticError):
    """A receiver produced a non-finite residual."""

    def __init__(self, message, iteration):
        super().__init__(message)
        self.iteration = iteration
