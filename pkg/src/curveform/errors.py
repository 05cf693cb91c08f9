"""Exception hierarchy shared by all curveform modules."""


class CurveformError(Exception):
    """Base class for every error raised by this package."""


class InvalidArgument(CurveformError, ValueError):
    pass


class InsufficientSamples(CurveformError, ValueError):
    pass


class SingularSystem(CurveformError, ArithmeticError):
    """A matrix that must be full rank is (numerically) rank deficient."""

    def __init__(self, message, condition_number=None):
        super().__init__(message)
        self.condition_number = condition_number


class NotSpanningTree(CurveformError, ValueError):
    pass


class ConfigurationError(CurveformError, ValueError):
    pass


class ScenarioError(CurveformError, ValueError):
    """Scenario failed validation. ``problems`` lists every failed check."""

    def __init__(self, problems):
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))


class FormatError(CurveformError, ValueError):
    """Malformed input file. ``line`` is 1-based when known."""

    def __init__(self, message, path=None, line=None):
        loc = ""
        if path is not None:
            loc = f"{path}"
            if line is not None:
                loc += f":{line}"
            loc += ": "
        elif line is not None:
            loc = f"line {line}: "
        super().__init__(loc + message)
        self.path = path
        self.line = line


class NumericalAbort(CurveformError, ArithmeticError):
    """Integration produced a non-finite value.

    ``log`` holds the trajectory recorded up to (excluding) ``step``.
    """

    def __init__(self, step, log=None):
        super().__init__(f"non-finite state at step {step}")
        self.step = step
        self.log = log
