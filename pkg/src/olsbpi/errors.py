"""Exception types raised across the package.

Every error derives from :class:`OlsbpiError`, which can carry a context
record (module, operation, seed, iteration) that the CLI prints verbatim.
"""


class OlsbpiError(Exception):
    """Base class for all package errors."""

    def __init__(self, message="", **context):
        super().__init__(message)
        self.message = message
        self.context = {k: v for k, v in context.items() if v is not None}

    def add_context(self, **context):
        for key, value in context.items():
            if value is not None and key not in self.context:
                self.context[key] = value
        return self

    def __str__(self):
        if not self.context:
            return self.message
        ctx = " ".join(f"{k}={v}" for k, v in self.context.items())
        return f"{self.message} [{ctx}]"


# matrix algebra
class AsymmetricInput(OlsbpiError, ValueError):
    pass


class BadLength(OlsbpiError, ValueError):
    pass


class DimensionMismatch(OlsbpiError, ValueError):
    pass


# model / solver numerics
class NumericalFailure(OlsbpiError, ArithmeticError):
    """Base for failures of a numerical procedure (CLI exit code 3)."""


class SingularGuu(NumericalFailure):
    pass


class SingularInner(NumericalFailure):
    pass


class SingularOperator(NumericalFailure):
    pass


class NotAdmissible(NumericalFailure):
    pass


class NoConvergence(NumericalFailure):
    pass


class OracleDiverged(NumericalFailure):
    pass


class Blowup(NumericalFailure):
    pass


class TooFewSamples(NumericalFailure):
    pass


class OdeUnstable(NumericalFailure):
    pass


class NotHurwitz(NumericalFailure):
    pass


class MissingABData(OlsbpiError, FileNotFoundError):
    pass


class EmptyReport(OlsbpiError, ValueError):
    pass


# configuration
class ConfigError(OlsbpiError):
    """Base for configuration problems (CLI exit code 2)."""


class ConfigParseError(ConfigError):
    pass


class ConfigValidationError(ConfigError):
    def __init__(self, errors):
        self.errors = list(errors)
        lines = "\n".join(f"  {path}: {msg}" for path, msg in self.errors)
        super().__init__(f"{len(self.errors)} validation error(s):\n{lines}")


class MonotonicityWarning(UserWarning):
    """Policy-iteration value matrices failed to decrease in Loewner order."""


class IllConditionedWarning(UserWarning):
    """The data matrix psi is close to singular."""
