"""Exception types shared across the package.

Two families matter to callers: ``DomainError`` for rejected inputs
(bad parameters, malformed files, violated preconditions) and
``NumericalError`` for computations that ran but failed (singular
matrices, non-converged solvers). The CLI maps them to exit codes
1 and 2 respectively.
"""


class DomainError(ValueError):
    """An input violates a documented precondition."""


class ConfigurationError(DomainError):
    """A configuration value is inconsistent or unsupported."""


class UndefinedEstimateError(DomainError):
    """The requested estimate is undefined for this data (e.g. PLV with zero spikes)."""


class NumericalError(RuntimeError):
    """A numerical routine failed to produce a trustworthy result."""


class SingularGramError(NumericalError):
    """A Gram matrix is numerically rank deficient."""
