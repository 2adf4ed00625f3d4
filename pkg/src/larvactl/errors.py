"""Exception hierarchy.

``ScenarioError`` covers bad input (CLI exit code 1); ``NumericalError``
covers failures of the numerics themselves (exit code 2).
"""


class LarvaError(Exception):
    pass


class ScenarioError(LarvaError, ValueError):
    pass


class HypothesisError(ScenarioError):
    """A standing hypothesis on the rates or environment is violated."""


class InvalidRateError(ScenarioError):
    pass


class InvalidInitialCondition(ScenarioError):
    pass


class InvalidReference(ScenarioError):
    pass


class NumericalError(LarvaError, RuntimeError):
    pass


class NoEquilibriumError(NumericalError):
    pass


class NegativeEquilibriumError(NoEquilibriumError):
    pass


class DivergenceError(NumericalError):
    pass


class InfeasibleFeedforward(NumericalError):
    pass


class DegenerateQError(NumericalError):
    pass


class HypothesisWarning(UserWarning):
    """Raised (as a warning) when a hypothesis cannot be verified on the grid."""
