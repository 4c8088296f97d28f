"""Exception hierarchy shared by the solver, policy and simulation layers."""


class NodeLifeError(Exception):
    """Base class for every error raised by this package."""


class ParameterError(NodeLifeError, ValueError):
    """A parameter set violates its domain (e.g. phi >= omega2)."""


class Infeasible(NodeLifeError):
    """No decision meets the delay (or modulation) constraints."""


class NoSignChange(NodeLifeError):
    """The residual does not change sign over the supplied bracket."""


class MaxIterations(NodeLifeError):
    """A root search ran out of iterations before reaching tolerance."""


class EmptyFeasibleSet(NodeLifeError):
    """Every point of an oracle grid violates a constraint."""
