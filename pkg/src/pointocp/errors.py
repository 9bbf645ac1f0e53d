"""Exception types raised across the package."""


class PointOcpError(Exception):
    """Base class for all errors raised by pointocp."""


class PointOutsideDomain(PointOcpError):
    pass


class MeshMismatch(PointOcpError):
    pass


class NotNested(PointOcpError):
    pass


class NegativeReactionCoefficient(PointOcpError):
    pass


class SolverDivergence(PointOcpError):
    pass


class NewtonDivergence(PointOcpError):
    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


class OuterDivergence(PointOcpError):
    """The optimization loop hit its iteration cap.

    The partially converged solution is attached so callers can inspect
    the iteration history.
    """

    def __init__(self, message, solution=None):
        super().__init__(message)
        self.solution = solution


class TooFewPoints(PointOcpError):
    pass


class ConfigError(PointOcpError):
    """Invalid run configuration; ``problems`` lists every violation found."""

    def __init__(self, problems):
        if isinstance(problems, str):
            problems = [problems]
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))
