"""Exception hierarchy shared by every dfsq module."""


class DFSQError(Exception):
    """Base class for all toolkit errors."""


class InvalidParameterError(DFSQError, ValueError):
    pass


class InvalidInputError(DFSQError, ValueError):
    pass


class DivergenceError(DFSQError, ArithmeticError):
    """An integral failed to converge (heavy tail, non-integrable singularity)."""


class DesignInfeasibleError(DFSQError):
    """A point density cannot be normalized."""


class TheoryUndefinedError(DFSQError):
    """A high-resolution limit is infinite or undefined for the given inputs."""


class EstimationError(DFSQError):
    pass


class InternalInconsistencyError(DFSQError):
    pass
