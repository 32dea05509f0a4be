"""Exception hierarchy shared by all fastlimit modules."""


class FastLimitError(Exception):
    """Base class for every error raised by this package."""


# graphs


class GraphError(FastLimitError, ValueError):
    pass


class NonMonotone(GraphError):
    pass


class DuplicateKnot(GraphError):
    pass


class EmptyGraph(GraphError):
    pass


class InconsistentSlope(GraphError):
    pass


class OutOfDomain(FastLimitError, ValueError):
    pass


class MissingGrowthConstants(GraphError):
    pass


# solvers


class SolverError(FastLimitError, RuntimeError):
    pass


class NonFinite(SolverError):
    pass


class NoBracket(SolverError):
    pass


class NoConvergence(SolverError):
    def __init__(self, max_iters, last_residual):
        super().__init__(
            f"no convergence after {max_iters} iterations "
            f"(last residual {last_residual:.3e})"
        )
        self.max_iters = max_iters
        self.last_residual = last_residual


class Aborted(SolverError):
    def __init__(self, step, cause):
        super().__init__(f"aborted at step {step}: {cause}")
        self.step = step
        self.cause = cause


# metrics


class ShapeMismatch(FastLimitError, ValueError):
    pass


class TauTooLarge(FastLimitError, ValueError):
    pass


class XiTooLarge(FastLimitError, ValueError):
    pass


class EmptyInterior(FastLimitError, ValueError):
    pass


# configuration


class ConfigError(FastLimitError, ValueError):
    pass


class MissingConfig(ConfigError):
    pass
