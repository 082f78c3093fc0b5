"""Exception hierarchy shared by all beamplan modules."""


class BeamplanError(Exception):
    """Base class for all errors raised by this package."""


class ConfigError(BeamplanError):
    """Malformed scenario file, request, or configuration value."""


class NonPositiveParameter(ConfigError):
    """A physical constant that must be positive is zero or negative."""


class InfeasibleHorizon(ConfigError):
    """The mission duration is too short to reach the final location."""


class MissingThreshold(BeamplanError):
    """An outage quantity was requested on a scenario without an SNR threshold."""


class SolverError(BeamplanError):
    """Base class for numerical-solver failures."""


class Infeasible(SolverError):
    """The feasible set of the problem is empty."""


class Unbounded(SolverError):
    """The objective is unbounded over the feasible set."""


class IterationLimit(SolverError):
    """An iterative solver hit its iteration cap before converging."""


class NoStrictlyFeasibleStart(SolverError):
    """No strictly feasible point could be produced for a barrier solve."""


class NoSignChange(SolverError):
    """A bisection predicate does not change value over the bracket."""


class BudgetExceeded(BeamplanError):
    """A brute-force enumeration would exceed its combination budget."""
