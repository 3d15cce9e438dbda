"""Exception types shared across the solver, control and simulation layers."""


class DomainViolation(ValueError):
    """An argument lies outside its box constraint beyond tolerance."""


class GridTooCoarse(ValueError):
    """The discretization grid has fewer columns than constraint rows."""


class IterationLimit(RuntimeError):
    """The simplex pivot cap was reached; suspected cycling or degeneracy."""


class ViabilityViolation(RuntimeError):
    """A trajectory left its prescribed state box.

    Attributes
    ----------
    exit_time : first time at which the box was exceeded by more than tol.
    """

    def __init__(self, message, exit_time):
        super().__init__(message)
        self.exit_time = exit_time


class ScheduleExhausted(RuntimeError):
    """Requested time exceeds the stored slow-trajectory horizon."""


class NoPeriodDetected(RuntimeError):
    """Fewer than three zero crossings found; no period estimate."""


class RankDeficiencyWarning(UserWarning):
    """Constraint rows are numerically near-dependent."""
