"""Exception types shared across the package.

Exit-code mapping used by the CLI: validation failures exit 2, capacity and
budget failures exit 3, numerical-convergence failures exit 4.
"""


class GremError(Exception):
    """Base class for all package errors."""


class DomainError(GremError):
    """Argument outside the admissible domain (e.g. theta outside the MGF domain)."""


class NoRootError(GremError):
    """The tilt equation has no root: sup g(theta) < log(m).

    Carries the achieved supremum so the caller can report how far the
    offspring mean is from admissible.
    """

    def __init__(self, message: str, supremum: float):
        super().__init__(message)
        self.supremum = supremum


class SizeError(GremError):
    """Exact enumeration would exceed the configured cap."""


class CapacityError(GremError):
    """Simulation frontier or per-node child count exceeded its budget."""


class BudgetError(GremError):
    """Grid DP would exceed the memory/cell budget."""


class ConvergenceError(GremError):
    """A numerical tail/tolerance target could not be met within budget."""


class WindowError(GremError):
    """A test function looks below the recorded window floor."""


class ValidationFailure(GremError):
    """A model spec failed validation; carries the report."""

    def __init__(self, report):
        super().__init__(str(report))
        self.report = report


class ScheduleWarning(UserWarning):
    """Advisory: a schedule sequence condition degrades at the requested n."""
