"""Exception types shared across the library."""


class PlanningError(Exception):
    """Base class for all errors raised by legplan."""


class OutOfBounds(PlanningError):
    """A query point lies outside the elevation map extent."""


class InvalidSpec(PlanningError):
    """A scenario specification violates its invariants."""


class ParseError(PlanningError):
    """Malformed map or path document."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class Unreachable(PlanningError):
    """IK target outside the annular workspace of the leg."""


class LimitViolation(PlanningError):
    """IK target reachable only with joint angles outside their limits."""


class NoStanceLegs(PlanningError):
    """Operation requires at least one stance leg."""


class NoFeasiblePosture(PlanningError):
    """No candidate body posture satisfies all constraints."""


class StepInfeasible(PlanningError):
    """Every candidate step length failed validation."""


class Unstabilizable(PlanningError):
    """No lateral body displacement within bounds restores stability."""


class InsufficientKnots(PlanningError):
    """Spline requested with fewer knots than degree + 1."""


class DegenerateEllipse(PlanningError):
    """Informed sampling requested with c_best below the focal distance."""


class NoPath(PlanningError):
    """Grid search found no route to the goal."""


class Timeout(PlanningError):
    """Planning budget exhausted before a solution was found."""

    def __init__(self, message="planning budget exhausted", elapsed=None):
        super().__init__(message)
        self.elapsed = elapsed


class EmptyPath(PlanningError):
    """Path operation requires at least two states."""
