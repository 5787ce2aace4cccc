"""Exception hierarchy.

Three failure classes map onto the CLI exit-code contract:
input errors -> 1, violated mathematical preconditions -> 2,
numerical failures -> 3.
"""


class CanardLabError(Exception):
    exit_code = 3


class InputError(CanardLabError):
    exit_code = 1


class PreconditionError(CanardLabError):
    """A mathematical precondition of an operation does not hold."""

    exit_code = 2


class NumericalError(CanardLabError):
    """The computation itself failed (non-convergence, budget exhausted)."""

    exit_code = 3


# --- precondition failures -------------------------------------------------

class UnsupportedOrder(PreconditionError):
    pass


class DomainError(PreconditionError):
    pass


class DegenerateTangencyLocus(PreconditionError):
    pass


class NotSliding(PreconditionError):
    pass


class NotFoldFold(PreconditionError):
    pass


class InvalidP(InputError):
    pass


class NonMonotoneBlend(PreconditionError):
    pass


class AssumptionViolated(PreconditionError):
    """One of the structural assumptions on the slow-fast model fails."""

    def __init__(self, which, message):
        super().__init__(f"{which}: {message}")
        self.which = which


class FiberOutOfRange(PreconditionError):
    pass


class NotADodgingLevel(PreconditionError):
    pass


# --- numerical failures ----------------------------------------------------

class QuadratureError(NumericalError):
    pass


class NoReturn(NumericalError):
    pass


class DomainExit(NumericalError):
    pass


class StiffnessFailure(NumericalError):
    pass


class InversionError(NumericalError):
    pass


class NoConnectionInRange(NumericalError):
    pass


class NotACanardSegment(PreconditionError):
    pass
