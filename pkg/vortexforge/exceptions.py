"""
Exceptions raised by vortexforge.

Every class also derives from the closest builtin exception, so callers that only
know about ``ValueError`` or ``RuntimeError`` keep working.
"""


class VortexForgeError(Exception):
    """Base class of all the library errors"""


class InputError(VortexForgeError, ValueError):
    """Malformed configuration files, unknown coordinate names or invalid run settings"""


class DomainError(VortexForgeError, ValueError):
    """The state or configuration is outside the admissible set (𝒰, 𝒪_δ, distinct centers...)"""


class NearSingularityError(DomainError):
    """Evaluation too close to a singular set, or an ill conditioned Jacobian"""


class CollisionError(DomainError):
    """Two point vortices came closer than the allowed separation while integrating

    :param message: Description of the event.

    :param trajectory: Centers computed before the abort, shape ``(steps, M)``.
    """

    def __init__(self, message: str, trajectory=None):
        super().__init__(message)
        self.trajectory = trajectory


class UnphysicalStateError(DomainError):
    """A derived physical quantity has no real value (e.g. negative q_k²)"""


class PreconditionError(VortexForgeError, ValueError):
    """An operation was called on an input that does not fulfil its precondition"""


class ConvergenceError(VortexForgeError, RuntimeError):
    """An iterative solver stopped without reaching its tolerance

    :param message: Description of the failure.

    :param last_residual: Residual norm at the last iterate.

    :param trace: Residual norms of every iteration.
    """

    def __init__(self, message: str, last_residual: float = float("nan"), trace=None):
        super().__init__(message)
        self.last_residual = last_residual
        self.trace = list(trace) if trace is not None else []


class DegeneracyError(ConvergenceError):
    """The (augmented) Jacobian is singular at the current iterate"""


class InvariantViolation(VortexForgeError, AssertionError):
    """A quantity that holds by construction was found violated"""
