"""Exception types shared by the numerical modules.

Each class carries a short module-qualified ``code`` that the command-line
front end reports verbatim.
"""


class SingpotError(Exception):
    code = "singpot.error"


class PoleError(SingpotError, ValueError):
    """Argument sits on a pole of a Gamma factor or of a series denominator."""

    code = "specialfun.pole"


class DomainError(SingpotError, ValueError):
    """Input violates a documented precondition."""

    code = "singpot.domain"


class ConvergenceError(SingpotError, ArithmeticError):
    """A truncated series or quadrature did not meet its stopping rule."""

    code = "singpot.convergence"


class DiagonalError(SingpotError, ValueError):
    """Kernel requested at coincident points (r = 0)."""

    code = "kernels.diagonal"


class DegenerateError(SingpotError, ValueError):
    """A reflected distance r_k vanished."""

    code = "kernels.degenerate"


class EdgeProximityError(SingpotError, ValueError):
    code = "potentials.edge"


class SingularSystemError(SingpotError, ArithmeticError):
    code = "potentials.singular_system"
