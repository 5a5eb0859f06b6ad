"""Exception types raised by the simulation library."""


class FtdError(Exception):
    """Base class for all library errors."""


class DistanceBelowCutoff(FtdError, ValueError):
    """Dipole-dipole term requested inside the ``x < x_min`` divergence region."""


class QuadratureNotConverged(FtdError, ArithmeticError):
    """Adaptive quadrature hit its order cap before reaching the tolerance."""


class ExcessiveCutoffMass(FtdError, ArithmeticError):
    """Too much wave-packet probability sits inside the dipole-dipole cutoff."""


class PositivityViolation(FtdError, ArithmeticError):
    """Reduced density matrix left the positive cone (numerical breakdown)."""


class InvalidState(FtdError, ValueError):
    """Input matrix is not a physical two-qubit density matrix."""


class InvalidPreparation(FtdError, ValueError):
    """Electronic amplitudes are not a normalized single excitation."""


class DegenerateMuBar(FtdError, ValueError):
    """Mean collective decay coupling is zero; single-time formula does not apply."""


class PreconditionError(FtdError, ValueError):
    """Inputs do not satisfy the preconditions of a closed-form condition."""


class ConfigError(FtdError, ValueError):
    """Run configuration failed schema or semantic validation."""
