"""Exception types raised across the package."""


class RichardsSDREError(Exception):
    """Base class for all package errors."""


class InvalidInputError(RichardsSDREError, ValueError):
    """An argument is non-finite, mis-shaped or out of its admissible range."""


class SingularCapacityError(RichardsSDREError, ZeroDivisionError):
    """The soil water capacity vanished at an interior node."""


class NumericalBlowupError(RichardsSDREError, FloatingPointError):
    """A right-hand side evaluation produced a non-finite value."""


class FactorizationError(RichardsSDREError, ValueError):
    """The semilinear factorization is undefined (a state component is zero)."""


class UndefinedWeightError(RichardsSDREError, ValueError):
    """The state-dependent cost weight is undefined (a state component is zero)."""


class StabilizabilityError(RichardsSDREError):
    """No stabilizing Riccati solution was found.

    Attributes
    ----------
    spectrum : ndarray or None
        Eigenvalues of the closed loop (or of the Hamiltonian when the
        stable subspace could not be separated).
    """

    def __init__(self, message, spectrum=None):
        super().__init__(message)
        self.spectrum = spectrum


class ConvergenceError(RichardsSDREError):
    """An iterative solver failed to converge."""


class IntegrationError(RichardsSDREError):
    """Time integration failed (step size underflow, Newton failure)."""


class AdmissibilityError(IntegrationError):
    """The state left the strictly unsaturated region h < 0."""


class ConfigError(RichardsSDREError, ValueError):
    """An experiment configuration failed to parse or validate.

    Attributes
    ----------
    line : int or None
        1-based line number in the source file, when known.
    """

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line
