"""Custom exceptions for cstarpert."""

from typing import List, Optional


class CStarPertError(Exception):
    """Base exception for all cstarpert errors."""

    pass


class NumericalBreakdown(CStarPertError):
    """Base class for failures caused by floating-point degeneracy."""

    pass


class DimensionMismatch(CStarPertError):
    """Raised when matrices or subalgebras live in different ambient sizes."""

    def __init__(self, expected, actual):
        self.expected = expected
        self.actual = actual
        super().__init__(f"Dimension mismatch: expected {expected}, got {actual}")


class NotInvertible(CStarPertError):
    """Raised when a polar decomposition is requested for a singular matrix."""

    def __init__(self, min_singular_value: float):
        self.min_singular_value = min_singular_value
        super().__init__(
            f"Matrix is not invertible (smallest singular value {min_singular_value:.3e})"
        )


class NotHermitian(CStarPertError):
    """Raised when a Hermitian argument is required."""

    def __init__(self, residual: float):
        self.residual = residual
        super().__init__(f"Matrix is not Hermitian (||m - m*|| = {residual:.3e})")


class TooFar(CStarPertError):
    """Raised when two objects are too far apart for a perturbation step."""

    def __init__(self, stage: str, value: float, limit: float):
        self.stage = stage
        self.value = value
        self.limit = limit
        super().__init__(
            f"Too far at stage '{stage}': value {value:.6g} is not below {limit:.6g}"
        )


class EpsOutOfRange(CStarPertError):
    """Raised when a near-identity unitary cannot reach the requested distance."""

    def __init__(self, eps: float):
        self.eps = eps
        super().__init__(f"eps={eps} is outside [0, 2)")


class NotNested(CStarPertError):
    """Raised when a subalgebra is not contained in the expected one."""

    def __init__(self, residual: float):
        self.residual = residual
        super().__init__(f"Subalgebras are not nested (residual {residual:.3e})")


class NotIntermediate(CStarPertError):
    """Raised when an algebra does not sit between target and source."""

    def __init__(self, residual: float):
        self.residual = residual
        super().__init__(
            f"Algebra is not intermediate for the inclusion (residual {residual:.3e})"
        )


class NotInAlgebra(CStarPertError):
    """Raised when an element is outside the algebra it must belong to."""

    def __init__(self, residual: float):
        self.residual = residual
        super().__init__(f"Element is not in the algebra (residual {residual:.3e})")


class CompatibilityResidualExceeded(CStarPertError):
    """Raised when a constructed expectation fails E_C^A o E_A^D = E_C^D."""

    def __init__(self, residual: float):
        self.residual = residual
        super().__init__(f"Compatibility residual {residual:.3e} exceeds tolerance")


class CompatibilityRequired(CStarPertError):
    """Raised when an operation needs a compatible expectation and gets another."""

    def __init__(self, residual: float):
        self.residual = residual
        super().__init__(
            f"A compatible conditional expectation is required (residual {residual:.3e})"
        )


class PreconditionFailed(CStarPertError):
    """Raised when a documented precondition does not hold."""

    def __init__(self, reason: str):
        self.reason = reason
        super().__init__(f"Precondition failed: {reason}")


class SingularFrame(NumericalBreakdown):
    """Raised when the frame operator of a quasi-basis is not invertible."""

    def __init__(self, min_eigenvalue: float):
        self.min_eigenvalue = min_eigenvalue
        super().__init__(
            f"Frame operator is singular (min eigenvalue {min_eigenvalue:.3e})"
        )


class DegenerateForm(NumericalBreakdown):
    """Raised when the localized inner product is not positive definite."""

    def __init__(self, min_eigenvalue: float):
        self.min_eigenvalue = min_eigenvalue
        super().__init__(
            f"Localized Gram form is degenerate (min eigenvalue {min_eigenvalue:.3e})"
        )


class IllDefined(NumericalBreakdown):
    """Raised when a map prescribed on a spanning set is not consistent."""

    def __init__(self, residual: float):
        self.residual = residual
        super().__init__(f"Map is not well defined (least-squares residual {residual:.3e})")


class ReadbackFailed(NumericalBreakdown):
    """Raised when a module vector cannot be read back as an algebra element."""

    def __init__(self, residual: float):
        self.residual = residual
        super().__init__(f"Readback left the target algebra (residual {residual:.3e})")


class NotHomomorphism(NumericalBreakdown):
    """Raised when a constructed map fails a *-homomorphism check."""

    def __init__(self, check: str, residual: float, limit: float):
        self.check = check
        self.residual = residual
        self.limit = limit
        super().__init__(
            f"Map is not a homomorphism: {check} residual {residual:.3e} exceeds {limit:.3e}"
        )


class ReconstructionFailed(NumericalBreakdown):
    """Raised when a quasi-basis does not reproduce its source algebra."""

    def __init__(self, residual: float):
        self.residual = residual
        super().__init__(f"Quasi-basis reconstruction failed (residual {residual:.3e})")


class ConjugationFailed(NumericalBreakdown):
    """Raised when the recovered unitary does not conjugate A onto B."""

    def __init__(self, residual: float, reason: Optional[str] = None):
        self.residual = residual
        message = f"Conjugation check failed (residual {residual:.3e})"
        if reason:
            message += f": {reason}"
        super().__init__(message)


class UnknownScenarioError(CStarPertError):
    """Raised when a scenario name is not in the catalog."""

    def __init__(self, name: str, available: List[str]):
        self.name = name
        self.available = available
        super().__init__(
            f"Unknown scenario '{name}'. "
            f"Available scenarios: {', '.join(available)}"
        )
