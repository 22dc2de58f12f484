"""Exception hierarchy shared by the core modules."""
from typing import Any, Optional, Sequence


class HeisenbergVQEError(Exception):
    """Base class for every error raised by heisenberg_vqe."""


class LatticeError(HeisenbergVQEError):
    """Invalid lattice size or a torus too small to be simple."""


class ColoringError(HeisenbergVQEError):
    """No edge coloring with at most max-degree + 1 classes was found."""


class DimerCoveringError(HeisenbergVQEError):
    """The graph has no perfect matching."""


class EmbeddingError(HeisenbergVQEError):
    """The graph cannot be placed on the qubit grid."""


class AnsatzError(HeisenbergVQEError):
    """Inconsistent ansatz inputs or an invalid parameter request."""


class SimulationError(HeisenbergVQEError):
    """Invalid qubit indices, register widths or parameter lengths."""


class FidelityError(SimulationError):
    """Reference vectors are not orthonormal."""


class SpectrumError(HeisenbergVQEError):
    """The requested diagonalization is refused."""


class ConvergenceError(SpectrumError):
    """Lanczos did not converge within its iteration cap."""

    def __init__(self, message: str,
                 eigenvalues: Optional[Sequence[float]] = None,
                 residuals: Optional[Sequence[float]] = None) -> None:
        super().__init__(message)
        self.eigenvalues = list(eigenvalues) if eigenvalues is not None else []
        self.residuals = list(residuals) if residuals is not None else []


class OptimizationError(HeisenbergVQEError):
    """The cost function returned a non-finite value or gradient."""

    def __init__(self, message: str, theta: Any = None, value: Optional[float] = None) -> None:
        super().__init__(message)
        self.theta = theta
        self.value = value


class CompilationError(HeisenbergVQEError):
    """Unknown native gate set or unbound circuit parameters."""


class RecordError(HeisenbergVQEError):
    """Unreadable or inconsistent experiment records."""

    def __init__(self, message: str, failures: Optional[Sequence[str]] = None) -> None:
        super().__init__(message)
        self.failures = list(failures) if failures is not None else []


class ConfigError(HeisenbergVQEError):
    """Invalid experiment configuration."""
