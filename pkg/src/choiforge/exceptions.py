"""
Exception hierarchy for choiforge.
Every error carries the process exit code the CLI reports for it.
"""

from typing import List, Optional, Tuple


class ChoiForgeError(Exception):
    """Base exception for choiforge errors."""

    def __init__(self, message: str, exit_code: int = 1):
        super().__init__(message)
        self.exit_code = exit_code


class InputError(ChoiForgeError):
    """Raised when user-supplied parameters or files are malformed."""

    def __init__(self, message: str = "Invalid input"):
        super().__init__(message, exit_code=1)


class DimensionError(InputError):
    """Raised when operator shapes and subsystem dimensions disagree."""

    def __init__(self, message: str = "Inconsistent dimensions"):
        super().__init__(message)


class MaskValidationError(InputError):
    """Raised when a mask is not symmetric under Hermitian index exchange."""

    def __init__(
        self,
        pairs: List[Tuple[Tuple[int, ...], Tuple[int, ...]]],
        message: Optional[str] = None,
    ):
        self.pairs = pairs
        shown = ", ".join(f"{a}<->{b}" for a, b in pairs[:10])
        more = f" (+{len(pairs) - 10} more)" if len(pairs) > 10 else ""
        super().__init__(message or f"Asymmetric mask entries: {shown}{more}")


class CapacityError(ChoiForgeError):
    """Raised when an extension space exceeds the configured size limit."""

    def __init__(self, message: str = "Extension dimension above limit"):
        super().__init__(message, exit_code=1)


class SolverFailure(ChoiForgeError):
    """Raised when a conic solve does not return a usable solution."""

    def __init__(self, message: str = "Solver failed"):
        super().__init__(message, exit_code=3)


class EigenSolverError(ChoiForgeError):
    """Raised when a dense eigensolver does not converge."""

    def __init__(self, message: str = "Eigensolver did not converge"):
        super().__init__(message, exit_code=3)
