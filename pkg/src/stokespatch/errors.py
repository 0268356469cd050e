"""Exception hierarchy shared by the solver, diagnostics and CLI."""


class StokesPatchError(Exception):
    """Base class for all package errors."""


class ConfigError(StokesPatchError, ValueError):
    """Invalid grid or run configuration."""

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class SymmetryError(StokesPatchError, ValueError):
    """Spectral data whose inverse transform is not real."""


class GridMismatchError(StokesPatchError, ValueError):
    """Fields defined on different grids were combined."""


class SingularPointError(StokesPatchError, ValueError):
    """A kernel was evaluated at (or too close to) its singularity."""


class BlowUpError(StokesPatchError, RuntimeError):
    """Non-finite values appeared during time stepping."""

    def __init__(self, t, step_count):
        self.t = t
        self.step_count = step_count
        super().__init__(f"non-finite level set at t={t:.17g} (step {step_count})")


class AreaAbortError(StokesPatchError, RuntimeError):
    """Patch area drifted beyond the configured tolerance."""

    def __init__(self, t, drift, threshold):
        self.t = t
        self.drift = drift
        self.threshold = threshold
        super().__init__(
            f"relative area drift {drift:.3e} exceeds {threshold:.3e} at t={t:.17g}"
        )


class EmptyContourError(StokesPatchError, ValueError):
    """The level set has no zero crossing (or the patch is empty)."""


class DegenerateContourError(StokesPatchError, ValueError):
    """A contour has repeated or colliding nodes."""
