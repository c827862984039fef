"""Exception hierarchy shared by all modules."""


class ThzScatterError(Exception):
    """Base class for every error raised by this package."""


class ConvergenceError(ThzScatterError):
    """A numerical routine (quadrature, optimizer, root finder) did not converge."""

    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = list(trace) if trace is not None else []


class FitError(ConvergenceError):
    """A parameter fit failed or the data are degenerate for the model."""


class GridMismatchError(ThzScatterError, ValueError):
    """Two fields do not share the same grid and specular frame."""


class PlacementError(ThzScatterError):
    """Roughness components could not be assigned to main-lobe cells."""


class ScenarioError(ThzScatterError, ValueError):
    """A scenario file is malformed or violates an invariant."""

    def __init__(self, message, line=None, key=None):
        where = []
        if line is not None:
            where.append(f"line {line}")
        if key is not None:
            where.append(f"key '{key}'")
        if where:
            message = f"{', '.join(where)}: {message}"
        super().__init__(message)
        self.line = line
        self.key = key


class FieldFormatError(ThzScatterError, ValueError):
    """A serialized field file is malformed or incomplete."""
