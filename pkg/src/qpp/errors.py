"""Exception types shared across the package."""


class QppError(Exception):
    """Base class for all package errors."""


class SchemaError(QppError):
    """A document violates the serialization schema."""

    def __init__(self, message, path=None):
        super().__init__(message if path is None else f"{path}: {message}")
        self.path = path


class InvalidModel(QppError):
    """An operation required a valid solid but validation failed."""

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


class NonRigidTransform(QppError):
    """A transform expected to be rigid is not."""


class NoConvergence(QppError):
    """The driven-face constraint system could not be solved."""

    def __init__(self, message, t=None):
        super().__init__(message)
        self.t = t


class IllPosed(QppError):
    """A constraint system is under- or over-constrained."""

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


class UnsupportedPair(QppError):
    """A smooth connection involves a surface pair outside the catalog."""


class UncoveredChange(QppError):
    """A regenerated topology change is not explained by any event."""

    def __init__(self, message, faces=None):
        super().__init__(message)
        self.faces = faces or []


class ResolutionFailed(QppError):
    """Topology repair at a critical point produced an invalid solid."""

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


class DegenerateGradient(QppError):
    """A tangency residual is undefined because a gradient vanishes."""
