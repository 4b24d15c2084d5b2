"""Shared exception types for the model-space laboratory."""


class InvalidCurveError(ValueError):
    """A curve or foliation argument is degenerate."""


class InvalidMappingClassError(ValueError):
    """A matrix is not an orientation-preserving integer mapping class."""


class InvalidPointError(ValueError):
    """A model point lies outside its parameter domain."""


class InvalidSpecError(ValueError):
    """Run parameters are inconsistent (weights, transitions, cells,
    map coefficients)."""


class ExpansiveMapError(ValueError):
    """A constructed self-map failed the empirical nonexpansiveness check."""


class ConvergenceError(RuntimeError):
    """An iterative limit did not settle within its budget."""

    def __init__(self, message, partial=None):
        super().__init__(message)
        self.partial = partial


class InsufficientGapError(RuntimeError):
    """Singular gap too small to read off a stable direction."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = dict(diagnostics or {})


class BoundedOrbitError(RuntimeError):
    """A boundary limit was requested for an orbit that does not escape."""


class MapGrammarError(ValueError):
    """A self-map description string failed to parse."""

    def __init__(self, message, offset):
        super().__init__(f"{message} (offset {offset})")
        self.offset = offset
