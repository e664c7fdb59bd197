"""Exception types shared across the engines."""


class DomainError(ValueError):
    """An input lies outside the mathematical domain of an operation."""


class FreeComponentError(DomainError):
    """A zero static force was given where an oscillating component is required."""


class StepSizeError(ValueError):
    """A time step or grid spacing violates the stability/accuracy budget."""

    def __init__(self, message, suggested=None):
        super().__init__(message)
        self.suggested = suggested


class LatticeTruncationError(RuntimeError):
    """The finite lattice or grid is too small for the requested evolution."""

    def __init__(self, message, required_sites=None):
        super().__init__(message)
        self.required_sites = required_sites


class BandSearchError(RuntimeError):
    """Band-edge search ran out of energy mesh before finding enough bands."""


class ConfigError(ValueError):
    """Invalid scenario configuration, anchored to a key and line when known."""

    def __init__(self, message, key=None, line=None):
        where = ""
        if key is not None:
            where += f"{key}: "
        if line is not None:
            where = f"line {line}: " + where
        super().__init__(where + message)
        self.key = key
        self.line = line
