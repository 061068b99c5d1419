"""Exception hierarchy shared across the package."""


class SwarmError(Exception):
    """Base class for all library errors."""


class NonConvergence(SwarmError):
    """An iterative or direct solve did not reach the requested tolerance."""


class SingularSystem(SwarmError):
    pass


class DegenerateDimension(SwarmError):
    pass


class GainOutOfRange(SwarmError):
    """A diagonal gain or activity vector left the open interval (0, 1)."""


class SparsityViolation(SwarmError):
    pass


class TraceTooShort(SwarmError):
    pass


class ConfigError(SwarmError, ValueError):
    """Malformed scenario file. ``where`` names the field and, if known, the line."""

    def __init__(self, message, field=None, line=None):
        self.field = field
        self.line = line
        loc = []
        if line is not None:
            loc.append(f"line {line}")
        if field:
            loc.append(field)
        prefix = f"{', '.join(loc)}: " if loc else ""
        super().__init__(prefix + message)
