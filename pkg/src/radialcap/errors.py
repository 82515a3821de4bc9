"""Exception hierarchy shared by all radialcap modules."""


class RadialCapError(Exception):
    """Base class for all errors raised by this package."""


class ParseError(RadialCapError):
    """Malformed expression text.

    Attributes:
        position: 0-based character offset where parsing failed.
        expected: tuple of token descriptions that would have been valid.
    """

    def __init__(self, message, position, expected=()):
        super().__init__(f"{message} at position {position}"
                         + (f" (expected {', '.join(expected)})" if expected else ""))
        self.position = position
        self.expected = tuple(expected)


class UnknownIdentifierError(ParseError):
    """Identifier outside the fixed function set (and not the variable r)."""

    def __init__(self, name, position):
        self.name = name
        super().__init__(f"unknown identifier {name!r}", position)


class DomainError(RadialCapError):
    """Evaluation left the mathematical domain (log of non-positive,
    division by zero, pole of coth, ...).

    Attributes:
        r: the offending evaluation point, when known.
        detail: description of the failing subexpression or condition.
    """

    def __init__(self, detail, r=None):
        self.r = r
        self.detail = detail
        super().__init__(detail if r is None else f"{detail} at r={r!r}")


class QuadratureError(RadialCapError):
    """Adaptive integration could not reach the requested tolerance.

    Attributes:
        worst_interval: (a, b, error_estimate) of the worst subinterval.
        value: best value obtained before giving up.
    """

    def __init__(self, message, worst_interval=None, value=None):
        self.worst_interval = worst_interval
        self.value = value
        if worst_interval is not None:
            a, b, err = worst_interval
            message = f"{message}; worst subinterval [{a:.6g}, {b:.6g}] err={err:.3g}"
        super().__init__(message)


class ConfigError(RadialCapError):
    """Invalid run configuration (bad field values, unknown keys, ...)."""
