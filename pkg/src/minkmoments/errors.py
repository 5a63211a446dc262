"""Exception types shared across the package."""


class ResourceLimitError(RuntimeError):
    """A requested enumeration or refinement exceeds the configured limit."""


class PrecisionError(ArithmeticError):
    """The requested enclosure width is unattainable in double precision."""
