"""Exception hierarchy shared across the package."""


class GranvarError(Exception):
    """Base class for model-level errors."""


class EmptySampleError(GranvarError):
    """A sample (or expectation) contains no particles at all."""


class FeasibilityError(GranvarError):
    """An inclusion probability left [0, min(q_i, q_j)]."""


class DegenerateDependenceError(GranvarError):
    """A dependence value >= 1 makes a 1 - C denominator vanish or flip."""


class NonIdentifiableError(GranvarError):
    """The single-class dependence solver has a zero denominator."""


class SaturationError(GranvarError):
    """Hard-core dart throwing exhausted its attempt budget."""

    def __init__(self, placed: int, target: int, attempts: int):
        self.placed = placed
        self.target = target
        self.attempts = attempts
        super().__init__(
            f"hard-core generation saturated: placed {placed} of {target} "
            f"particles after {attempts} attempts"
        )


class ConfigError(GranvarError):
    """A scenario configuration is malformed; carries a location."""

    def __init__(self, location: str, message: str):
        self.location = location
        super().__init__(f"{location}: {message}")
