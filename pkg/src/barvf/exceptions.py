class InvalidInputError(ValueError):
    """Argument violates a documented precondition."""


class ShapeError(ValueError):
    """Array dimensions disagree."""


class NumericError(ValueError):
    """NaN or infinite values where finite ones are required."""


class ContractViolation(RuntimeError):
    """Operation called in a state it does not support (e.g. stepping a terminal state)."""


class ConfigError(ValueError):
    """Unknown environment/agent name or inconsistent experiment configuration."""
