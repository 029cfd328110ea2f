class ConfigError(ValueError):
    """Invalid configuration: unknown key, bad value, or violated invariant."""


class RolloutError(FloatingPointError):
    """A rollout produced a non-finite state or action."""

    def __init__(self, message: str, index: int | None = None, step: int | None = None):
        super().__init__(message)
        self.index = index
        self.step = step


class BudgetExhausted(RuntimeError):
    pass
