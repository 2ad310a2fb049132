class DomainError(ValueError):
    """Argument outside the domain where an operation is defined."""


class ContractViolation(RuntimeError):
    """A controller tried to read information its feedback regime hides."""


class ConfigError(ValueError):
    """Invalid experiment configuration; ``field`` names the offending key."""

    def __init__(self, field, message):
        super().__init__(f"{field}: {message}")
        self.field = field
