"""Exception types shared across the package."""


class ContractViolation(ValueError):
    """An operation was called with inputs outside its contract."""


class ConfigurationError(ValueError):
    """A scenario or codebook set is incomplete or inconsistent."""


class CapacityError(MemoryError):
    """A table would exceed the configured entry budget."""

    def __init__(self, what: str, required: int, limit: int):
        self.required = int(required)
        self.limit = int(limit)
        super().__init__(f"{what} needs {self.required:,} entries, limit is {self.limit:,}")


class DivergenceError(RuntimeError):
    """Value iteration failed to settle within its sweep cap."""
