"""Exception types shared across the package."""


class InputError(ValueError):
    """Malformed numerical input (shapes, signs, non-finite values)."""


class ConfigError(ValueError):
    """Invalid or inconsistent scenario configuration."""


class SolverError(RuntimeError):
    """A power-control solve did not reach an optimal point."""
