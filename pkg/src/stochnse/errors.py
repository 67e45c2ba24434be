"""Exception types mapped to CLI exit codes."""


class ConfigError(ValueError):
    """A parameter violates a constraint (exit code 2)."""


class NonFiniteError(ArithmeticError):
    """A non-finite value appeared in a state or result (exit code 3)."""


class VerificationError(AssertionError):
    """A verification suite failed (exit code 4)."""
