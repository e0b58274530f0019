"""Error types shared across the package.

Exit-code mapping used by the CLI: ConfigError -> 2, NumericError -> 3.
"""


class ConfigError(ValueError):
    """Invalid configuration: unknown key, bad range, inconsistent knobs."""


class NumericError(RuntimeError):
    """A numeric routine failed to converge or produced a non-finite value."""
