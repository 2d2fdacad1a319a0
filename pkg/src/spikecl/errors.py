"""Exception hierarchy shared across the package.

The CLI maps these onto distinct exit codes, so keep the split between
configuration problems (user-fixable input) and data problems (bad or
missing dataset files).
"""


class SpikeclError(Exception):
    """Base class for package errors."""


class ConfigError(SpikeclError):
    """Invalid or inconsistent configuration."""


class DataError(SpikeclError):
    """Dataset files are missing, malformed, or inconsistent."""
