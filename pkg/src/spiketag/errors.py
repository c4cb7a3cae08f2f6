"""Exception types shared across the package.

The CLI maps these onto exit codes: configuration/usage problems exit 1,
data problems exit 2, numeric failures exit 3.
"""


class SpiketagError(Exception):
    """Base class for all package errors."""


class DimensionError(SpiketagError):
    """Array shapes or extents do not line up."""


class ConfigError(SpiketagError):
    """Invalid configuration value or file."""


class ParseError(SpiketagError):
    """Malformed corpus or embedding file; carries the line number."""

    def __init__(self, message, path=None, line=None):
        loc = ""
        if path is not None:
            loc += f"{path}:"
        if line is not None:
            loc += f"{line}:"
        super().__init__(f"{loc} {message}" if loc else message)
        self.path = path
        self.line = line


class ValidationError(SpiketagError):
    """Runtime value check failed (checked mode), e.g. spike alphabet violation."""


class NumericError(SpiketagError):
    """Non-finite values or other numeric breakdown."""


class CheckpointError(SpiketagError):
    """Checkpoint file is malformed, truncated, or has the wrong version."""
