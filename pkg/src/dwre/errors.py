"""Exception hierarchy shared by all modules.

Exit-code mapping used by the CLI: validation errors exit 2, genericity
rejections exit 3, resource-cap hits exit 4.
"""


class DwreError(Exception):
    """Base class for package errors."""

    exit_code = 1


class ValidationError(DwreError):
    """Bad input: violated precondition, malformed config, broken file."""

    exit_code = 2


class GenericityError(DwreError):
    """Configuration rejected as non-generic (distance/direction ties)."""

    exit_code = 3


class ResourceCapError(DwreError):
    """A configured resource cap (cell count, enumeration size) was hit."""

    exit_code = 4
