"""Exception types shared across the package."""


class ValenError(Exception):
    """Base class for package errors."""


class ConfigError(ValenError):
    """Invalid or incompatible run configuration (CLI exit code 2)."""


class DataError(ValenError):
    """Corrupt, missing, or shape-mismatched dataset artifacts (CLI exit code 3)."""


class GenerationError(ValenError):
    """Infeasible generation request (bad rule/attribute combination, thin concept)."""
