"""Shared exception base classes."""


class SimbusError(Exception):
    """Base class for all errors raised by this package."""


class ConfigError(SimbusError):
    """Invalid or incomplete configuration (fatal, maps to exit code 2)."""
