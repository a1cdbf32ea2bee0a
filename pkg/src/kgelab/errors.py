"""Exception hierarchy shared across kgelab modules."""


class KgelabError(Exception):
    """Base class for all kgelab errors."""


class FieldError(KgelabError, ValueError):
    """A field is non-finite, mis-shaped, or lives on a different grid."""


class ParameterError(KgelabError, ValueError):
    """Model or integrator parameters violate their admissibility conditions."""


class NehariError(KgelabError, ValueError):
    """No Nehari projection exists (the coupling integral vanishes)."""


class InapplicableError(KgelabError):
    """A theorem's auxiliary construction cannot be satisfied for the given data."""


class ConfigError(KgelabError, ValueError):
    """Malformed scenario configuration."""

    def __init__(self, message: str, key: str | None = None):
        super().__init__(message)
        self.key = key
