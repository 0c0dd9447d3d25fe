"""Exception hierarchy shared across the package."""


class EmoganError(Exception):
    """Base class for all emogan errors."""


class ShapeError(EmoganError):
    """Matrix/vector dimensions do not chain or do not match."""


class ContractViolationError(EmoganError):
    """A caller broke an API precondition (stale cache, bad one-hot, ...)."""


class DivergenceError(EmoganError):
    """Training produced a non-finite or exploding quantity.

    Carries optional context so failures can be located.
    """

    def __init__(self, message, layer=None, epoch=None, step=None):
        super().__init__(message)
        self.layer = layer
        self.epoch = epoch
        self.step = step


class DegenerateDataError(EmoganError):
    """Data unusable for the requested operation (single class, too few rows)."""


class NumericalDomainError(EmoganError):
    """Input left the numerical domain an operation supports (e.g. non-PSD)."""


class UnsupportedOperationError(EmoganError):
    """Operation not available for this model variant."""


class ParseError(EmoganError):
    """Malformed input file; carries the offending row when known."""

    def __init__(self, message, row=None):
        super().__init__(message)
        self.row = row


class ConfigError(EmoganError):
    """Invalid experiment configuration or CLI arguments."""
