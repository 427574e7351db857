"""Exception types shared across the package."""


class CpVaeError(Exception):
    """Base class for all package errors."""


class UsageError(CpVaeError):
    """A caller violated an API contract (bad shapes, bad arguments)."""


class ParseError(CpVaeError):
    """A config, embedding, or data file could not be parsed."""


class IngestionError(CpVaeError):
    """A corpus file was empty or otherwise unusable."""


class NumericDomainError(CpVaeError):
    """An operation received values outside its numeric domain."""


class DivergenceError(CpVaeError):
    """Training produced NaN or Inf and cannot continue."""


class CheckpointError(CpVaeError):
    """A checkpoint file is malformed or inconsistent with the model."""


class UnreliableCheckError(CpVaeError):
    """A verification routine cannot trust its own result."""
