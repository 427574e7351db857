"""Sequence VAE with a simplex-constrained posterior mean, plus latent-space
diagnostics, controllable generation, and evaluation utilities."""

__version__ = "0.1.0"

from .errors import (
    CheckpointError,
    CpVaeError,
    DivergenceError,
    IngestionError,
    NumericDomainError,
    ParseError,
    UnreliableCheckError,
    UsageError,
)

__all__ = [
    "CheckpointError",
    "CpVaeError",
    "DivergenceError",
    "IngestionError",
    "NumericDomainError",
    "ParseError",
    "UnreliableCheckError",
    "UsageError",
]
