"""Exception types shared across the package."""
from __future__ import annotations


class PorousError(Exception):
    """Base class for package-specific failures."""


class PreconditionError(PorousError):
    """An audited precondition of an operation failed; carries diagnostics."""

    def __init__(self, message: str, **details):
        super().__init__(message)
        self.details = details


class BlendPreconditionError(PreconditionError):
    """Fields passed to blend differ too much on the matching annulus."""


class ConstructionFailure(PorousError):
    """A build stage could not certify its guarantees.

    ``partial`` carries whatever family material was completed before the
    failure so callers can inspect or persist it.
    """

    def __init__(self, message: str, partial=None, **details):
        super().__init__(message)
        self.partial = partial
        self.details = details


class ExtractionError(PorousError):
    """Graph extraction failed to converge at some probe point."""


class AuditFailure(PorousError):
    """A verification audit found a concrete violation; carries diagnostics."""

    def __init__(self, message: str, **details):
        super().__init__(message)
        self.details = details


class ParseError(PorousError):
    """A serialized artifact is malformed; message names the record."""


class ConfigError(PorousError):
    """A run configuration failed validation; message lists every problem."""


class NeedsMoreSamples(PorousError):
    """A sampled certification stayed indeterminate within budget."""
