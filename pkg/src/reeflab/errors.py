"""Exception hierarchy shared by the whole package.

Every error carries a machine-readable ``code`` from a closed set
(``validation``, ``not_found``, ``conflict``, ``version``,
``backend_unavailable``) so the HTTP layer and the CLI can map failures
without matching on message text.
"""

from __future__ import annotations


class ReefLabError(Exception):
    """Base class for all domain errors."""

    code = "validation"

    def __init__(self, message: str, *, details: dict | None = None):
        super().__init__(message)
        self.details = details or {}


class ValidationError(ReefLabError):
    """Input violates a documented precondition or invariant."""


class DimensionMismatchError(ValidationError):
    """Rasters or masks with incompatible or non-positive dimensions."""


class CorruptMaskError(ValidationError):
    """RLE counts that cannot describe a mask of the stated size."""


class CorruptProjectError(ValidationError):
    """Persisted project fails referential-integrity checks."""


class NotFoundError(ReefLabError):
    """Referenced image, instance, or label does not exist."""

    code = "not_found"


class ConflictError(ReefLabError):
    """Optimistic-concurrency token is stale."""

    code = "conflict"


class UnsupportedVersionError(ReefLabError):
    """Project file written by an unsupported schema version."""

    code = "version"


class BackendUnavailableError(ReefLabError):
    """Segmentation backend cannot be reached or died mid-conversation."""

    code = "backend_unavailable"
