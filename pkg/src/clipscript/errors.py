"""Exception taxonomy shared across the package.

Every error a caller is expected to branch on has its own class; everything
else surfaces as the nearest base class.
"""

from __future__ import annotations


class ClipscriptError(Exception):
    """Base class for all package errors."""


class ValidationError(ClipscriptError):
    """A value violated a documented invariant.

    ``field`` names the offending field so callers (and the HTTP layer) can
    produce a precise diagnostic.
    """

    def __init__(self, field: str, message: str) -> None:
        self.field = field
        super().__init__(f"{field}: {message}")


class MediaError(ClipscriptError):
    """Stored media could not be decoded; carries the extractor diagnostic."""


class UnsupportedMediaError(MediaError):
    """Uploaded bytes are not a media format this deployment can decode."""


class MediaTooLargeError(MediaError):
    """Upload exceeds the configured size limit."""


class NotFoundError(ClipscriptError):
    """A referenced object (clip, session, version, job) does not exist."""


class AdapterError(ClipscriptError):
    """Base class for model-backend failures."""


class AdapterUnavailableError(AdapterError):
    """Transport failure or timeout that persisted through all retries."""


class MalformedResponseError(AdapterError):
    """The backend answered, but not in the agreed wire shape (or empty)."""


class ContentPolicyError(AdapterError):
    """The remote backend refused the request on safety grounds."""


class DegenerateEmbeddingError(ClipscriptError):
    """An embedding vector was unusable (zero norm / non-finite)."""


class UnrecoverableSessionError(ClipscriptError):
    """A persisted session cannot be resumed (missing media, corrupt record)."""


class ReconstructionFailedError(ClipscriptError):
    """A workflow step needed a completed reconstruction and did not get one."""
