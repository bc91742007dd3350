"""Error types shared by every layer.

Every error carries a stable machine-readable ``code``. The HTTP layer maps
the exception class to a status: validation problems are 422, unknown targets
404, denied actions 403, missing/unrecognized credentials 401.
"""

from __future__ import annotations


class FieldbookError(Exception):
    """Base class; ``code`` is the wire-visible identifier."""

    status = 500

    def __init__(self, code: str, message: str, field: str | None = None):
        super().__init__(message)
        self.code = code
        self.message = message
        self.field = field

    def to_doc(self) -> dict:
        doc = {"code": self.code, "message": self.message}
        if self.field is not None:
            doc["field"] = self.field
        return doc


class ValidationError(FieldbookError):
    status = 422


class NotFoundError(FieldbookError):
    status = 404


class PermissionDenied(FieldbookError):
    status = 403

    def __init__(self, message: str = "not authorized for this action", code: str = "not-authorized"):
        super().__init__(code, message)


class AuthRequired(FieldbookError):
    status = 401

    def __init__(self, message: str = "missing or unrecognized credentials", code: str = "missing-auth"):
        super().__init__(code, message)


class StorageError(FieldbookError):
    status = 500
