"""Exception hierarchy shared across the pipeline.

Every error the CLI maps to exit code 1 derives from SciexError; anything
else is a usage error (exit 2) or a genuine bug.
"""


class SciexError(Exception):
    """Base class for data-level pipeline errors."""

    def to_json(self) -> dict:
        return {"error": type(self).__name__, "message": str(self)}


class IngestionError(SciexError):
    """Raised when an input stream cannot be read; carries the record index."""

    def __init__(self, message: str, index: int | None = None):
        super().__init__(message)
        self.index = index

    def to_json(self) -> dict:
        out = super().to_json()
        if self.index is not None:
            out["index"] = self.index
        return out


class SplitError(SciexError):
    """Raised when a dataset cannot be split (too few records, bad spec)."""


class InstantiationError(SciexError):
    """Raised when a template placeholder cannot be filled."""


class BackendError(SciexError):
    """Raised when a generation backend is unreachable or misbehaves."""


class EvaluationError(SciexError):
    """Raised on prediction/gold misalignment; names the offending id."""
