"""sciex: corpus curation, instruction prompting, and scoring for structured
R0-estimate extraction from scholarly abstracts."""

__version__ = "0.1.0"

from .model import (  # noqa: F401
    AnnotatedRecord,
    AnswerFormat,
    Contribution,
    PropertyKey,
    Record,
)
