"""Domain model: records, the six-property contribution schema, and gold annotations.

Values are stored verbatim as extracted from the abstract. Normalization is
deliberately left to the evaluation layer so the error analysis can still see
typographical variants.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field
from typing import Iterable, Iterator, TextIO


class PropertyKey(enum.Enum):
    """The closed set of extraction targets, in canonical report order."""

    DISEASE_NAME = "disease name"
    LOCATION = "location"
    DATE = "date"
    R0_VALUE = "R0 value"
    CI_VALUES = "%CI values"
    METHOD = "method"

    @property
    def display(self) -> str:
        return self.value

    @classmethod
    def from_display(cls, name: str) -> "PropertyKey":
        return _DISPLAY_TO_KEY[name]

    @classmethod
    def match_display(cls, name: str) -> "PropertyKey | None":
        """Case-insensitive display-string lookup; None for unknown names."""
        return _FOLDED_TO_KEY.get(name.strip().casefold())


_DISPLAY_TO_KEY = {k.value: k for k in PropertyKey}
_FOLDED_TO_KEY = {k.value.casefold(): k for k in PropertyKey}

PROPERTY_ORDER: tuple[PropertyKey, ...] = tuple(PropertyKey)


class AnswerFormat(enum.Enum):
    TEXT = "text"
    JSON = "json"


@dataclass(frozen=True)
class Record:
    """One paper flowing through the pipeline, keyed by its cord_id."""

    id: str
    title: str
    abstract: str


@dataclass(frozen=True)
class Contribution:
    """One property->value map; absent properties are simply missing keys."""

    values: dict[PropertyKey, str]

    def get(self, key: PropertyKey) -> str | None:
        return self.values.get(key)

    def present_keys(self) -> list[PropertyKey]:
        return [k for k in PROPERTY_ORDER if k in self.values]

    def to_display_dict(self) -> dict[str, str]:
        return {k.display: self.values[k] for k in self.present_keys()}

    @classmethod
    def from_display_dict(cls, data: dict[str, str]) -> "Contribution":
        values = {}
        for name, value in data.items():
            key = PropertyKey.from_display(name)
            values[key] = value
        return cls(values=values)

    def __hash__(self) -> int:
        return hash(tuple(sorted((k.value, v) for k, v in self.values.items())))


@dataclass(frozen=True)
class AnnotatedRecord:
    """A record plus its answerability flag and gold contributions."""

    record: Record
    answerable: bool
    contributions: tuple[Contribution, ...] = field(default_factory=tuple)

    @property
    def id(self) -> str:
        return self.record.id


def validate(annotated: AnnotatedRecord) -> list[str]:
    """Check the model invariants; violations are data, not exceptions.

    Returns one human-readable message per violated rule, empty when the
    record is well-formed.
    """
    violations = []
    if not annotated.record.id:
        violations.append("record.id: must be non-empty")
    if annotated.answerable and not annotated.contributions:
        violations.append(
            "answerable: true requires at least one contribution"
        )
    if not annotated.answerable and annotated.contributions:
        violations.append(
            "answerable: false requires an empty contribution list"
        )
    for i, contribution in enumerate(annotated.contributions):
        if not contribution.values:
            violations.append(f"contributions[{i}]: all-empty contribution")
        for key, value in contribution.values.items():
            if not isinstance(key, PropertyKey):
                violations.append(
                    f"contributions[{i}]: unknown property key {key!r}"
                )
            elif not value:
                violations.append(
                    f"contributions[{i}].{key.display}: empty value"
                )
    return violations


# --- JSON-lines serialization -------------------------------------------------

def record_to_json(record: Record) -> dict:
    return {"cord_id": record.id, "title": record.title, "abstract": record.abstract}


def record_from_json(data: dict) -> Record:
    return Record(
        id=str(data["cord_id"]),
        title=data.get("title", "") or "",
        abstract=data.get("abstract", "") or "",
    )


def annotated_to_json(annotated: AnnotatedRecord) -> dict:
    out = record_to_json(annotated.record)
    out["answerable"] = annotated.answerable
    out["contributions"] = [c.to_display_dict() for c in annotated.contributions]
    return out


def annotated_from_json(data: dict) -> AnnotatedRecord:
    return AnnotatedRecord(
        record=record_from_json(data),
        answerable=bool(data["answerable"]),
        contributions=tuple(
            Contribution.from_display_dict(c) for c in data.get("contributions", [])
        ),
    )


def write_jsonl(rows: Iterable[dict], fh: TextIO) -> int:
    n = 0
    for row in rows:
        fh.write(json.dumps(row, ensure_ascii=False) + "\n")
        n += 1
    return n


def read_jsonl(fh: TextIO) -> Iterator[dict]:
    for line in fh:
        line = line.strip()
        if line:
            yield json.loads(line)
