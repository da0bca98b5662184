"""Serialize gold contributions and parse model completions, both formats.

Text grammar: per contribution, "display name: value" pairs joined by "; "
in the fixed property order, contributions joined by " | ". The pipe between
contributions is the one separator fixed by the gold data; the within-
contribution syntax is this artifact's own and is documented in the README.
Reserved characters inside values are escaped ("\\|", "\\;", and "\\\\" for a
literal backslash) so any value round-trips.

Parsing is total and lenient: every failure mode is a ParseOutcome kind, and
unknown property names are dropped with a diagnostic instead of rejecting the
whole completion, so partially correct structures stay classifiable.
"""

from __future__ import annotations

import enum
import json
import re
from dataclasses import dataclass, field

from .model import PROPERTY_ORDER, AnswerFormat, Contribution, PropertyKey

CONTRIB_SEP = " | "
PAIR_SEP = "; "
NAME_SEP = ": "

_UNANSWERABLE_RE = re.compile(r"^(?:\"unanswerable\"|'unanswerable'|unanswerable)\.?$", re.IGNORECASE)


class ParseKind(enum.Enum):
    UNANSWERABLE = "unanswerable"
    PARSED = "parsed"
    INVALID_JSON = "invalid_json"
    MALFORMED_TEXT = "malformed_text"


@dataclass
class ParseOutcome:
    kind: ParseKind
    contributions: list[Contribution] = field(default_factory=list)
    raw: str = ""
    diagnostics: list[str] = field(default_factory=list)

    def to_json(self) -> dict:
        return {
            "kind": self.kind.value,
            "contributions": [c.to_display_dict() for c in self.contributions],
            "raw": self.raw,
            "diagnostics": list(self.diagnostics),
        }

    @classmethod
    def from_json(cls, data: dict) -> "ParseOutcome":
        return cls(
            kind=ParseKind(data["kind"]),
            contributions=[
                Contribution.from_display_dict(c) for c in data["contributions"]
            ],
            raw=data.get("raw", ""),
            diagnostics=list(data.get("diagnostics", [])),
        )


def _escape(value: str) -> str:
    return value.replace("\\", "\\\\").replace("|", "\\|").replace(";", "\\;")


def _unescape(value: str) -> str:
    out = []
    i = 0
    while i < len(value):
        ch = value[i]
        if ch == "\\" and i + 1 < len(value) and value[i + 1] in "\\|;":
            out.append(value[i + 1])
            i += 2
        else:
            out.append(ch)
            i += 1
    return "".join(out)


def _split_unescaped(text: str, sep: str) -> list[str]:
    """Split on sep wherever its first character is not backslash-escaped."""
    parts = []
    start = 0
    i = 0
    while i <= len(text) - len(sep):
        if text.startswith(sep, i):
            # count the backslashes immediately before the separator head
            k = i
            backslashes = 0
            while k > 0 and text[k - 1] == "\\":
                backslashes += 1
                k -= 1
            if backslashes % 2 == 0:
                parts.append(text[start:i])
                start = i + len(sep)
                i = start
                continue
        i += 1
    parts.append(text[start:])
    return parts


def serialize(contributions: list[Contribution], format: AnswerFormat) -> str:
    """Render a non-empty contribution list into the requested answer format."""
    if not contributions:
        raise ValueError("cannot serialize an empty contribution list")
    if format is AnswerFormat.JSON:
        payload = [c.to_display_dict() for c in contributions]
        return json.dumps(payload, separators=(",", ":"), ensure_ascii=False)
    chunks = []
    for contribution in contributions:
        pairs = [
            f"{key.display}{NAME_SEP}{_escape(contribution.values[key])}"
            for key in PROPERTY_ORDER
            if key in contribution.values
        ]
        chunks.append(PAIR_SEP.join(pairs))
    return CONTRIB_SEP.join(chunks)


def parse(completion: str, format: AnswerFormat) -> ParseOutcome:
    """Parse an arbitrary model completion; never raises."""
    raw = completion
    text = completion.strip()
    if _UNANSWERABLE_RE.match(text):
        return ParseOutcome(kind=ParseKind.UNANSWERABLE, raw=raw)
    if format is AnswerFormat.JSON:
        return _parse_json(text, raw)
    return _parse_text(text, raw)


def _parse_text(text: str, raw: str) -> ParseOutcome:
    diagnostics = []
    contributions = []
    for chunk in _split_unescaped(text, CONTRIB_SEP):
        values: dict[PropertyKey, str] = {}
        for pair in _split_unescaped(chunk, PAIR_SEP):
            if NAME_SEP not in pair:
                if pair.strip():
                    diagnostics.append(f"no name/value separator in {pair!r}")
                continue
            name, _, value = pair.partition(NAME_SEP)
            key = PropertyKey.match_display(name)
            if key is None:
                diagnostics.append(f"unknown property name {name.strip()!r}")
                continue
            value = _unescape(value)
            if not value.strip():
                diagnostics.append(f"empty value for {key.display!r}")
                continue
            if key in values:
                diagnostics.append(f"duplicate property {key.display!r}")
            values[key] = value
        if values:
            contributions.append(Contribution(values=values))
        elif chunk.strip():
            diagnostics.append("contribution chunk had no parsable pairs")
    if not contributions:
        return ParseOutcome(
            kind=ParseKind.MALFORMED_TEXT, raw=raw, diagnostics=diagnostics
        )
    return ParseOutcome(
        kind=ParseKind.PARSED,
        contributions=contributions,
        raw=raw,
        diagnostics=diagnostics,
    )


def _parse_json(text: str, raw: str) -> ParseOutcome:
    diagnostics = []
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        return ParseOutcome(
            kind=ParseKind.INVALID_JSON, raw=raw, diagnostics=[f"json decode: {exc}"]
        )
    if isinstance(data, dict):
        data = [data]
        diagnostics.append("bare object wrapped into a one-element array")
    if not isinstance(data, list):
        return ParseOutcome(
            kind=ParseKind.INVALID_JSON,
            raw=raw,
            diagnostics=diagnostics + [f"expected array of objects, got {type(data).__name__}"],
        )
    contributions = []
    for i, item in enumerate(data):
        if not isinstance(item, dict):
            diagnostics.append(f"item {i}: not an object, skipped")
            continue
        values: dict[PropertyKey, str] = {}
        for name, value in item.items():
            key = PropertyKey.match_display(str(name))
            if key is None:
                diagnostics.append(f"item {i}: unknown key {name!r}")
                continue
            if value is None:
                continue
            if not isinstance(value, str):
                value = json.dumps(value, separators=(",", ":"), ensure_ascii=False)
            if not value.strip():
                diagnostics.append(f"item {i}: empty value for {key.display!r}")
                continue
            values[key] = value
        if values:
            contributions.append(Contribution(values=values))
        else:
            diagnostics.append(f"item {i}: no recognized properties")
    if not contributions:
        return ParseOutcome(
            kind=ParseKind.INVALID_JSON, raw=raw, diagnostics=diagnostics
        )
    return ParseOutcome(
        kind=ParseKind.PARSED,
        contributions=contributions,
        raw=raw,
        diagnostics=diagnostics,
    )
