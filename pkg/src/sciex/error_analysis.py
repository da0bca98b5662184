"""Error taxonomy over (prediction, gold) mismatches.

Record-level codes: answering the unanswerable (T1_1), refusing the
answerable (T1_2), too many / too few contributions (T3_1 / T3_2), invalid
JSON (T5_1). Property-level codes, judged per aligned contribution pair:
spurious value (T2_1), missing value (T2_2), and the four value-mismatch
flavours: near-typographical (T4_1), under-informative strict-subset (T4_2),
over-informative strict-superset (T4_3), and everything else (T4_4).
Exactly one T4 subcode fires per mismatching pair.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from . import _kernels
from .codec import ParseKind, ParseOutcome
from .evaluation import MatchMode, align_contributions, normalize_value, tokens
from .model import PROPERTY_ORDER, AnnotatedRecord, PropertyKey

# Levenshtein budget separating a typo from a genuinely different value.
TYPO_DISTANCE = 2


class ErrorType(enum.Enum):
    T1_1 = "T1_1"  # answered an unanswerable record
    T1_2 = "T1_2"  # said unanswerable on an answerable record
    T2_1 = "T2_1"  # predicted a value where gold has none
    T2_2 = "T2_2"  # no value where gold has one
    T3_1 = "T3_1"  # more contributions than gold
    T3_2 = "T3_2"  # fewer contributions than gold
    T4_1 = "T4_1"  # typographical mismatch
    T4_2 = "T4_2"  # related but incomplete (subset)
    T4_3 = "T4_3"  # related with extra content (superset)
    T4_4 = "T4_4"  # unrelated or incomparable
    T5_1 = "T5_1"  # invalid predicted JSON


RECORD_LEVEL = {
    ErrorType.T1_1,
    ErrorType.T1_2,
    ErrorType.T3_1,
    ErrorType.T3_2,
    ErrorType.T5_1,
}


@dataclass
class ErrorRecord:
    record_id: str
    errors: dict[ErrorType, frozenset[PropertyKey]] = field(default_factory=dict)

    def add(self, code: ErrorType, key: PropertyKey | None = None) -> None:
        current = set(self.errors.get(code, frozenset()))
        if key is not None:
            current.add(key)
        self.errors[code] = frozenset(current)

    def codes(self) -> set[ErrorType]:
        return set(self.errors)

    def to_json(self) -> dict:
        return {
            "record_id": self.record_id,
            "errors": {
                code.value: sorted(k.display for k in keys)
                for code, keys in sorted(self.errors.items(), key=lambda e: e[0].value)
            },
        }


def _alnum_only(s: str) -> str:
    return "".join(ch for ch in s.casefold() if ch.isalnum())


def classify_value_mismatch(
    pred: str, gold: str, typo_distance: int = TYPO_DISTANCE
) -> ErrorType:
    """The single T4 subcode for a present-but-not-exactly-matching pair."""
    np_, ng = normalize_value(pred), normalize_value(gold)
    if _alnum_only(pred) == _alnum_only(gold):
        return ErrorType.T4_1
    if _kernels.levenshtein(np_, ng) <= typo_distance:
        return ErrorType.T4_1
    tp, tg = tokens(pred), tokens(gold)
    if tp < tg:
        return ErrorType.T4_2
    if tp > tg:
        return ErrorType.T4_3
    return ErrorType.T4_4


def classify(
    outcome: ParseOutcome,
    gold: AnnotatedRecord,
    alignment: list[tuple[int, int]] | None = None,
) -> ErrorRecord:
    """Deterministic error codes for one (prediction, gold) record pair.

    The alignment, when given, must come from align_contributions in partial
    mode; it is recomputed otherwise.
    """
    record = ErrorRecord(record_id=gold.id)

    if outcome.kind is ParseKind.INVALID_JSON:
        record.add(ErrorType.T5_1)
        return record
    if not gold.answerable:
        if outcome.kind is ParseKind.PARSED:
            record.add(ErrorType.T1_1)
        return record
    if outcome.kind is ParseKind.UNANSWERABLE:
        record.add(ErrorType.T1_2)
        return record
    if outcome.kind is ParseKind.MALFORMED_TEXT:
        # The taxonomy has no text analogue of T5_1; nothing fires.
        return record

    pred_contribs = outcome.contributions
    gold_contribs = list(gold.contributions)
    if len(pred_contribs) > len(gold_contribs):
        record.add(ErrorType.T3_1)
    elif len(pred_contribs) < len(gold_contribs):
        record.add(ErrorType.T3_2)

    if alignment is None:
        alignment = align_contributions(pred_contribs, gold_contribs, MatchMode.PARTIAL)
    for i, j in alignment:
        pred_c, gold_c = pred_contribs[i], gold_contribs[j]
        for key in PROPERTY_ORDER:
            p, g = pred_c.get(key), gold_c.get(key)
            if p is None and g is None:
                continue
            if p is not None and g is None:
                record.add(ErrorType.T2_1, key)
            elif p is None and g is not None:
                record.add(ErrorType.T2_2, key)
            elif normalize_value(p) != normalize_value(g):
                record.add(classify_value_mismatch(p, g), key)
    return record


@dataclass
class ErrorTable:
    n_records: int
    record_level: dict[ErrorType, int]
    by_property: dict[ErrorType, dict[PropertyKey, int]]

    def to_json(self) -> dict:
        return {
            "n_records": self.n_records,
            "record_level": {
                code.value: self.record_level[code] for code in ErrorType
            },
            "by_property": {
                code.value: {
                    key.display: self.by_property[code][key] for key in PROPERTY_ORDER
                }
                for code in ErrorType
                if code not in RECORD_LEVEL
            },
        }


def aggregate(records: Iterable[ErrorRecord]) -> ErrorTable:
    """Tally codes across records: record totals plus the property matrix."""
    record_level = {code: 0 for code in ErrorType}
    by_property = {
        code: {key: 0 for key in PROPERTY_ORDER}
        for code in ErrorType
        if code not in RECORD_LEVEL
    }
    n = 0
    for record in records:
        n += 1
        for code, keys in record.errors.items():
            record_level[code] += 1
            if code not in RECORD_LEVEL:
                for key in keys:
                    by_property[code][key] += 1
    return ErrorTable(n_records=n, record_level=record_level, by_property=by_property)


def analyze(
    joined: Sequence[tuple[ParseOutcome, AnnotatedRecord]]
) -> tuple[list[ErrorRecord], ErrorTable]:
    records = [classify(outcome, gold) for outcome, gold in joined]
    return records, aggregate(records)
