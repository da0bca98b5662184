"""Scoring: exact/partial P/R/F1 per property and overall, general accuracy, ROUGE.

Match semantics, stated once because the absolute numbers depend on them:
exact match is equality after normalization (NFC, casefold, whitespace
collapse, edge punctuation strip); partial match is a non-empty overlap of
normalized token sets, and an exact match always counts as partial.

Contribution alignment is a maximum-total-score one-to-one matching (pair
score = number of properties whose values match under the active mode),
solved exactly; ties resolve to the lexicographically smallest pair list.
"Overall" pools true/false positive/negative counts across the six
properties (micro average); the macro average is reported alongside for
comparison.
"""

from __future__ import annotations

import re
import string
import unicodedata
from collections import Counter
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linear_sum_assignment

from . import _kernels
from .codec import ParseKind, ParseOutcome
from .exceptions import EvaluationError
from .model import PROPERTY_ORDER, AnnotatedRecord, Contribution, PropertyKey

_EDGE_CHARS = string.punctuation + string.whitespace
_WS_RE = re.compile(r"\s+")
_ROUGE_TOKEN_RE = re.compile(r"[a-z0-9]+")


class MatchMode:
    EXACT = "exact"
    PARTIAL = "partial"


def normalize_value(s: str) -> str:
    """NFC, casefold, collapse whitespace, strip edge punctuation."""
    s = unicodedata.normalize("NFC", s).casefold()
    s = _WS_RE.sub(" ", s).strip()
    return s.strip(_EDGE_CHARS)


def tokens(s: str) -> frozenset[str]:
    """Normalized token set; per-token edge punctuation is stripped too."""
    out = []
    for token in normalize_value(s).split():
        token = token.strip(string.punctuation)
        if token:
            out.append(token)
    return frozenset(out)


def value_match(pred: str, gold: str, mode: str) -> bool:
    exact = normalize_value(pred) == normalize_value(gold)
    if mode == MatchMode.EXACT:
        return exact
    if mode == MatchMode.PARTIAL:
        return exact or bool(tokens(pred) & tokens(gold))
    raise EvaluationError(f"unknown match mode: {mode!r}")


# --- alignment ------------------------------------------------------------------

def pair_score(pred: Contribution, gold: Contribution, mode: str) -> int:
    score = 0
    for key in PROPERTY_ORDER:
        p, g = pred.get(key), gold.get(key)
        if p is not None and g is not None and value_match(p, g, mode):
            score += 1
    return score


def _max_assignment_score(matrix: np.ndarray) -> int:
    if matrix.size == 0:
        return 0
    rows, cols = linear_sum_assignment(matrix, maximize=True)
    return int(matrix[rows, cols].sum())


def align_contributions(
    pred: list[Contribution], gold: list[Contribution], mode: str
) -> list[tuple[int, int]]:
    """Optimal one-to-one alignment of predicted to gold contributions.

    min(len(pred), len(gold)) pairs are formed; the excess side stays
    unpaired. Among maximum-score assignments the lexicographically smallest
    (pred_idx, gold_idx) pair list is returned, which keeps downstream error
    attribution deterministic.
    """
    n, m = len(pred), len(gold)
    if n == 0 or m == 0:
        return []
    scores = np.array(
        [[pair_score(p, g, mode) for g in gold] for p in pred], dtype=np.int64
    )
    target = _max_assignment_score(scores)

    pairs: list[tuple[int, int]] = []
    rows = list(range(n))
    cols = list(range(m))
    remaining = target
    while rows and cols:
        r = rows[0]
        chosen = None
        for c in cols:
            rest = scores[np.ix_([x for x in rows if x != r], [y for y in cols if y != c])]
            if int(scores[r, c]) + _max_assignment_score(rest) == remaining:
                chosen = c
                break
        if chosen is None:
            # r stays unpaired (only possible when preds outnumber golds)
            rows.remove(r)
            continue
        pairs.append((r, chosen))
        remaining -= int(scores[r, chosen])
        rows.remove(r)
        cols.remove(chosen)
    return pairs


# --- counting -------------------------------------------------------------------

@dataclass
class Counts:
    tp: int = 0
    fp: int = 0
    fn: int = 0

    @property
    def precision(self) -> float:
        return self.tp / (self.tp + self.fp) if self.tp + self.fp else 0.0

    @property
    def recall(self) -> float:
        return self.tp / (self.tp + self.fn) if self.tp + self.fn else 0.0

    @property
    def f1(self) -> float:
        p, r = self.precision, self.recall
        return 2 * p * r / (p + r) if p + r else 0.0

    def add(self, other: "Counts") -> None:
        self.tp += other.tp
        self.fp += other.fp
        self.fn += other.fn

    def to_json(self) -> dict:
        return {
            "tp": self.tp,
            "fp": self.fp,
            "fn": self.fn,
            "precision": self.precision,
            "recall": self.recall,
            "f1": self.f1,
        }


@dataclass
class PropertyScores:
    per_property: dict[PropertyKey, Counts] = field(
        default_factory=lambda: {k: Counts() for k in PROPERTY_ORDER}
    )

    @property
    def overall(self) -> Counts:
        pooled = Counts()
        for counts in self.per_property.values():
            pooled.add(counts)
        return pooled

    def macro(self) -> dict[str, float]:
        """Unweighted mean over properties, reported next to the micro overall."""
        n = len(PROPERTY_ORDER)
        return {
            "precision": sum(c.precision for c in self.per_property.values()) / n,
            "recall": sum(c.recall for c in self.per_property.values()) / n,
            "f1": sum(c.f1 for c in self.per_property.values()) / n,
        }

    def to_json(self) -> dict:
        return {
            "per_property": {
                k.display: c.to_json() for k, c in self.per_property.items()
            },
            "overall": self.overall.to_json(),
            "macro": self.macro(),
        }


def _count_contribution(counts: PropertyScores, contribution: Contribution, slot: str):
    for key in contribution.present_keys():
        setattr(
            counts.per_property[key],
            slot,
            getattr(counts.per_property[key], slot) + 1,
        )


def score_record(
    outcome: ParseOutcome, gold: AnnotatedRecord, mode: str
) -> PropertyScores:
    """Property-level counts for one record.

    The alignment is always computed in partial mode and shared by both
    scoring modes; pairing leniently and then grading each pair under the
    requested mode is what guarantees exact counts never exceed partial
    counts for any property.
    """
    counts = PropertyScores()
    pred_contribs = outcome.contributions if outcome.kind is ParseKind.PARSED else []
    gold_contribs = list(gold.contributions)

    alignment = align_contributions(pred_contribs, gold_contribs, MatchMode.PARTIAL)
    paired_pred = {i for i, _ in alignment}
    paired_gold = {j for _, j in alignment}

    for i, j in alignment:
        pred_c, gold_c = pred_contribs[i], gold_contribs[j]
        for key in PROPERTY_ORDER:
            p, g = pred_c.get(key), gold_c.get(key)
            if p is not None and g is not None:
                if value_match(p, g, mode):
                    counts.per_property[key].tp += 1
                else:
                    counts.per_property[key].fp += 1
                    counts.per_property[key].fn += 1
            elif p is not None:
                counts.per_property[key].fp += 1
            elif g is not None:
                counts.per_property[key].fn += 1

    for i, contribution in enumerate(pred_contribs):
        if i not in paired_pred:
            _count_contribution(counts, contribution, "fp")
    for j, contribution in enumerate(gold_contribs):
        if j not in paired_gold:
            _count_contribution(counts, contribution, "fn")
    return counts


def join_by_id(
    parsed: list[tuple[str, ParseOutcome]], gold: list[AnnotatedRecord]
) -> list[tuple[ParseOutcome, AnnotatedRecord]]:
    by_id = {}
    for record_id, outcome in parsed:
        if record_id in by_id:
            raise EvaluationError(f"duplicate prediction for record id {record_id!r}")
        by_id[record_id] = outcome
    joined = []
    for record in gold:
        if record.id not in by_id:
            raise EvaluationError(f"no prediction for record id {record.id!r}")
        joined.append((by_id.pop(record.id), record))
    if by_id:
        extra = next(iter(by_id))
        raise EvaluationError(f"prediction for unknown record id {extra!r}")
    return joined


def score(
    parsed: list[tuple[str, ParseOutcome]],
    gold: list[AnnotatedRecord],
    mode: str,
) -> PropertyScores:
    """Pooled property counts over a prediction/gold set joined by record id."""
    total = PropertyScores()
    for outcome, record in join_by_id(parsed, gold):
        record_counts = score_record(outcome, record, mode)
        for key in PROPERTY_ORDER:
            total.per_property[key].add(record_counts.per_property[key])
    return total


def general_accuracy(
    parsed: list[tuple[str, ParseOutcome]], gold: list[AnnotatedRecord]
) -> float:
    """Percentage of records whose answerability the output shape gets right.

    Broken outputs (invalid JSON / malformed text) are answers, just
    unusable ones, so they are wrong on both answerable and unanswerable
    gold.
    """
    joined = join_by_id(parsed, gold)
    if not joined:
        return 0.0
    correct = 0
    for outcome, record in joined:
        if record.answerable:
            correct += outcome.kind is ParseKind.PARSED
        else:
            correct += outcome.kind is ParseKind.UNANSWERABLE
    return 100 * correct / len(joined)


# --- ROUGE ----------------------------------------------------------------------

def _rouge_tokens(text: str) -> list[str]:
    return _ROUGE_TOKEN_RE.findall(text.lower())


def _ngrams(toks: list[str], n: int) -> Counter:
    return Counter(tuple(toks[i : i + n]) for i in range(len(toks) - n + 1))


def _fmeasure(match: int, pred_total: int, ref_total: int) -> float:
    if pred_total == 0 or ref_total == 0:
        return 0.0
    precision = match / pred_total
    recall = match / ref_total
    if precision + recall == 0:
        return 0.0
    return 100 * 2 * precision * recall / (precision + recall)


def _rouge_n(pred: list[str], ref: list[str], n: int) -> float:
    pred_ngrams, ref_ngrams = _ngrams(pred, n), _ngrams(ref, n)
    match = sum((pred_ngrams & ref_ngrams).values())
    return _fmeasure(match, sum(pred_ngrams.values()), sum(ref_ngrams.values()))


def _ids(pred: list[str], ref: list[str]) -> tuple[list[int], list[int]]:
    vocab: dict[str, int] = {}
    for tok in pred + ref:
        vocab.setdefault(tok, len(vocab))
    return [vocab[t] for t in pred], [vocab[t] for t in ref]


def _rouge_l(pred: list[str], ref: list[str]) -> float:
    pred_ids, ref_ids = _ids(pred, ref)
    match = _kernels.lcs_length(pred_ids, ref_ids)
    return _fmeasure(match, len(pred), len(ref))


def _rouge_lsum(pred_text: str, ref_text: str) -> float:
    """Summary-level LCS: per reference segment, the union of LCS hits
    against every candidate segment, clipped by token counts on both sides."""
    pred_segs = [_rouge_tokens(s) for s in pred_text.splitlines() if s.strip()]
    ref_segs = [_rouge_tokens(s) for s in ref_text.splitlines() if s.strip()]
    pred_segs = [s for s in pred_segs if s]
    ref_segs = [s for s in ref_segs if s]
    m = sum(len(s) for s in ref_segs)
    n = sum(len(s) for s in pred_segs)
    if n == 0 or m == 0:
        return 0.0
    pred_budget = Counter(t for s in pred_segs for t in s)
    ref_budget = Counter(t for s in ref_segs for t in s)
    hits = 0
    for ref_seg in ref_segs:
        hit_indices: set[int] = set()
        for pred_seg in pred_segs:
            ref_ids, pred_ids = _ids(ref_seg, pred_seg)
            hit_indices.update(_kernels.lcs_hit_indices(ref_ids, pred_ids))
        for idx in sorted(hit_indices):
            token = ref_seg[idx]
            if pred_budget[token] > 0 and ref_budget[token] > 0:
                hits += 1
                pred_budget[token] -= 1
                ref_budget[token] -= 1
    return _fmeasure(hits, n, m)


def rouge(pred: str, ref: str) -> dict[str, float]:
    """ROUGE-1/2/L/Lsum F-measures scaled to [0,100]."""
    pred_tokens, ref_tokens = _rouge_tokens(pred), _rouge_tokens(ref)
    return {
        "rouge1": _rouge_n(pred_tokens, ref_tokens, 1),
        "rouge2": _rouge_n(pred_tokens, ref_tokens, 2),
        "rougeL": _rouge_l(pred_tokens, ref_tokens),
        "rougeLsum": _rouge_lsum(pred, ref),
    }


# --- full report ------------------------------------------------------------------

@dataclass
class EvalReport:
    n_records: int
    exact: PropertyScores
    partial: PropertyScores
    general_accuracy: float
    rouge: dict[str, float]

    def to_json(self) -> dict:
        return {
            "n_records": self.n_records,
            "exact": self.exact.to_json(),
            "partial": self.partial.to_json(),
            "general_accuracy": self.general_accuracy,
            "rouge": self.rouge,
        }


def rouge_reference(record: AnnotatedRecord, serialized_gold: str) -> str:
    """ROUGE reference string: gold serialization, or the unanswerable token."""
    return serialized_gold if record.answerable else "unanswerable"


def evaluate(
    parsed: list[tuple[str, ParseOutcome]],
    gold: list[AnnotatedRecord],
    references: dict[str, str],
) -> EvalReport:
    """Full report over a joined prediction/gold set.

    `references` maps record id to the ROUGE reference string (the gold
    serialization in the evaluated format, or "unanswerable").
    """
    joined = join_by_id(parsed, gold)
    rouge_totals = {"rouge1": 0.0, "rouge2": 0.0, "rougeL": 0.0, "rougeLsum": 0.0}
    for outcome, record in joined:
        scores = rouge(outcome.raw, references[record.id])
        for key in rouge_totals:
            rouge_totals[key] += scores[key]
    n = len(joined)
    return EvalReport(
        n_records=n,
        exact=score(parsed, gold, MatchMode.EXACT),
        partial=score(parsed, gold, MatchMode.PARTIAL),
        general_accuracy=general_accuracy(parsed, gold),
        rouge={k: (v / n if n else 0.0) for k, v in rouge_totals.items()},
    )
