"""Corpus curation: theme filtering, exact dedup, near-duplicate clustering, splits.

The near-duplicate similarity is Jaccard over lowercase word tokens of the
abstract, clustered single-linkage (connected components of the >=threshold
pair graph). Exact-duplicate keys normalize per token so that punctuation
stripped-or-retained variants collapse while genuinely different digits
("2.5" vs "25") do not.
"""

from __future__ import annotations

import csv
import logging
import random
import re
import string
import unicodedata
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Sequence

from . import _kernels
from .exceptions import IngestionError, SciexError, SplitError
from .model import AnnotatedRecord, Record

log = logging.getLogger(__name__)

# Stand-in for the R0-estimate phrase heuristics; ship as editable config.
DEFAULT_PATTERNS = [
    "r0 estimate",
    "r0",
    "r(0)",
    "r 0",
    "basic reproduction number",
]

_WORD_RE = re.compile(r"\w+")
_EDGE_PUNCT = string.punctuation


@dataclass(frozen=True)
class FilterConfig:
    """Case-insensitive literal patterns matched against the chosen field(s)."""

    patterns: tuple[str, ...]
    match_field: str = "abstract"  # title | abstract | both

    def __post_init__(self):
        if not self.patterns:
            raise SciexError("FilterConfig.patterns must be non-empty")
        if self.match_field not in ("title", "abstract", "both"):
            raise SciexError(f"unknown match_field: {self.match_field!r}")


@dataclass
class Cluster:
    """A near-duplicate group; pairwise_similarity is the worst pair inside it.

    Single-linkage chaining means that minimum can drop below the threshold;
    every cluster still has at least one qualifying pair per link.
    """

    members: list[str]
    representative: str
    pairwise_similarity: float


@dataclass(frozen=True)
class SplitSpec:
    """Stratified split plan.

    `fractions` applies to every answerability stratum; `stratum_fractions`
    optionally overrides the triple per stratum (keyed by the answerable
    flag), which is how a published non-proportional split is reproduced.
    """

    fractions: tuple[float, float, float]
    seed: int
    stratify_by: str = "answerable"
    stratum_fractions: dict[bool, tuple[float, float, float]] = field(
        default_factory=dict
    )

    def __post_init__(self):
        for name, triple in [("fractions", self.fractions)] + [
            (f"stratum_fractions[{k}]", v) for k, v in self.stratum_fractions.items()
        ]:
            if len(triple) != 3 or any(not (0 < f < 1) for f in triple):
                raise SplitError(f"{name}: each fraction must lie in (0,1)")
            if abs(sum(triple) - 1.0) > 1e-9:
                raise SplitError(f"{name}: fractions must sum to 1")

    def fractions_for(self, answerable: bool) -> tuple[float, float, float]:
        return self.stratum_fractions.get(answerable, self.fractions)


# --- ingestion ----------------------------------------------------------------

def read_metadata_csv(
    fh, delimiter: str = ",", required: Sequence[str] = ("cord_id", "title", "abstract")
) -> Iterator[Record]:
    """Stream records out of a delimiter-separated metadata file.

    The header row is mandatory; rows that cannot be decoded or lack the id
    column raise IngestionError carrying the 0-based data-row index.
    """
    reader = csv.DictReader(fh, delimiter=delimiter)
    if reader.fieldnames is None:
        raise IngestionError("empty input: missing header row")
    missing = [c for c in required if c not in reader.fieldnames]
    if missing:
        raise IngestionError(f"missing required columns: {', '.join(missing)}")
    seen_ids: set[str] = set()
    index = 0
    while True:
        try:
            row = next(reader)
        except StopIteration:
            return
        except (csv.Error, UnicodeDecodeError) as exc:
            raise IngestionError(f"unreadable row: {exc}", index=index) from exc
        record_id = (row.get("cord_id") or "").strip()
        if not record_id:
            raise IngestionError("row has empty cord_id", index=index)
        if record_id in seen_ids:
            raise IngestionError(f"duplicate cord_id {record_id!r}", index=index)
        seen_ids.add(record_id)
        yield Record(
            id=record_id,
            title=row.get("title") or "",
            abstract=row.get("abstract") or "",
        )
        index += 1


# --- filtering ----------------------------------------------------------------

def filter_corpus(records: Iterable[Record], cfg: FilterConfig) -> list[Record]:
    """Keep records whose selected field(s) contain at least one pattern.

    Matching is case-insensitive substring containment; order is preserved.
    """
    needles = [p.casefold() for p in cfg.patterns]
    kept = []
    dropped = 0
    for record in records:
        if cfg.match_field == "title":
            haystacks = [record.title]
        elif cfg.match_field == "abstract":
            haystacks = [record.abstract]
        else:
            haystacks = [record.title, record.abstract]
        folded = [h.casefold() for h in haystacks]
        if any(n in h for n in needles for h in folded):
            kept.append(record)
        else:
            dropped += 1
    log.info("filter_corpus: kept %d, dropped %d", len(kept), dropped)
    return kept


# --- exact dedup ----------------------------------------------------------------

def dedup_key(title: str, abstract: str) -> str:
    """Normalized identity key: NFC, casefold, token-edge punctuation stripped."""
    text = unicodedata.normalize("NFC", f"{title} {abstract}").casefold()
    tokens = []
    for token in text.split():
        token = token.strip(_EDGE_PUNCT)
        if token:
            tokens.append(token)
    return " ".join(tokens)


def dedup_exact(records: Sequence[Record]) -> list[Record]:
    """Drop later records whose normalized (title+abstract) key was seen before."""
    seen: set[str] = set()
    kept = []
    for record in records:
        key = dedup_key(record.title, record.abstract)
        if key in seen:
            continue
        seen.add(key)
        kept.append(record)
    if len(kept) != len(records):
        log.info("dedup_exact: %d -> %d records", len(records), len(kept))
    return kept


# --- near-duplicate clustering --------------------------------------------------

def abstract_tokens(text: str) -> set[str]:
    return set(_WORD_RE.findall(text.casefold()))


def jaccard(a: set[str], b: set[str]) -> float:
    if not a and not b:
        return 1.0
    if not a or not b:
        return 0.0
    inter = len(a & b)
    return inter / (len(a) + len(b) - inter)


def cluster_near_duplicates(
    records: Sequence[Record], threshold: float = 0.95
) -> list[Cluster]:
    """Single-linkage clusters over abstract Jaccard similarity >= threshold.

    Singletons are not emitted. Membership is invariant under input order;
    member lists are sorted by id for stable output.
    """
    if not (0 < threshold <= 1):
        raise SciexError(f"threshold must lie in (0,1], got {threshold}")
    # Token ids are assigned over the sorted vocabulary so permuting the
    # input cannot change any similarity value.
    token_sets = [sorted(abstract_tokens(r.abstract)) for r in records]
    vocab = {t: i for i, t in enumerate(sorted(set().union(*token_sets or [set()])))}
    docs = [sorted(vocab[t] for t in toks) for toks in token_sets]
    pairs = _kernels.jaccard_pairs(docs, threshold)

    parent = list(range(len(records)))

    def find(x: int) -> int:
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    sims: dict[tuple[int, int], float] = {}
    for i, j, sim in pairs:
        sims[(i, j)] = sim
        ri, rj = find(i), find(j)
        if ri != rj:
            parent[max(ri, rj)] = min(ri, rj)

    groups: dict[int, list[int]] = {}
    for i in range(len(records)):
        groups.setdefault(find(i), []).append(i)

    clusters = []
    for members in groups.values():
        if len(members) < 2:
            continue
        min_sim = min(
            sims.get((a, b), jaccard(set(docs[a]), set(docs[b])))
            for ai, a in enumerate(members)
            for b in members[ai + 1 :]
        )
        ids = sorted(records[i].id for i in members)
        clusters.append(
            Cluster(members=ids, representative=ids[0], pairwise_similarity=min_sim)
        )
    clusters.sort(key=lambda c: c.members[0])
    return clusters


def select_representatives(
    clusters: Sequence[Cluster],
    records: Sequence[Record],
    policy: str = "longest",
) -> list[str]:
    """Record ids to drop so each cluster keeps exactly one member.

    longest: keep the longest abstract, ties to the lexicographically
    smaller id. first_id: keep the smallest id.
    """
    if policy not in ("longest", "first_id"):
        raise SciexError(f"unknown representative policy: {policy!r}")
    by_id = {r.id: r for r in records}
    drops = []
    for cluster in clusters:
        if policy == "first_id":
            keep = min(cluster.members)
        else:
            keep = min(
                cluster.members,
                key=lambda rid: (-len(by_id[rid].abstract), rid),
            )
        cluster.representative = keep
        drops.extend(rid for rid in cluster.members if rid != keep)
    return drops


# --- splitting ----------------------------------------------------------------

def _largest_remainder(total: int, fractions: Sequence[float]) -> list[int]:
    raw = [total * f for f in fractions]
    counts = [int(x) for x in raw]
    leftover = total - sum(counts)
    order = sorted(range(len(raw)), key=lambda i: (-(raw[i] - counts[i]), i))
    for i in order[:leftover]:
        counts[i] += 1
    return counts


def split_dataset(
    annotated: Sequence[AnnotatedRecord], spec: SplitSpec
) -> tuple[list[AnnotatedRecord], list[AnnotatedRecord], list[AnnotatedRecord]]:
    """Deterministic stratified train/dev/test partition.

    Within each answerability stratum the records are shuffled by the seed
    and cut at largest-remainder counts, so per-stratum sizes are within
    one record of fraction * stratum size.
    """
    if len(annotated) < 3:
        raise SplitError(f"need at least 3 records to split, got {len(annotated)}")
    strata: dict[bool, list[AnnotatedRecord]] = {True: [], False: []}
    for rec in annotated:
        strata[rec.answerable].append(rec)

    splits: tuple[list, list, list] = ([], [], [])
    for flag in (True, False):
        members = list(strata[flag])
        if not members:
            continue
        rng = random.Random(f"{spec.seed}|answerable={flag}")
        rng.shuffle(members)
        counts = _largest_remainder(len(members), spec.fractions_for(flag))
        start = 0
        for part, count in zip(splits, counts):
            part.extend(members[start : start + count])
            start += count
    return splits
