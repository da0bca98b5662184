"""Shared fixtures: randomized contributions and synthetic corpora."""

from __future__ import annotations

import random

import pytest

from sciex.model import AnnotatedRecord, Contribution, PropertyKey, Record

# Value vocabulary for randomized contributions. Deliberately includes
# unicode, digits, and punctuation, but not the reserved separators (those
# get dedicated escaping tests).
SAFE_WORDS = [
    "covid-19",
    "SARS",
    "MERS-CoV",
    "Wuhan",
    "China",
    "Hubei province",
    "Italy",
    "2.5",
    "3.58",
    "(95% CI 2.0-3.1)",
    "maximum likelihood",
    "SEIR model",
    "exponential growth",
    "January 2020",
    "22 February 2020",
    "R0=2.68",
    "Diamond Princess",
    "São Paulo",
    "early outbreak",
    "stochastic simulation",
]


def random_value(rng: random.Random, max_words: int = 3) -> str:
    return " ".join(rng.choice(SAFE_WORDS) for _ in range(rng.randint(1, max_words)))


def random_contribution(rng: random.Random) -> Contribution:
    keys = rng.sample(list(PropertyKey), rng.randint(1, len(PropertyKey)))
    return Contribution({k: random_value(rng) for k in keys})


def random_contribution_list(rng: random.Random, max_len: int = 3) -> list[Contribution]:
    return [random_contribution(rng) for _ in range(rng.randint(1, max_len))]


def make_record(i: int, title: str | None = None, abstract: str | None = None) -> Record:
    return Record(
        id=f"cord-{i:05d}",
        title=title if title is not None else f"Paper {i} on outbreak dynamics",
        abstract=abstract
        if abstract is not None
        else f"Abstract {i}: the basic reproduction number was estimated.",
    )


def make_annotated(
    i: int, answerable: bool, rng: random.Random | None = None
) -> AnnotatedRecord:
    rng = rng or random.Random(i)
    contributions = tuple(random_contribution_list(rng)) if answerable else ()
    return AnnotatedRecord(
        record=make_record(i), answerable=answerable, contributions=contributions
    )


def synthetic_gold(n_answerable: int, n_unanswerable: int, seed: int = 7):
    rng = random.Random(seed)
    records = []
    for i in range(n_answerable):
        records.append(make_annotated(i, True, rng))
    for i in range(n_answerable, n_answerable + n_unanswerable):
        records.append(make_annotated(i, False, rng))
    rng.shuffle(records)
    return records


@pytest.fixture
def rng() -> random.Random:
    return random.Random(1234)
