import random

import pytest

import oracles
from sciex._kernels import _pure

try:
    from sciex._kernels import _speedups
except ImportError:
    _speedups = None

BACKENDS = [("pure", _pure)] + ([("compiled", _speedups)] if _speedups else [])
IDS = [name for name, _ in BACKENDS]


@pytest.fixture(params=[impl for _, impl in BACKENDS], ids=IDS)
def impl(request):
    return request.param


class TestLcs:
    def test_known_values(self, impl):
        assert impl.lcs_length([1, 2, 3], [1, 2, 3]) == 3
        assert impl.lcs_length([1, 2, 3], [4, 5, 6]) == 0
        assert impl.lcs_length([], [1]) == 0
        assert impl.lcs_length([1, 3, 5, 7], [3, 7, 9]) == 2

    def test_matches_brute_force(self, impl):
        rng = random.Random(7)
        for _ in range(200):
            a = [rng.randint(0, 6) for _ in range(rng.randint(0, 12))]
            b = [rng.randint(0, 6) for _ in range(rng.randint(0, 12))]
            assert impl.lcs_length(a, b) == oracles.lcs_brute(tuple(a), tuple(b))

    def test_hit_indices_form_common_subsequence(self, impl):
        rng = random.Random(8)
        for _ in range(200):
            a = [rng.randint(0, 5) for _ in range(rng.randint(0, 10))]
            b = [rng.randint(0, 5) for _ in range(rng.randint(0, 10))]
            hits = list(impl.lcs_hit_indices(a, b))
            assert hits == sorted(set(hits))
            assert len(hits) == oracles.lcs_brute(tuple(a), tuple(b))
            # the hit subsequence must be a subsequence of b as well
            sub = [a[i] for i in hits]
            it = iter(b)
            assert all(x in it for x in sub)


class TestLevenshtein:
    def test_known_values(self, impl):
        assert impl.levenshtein("kitten", "sitting") == 3
        assert impl.levenshtein("", "abc") == 3
        assert impl.levenshtein("same", "same") == 0
        assert impl.levenshtein("2.0–3.1", "2.0-3.1") == 1

    def test_metric_properties(self, impl):
        rng = random.Random(9)
        alphabet = "ab-c "
        for _ in range(100):
            a = "".join(rng.choice(alphabet) for _ in range(rng.randint(0, 8)))
            b = "".join(rng.choice(alphabet) for _ in range(rng.randint(0, 8)))
            d = impl.levenshtein(a, b)
            assert d == impl.levenshtein(b, a)
            assert d <= max(len(a), len(b))
            assert (d == 0) == (a == b)


class TestJaccardPairs:
    def test_known_values(self, impl):
        docs = [[1, 2, 3], [2, 3, 4], [9]]
        assert impl.jaccard_pairs(docs, 0.4) == [(0, 1, 0.5)]
        assert impl.jaccard_pairs(docs, 0.6) == []

    def test_empty_docs_similarity_one(self, impl):
        assert impl.jaccard_pairs([[], []], 0.99) == [(0, 1, 1.0)]

    def test_threshold_inclusive(self, impl):
        docs = [[1, 2], [1, 2, 3, 4]]  # similarity exactly 0.5
        assert impl.jaccard_pairs(docs, 0.5) == [(0, 1, 0.5)]


@pytest.mark.skipif(_speedups is None, reason="compiled extension not built")
class TestBackendParity:
    def test_lcs_parity(self):
        rng = random.Random(11)
        for _ in range(300):
            a = [rng.randint(0, 8) for _ in range(rng.randint(0, 20))]
            b = [rng.randint(0, 8) for _ in range(rng.randint(0, 20))]
            assert _pure.lcs_length(a, b) == _speedups.lcs_length(a, b)
            assert list(_pure.lcs_hit_indices(a, b)) == list(
                _speedups.lcs_hit_indices(a, b)
            )

    def test_levenshtein_parity(self):
        rng = random.Random(12)
        alphabet = "abcd รง–"
        for _ in range(300):
            a = "".join(rng.choice(alphabet) for _ in range(rng.randint(0, 12)))
            b = "".join(rng.choice(alphabet) for _ in range(rng.randint(0, 12)))
            assert _pure.levenshtein(a, b) == _speedups.levenshtein(a, b)

    def test_jaccard_parity(self):
        rng = random.Random(13)
        for _ in range(50):
            docs = [
                sorted(rng.sample(range(40), rng.randint(0, 15)))
                for _ in range(rng.randint(0, 12))
            ]
            threshold = rng.choice([0.3, 0.5, 0.8, 0.95])
            assert _pure.jaccard_pairs(docs, threshold) == list(
                _speedups.jaccard_pairs(docs, threshold)
            )
