import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from conftest import make_annotated, random_contribution_list
from sciex import evaluation as ev
from sciex.codec import ParseKind, ParseOutcome, serialize
from sciex.exceptions import EvaluationError
from sciex.model import (
    PROPERTY_ORDER,
    AnnotatedRecord,
    AnswerFormat,
    Contribution,
    PropertyKey,
    Record,
)


class TestNormalize:
    def test_case_and_trim(self):
        assert ev.normalize_value("COVID-19 ") == "covid-19"

    def test_whitespace_collapse_and_edge_punctuation(self):
        assert ev.normalize_value("Wuhan,  China.") == "wuhan, china"

    @given(st.text(max_size=40))
    @settings(max_examples=200, deadline=None)
    def test_idempotent(self, s):
        once = ev.normalize_value(s)
        assert ev.normalize_value(once) == once


class TestValueMatch:
    def test_exact_after_normalization(self):
        assert ev.value_match("COVID-19", "covid-19", "exact")

    def test_partial_token_overlap(self):
        assert ev.value_match("Wuhan, China", "China", "partial")
        assert not ev.value_match("Wuhan, China", "China", "exact")

    def test_disjoint_tokens_no_partial(self):
        assert not ev.value_match("SEIR model", "maximum likelihood", "partial")

    @given(st.text(max_size=30), st.text(max_size=30))
    @settings(max_examples=200, deadline=None)
    def test_exact_implies_partial(self, a, b):
        if ev.value_match(a, b, "exact"):
            assert ev.value_match(a, b, "partial")


def contribution(**kwargs):
    mapping = {
        "disease": PropertyKey.DISEASE_NAME,
        "location": PropertyKey.LOCATION,
        "date": PropertyKey.DATE,
        "r0": PropertyKey.R0_VALUE,
        "ci": PropertyKey.CI_VALUES,
        "method": PropertyKey.METHOD,
    }
    return Contribution({mapping[k]: v for k, v in kwargs.items()})


class TestAlignment:
    def test_single_pair_forced(self):
        pred = [contribution(disease="x")]
        gold = [contribution(date="y")]
        assert ev.align_contributions(pred, gold, "partial") == [(0, 0)]

    def test_crossed_fixture_prefers_swap(self):
        # swap scores (3,3); identity scores (1,1): brute force agrees
        a = contribution(disease="flu", location="here", date="jan")
        b = contribution(disease="measles", location="there", date="feb")
        a_ish = contribution(disease="flu", location="here", date="jan", r0="9")
        pred = [b, a_ish]
        gold = [a, contribution(disease="measles", location="there", date="feb", ci="1-2")]
        got = ev.align_contributions(pred, gold, "exact")
        assert got == [(0, 1), (1, 0)]
        assert got == oracles.best_alignment_brute(pred, gold, "exact")

    def test_empty_side_empty_alignment(self):
        assert ev.align_contributions([], [contribution(date="x")] * 2, "exact") == []

    @settings(max_examples=200, deadline=None)
    @given(data=st.data())
    def test_matches_brute_force_small(self, data):
        rng = random.Random(data.draw(st.integers(0, 10**9)))
        pred = random_contribution_list(rng, max_len=3)
        gold = random_contribution_list(rng, max_len=3)
        mode = data.draw(st.sampled_from(["exact", "partial"]))
        assert ev.align_contributions(pred, gold, mode) == oracles.best_alignment_brute(
            pred, gold, mode
        )


def outcome_for(contributions):
    if contributions is None:
        return ParseOutcome(kind=ParseKind.UNANSWERABLE)
    return ParseOutcome(kind=ParseKind.PARSED, contributions=list(contributions))


def annotated(id, contributions):
    return AnnotatedRecord(
        record=Record(id, "T", "A"),
        answerable=bool(contributions),
        contributions=tuple(contributions or ()),
    )


class TestScore:
    def test_oracle_predictions_are_perfect(self, rng):
        gold = [make_annotated(i, True, rng) for i in range(5)]
        parsed = [(g.id, outcome_for(g.contributions)) for g in gold]
        for mode in ("exact", "partial"):
            scores = ev.score(parsed, gold, mode)
            assert scores.overall.fp == scores.overall.fn == 0
            assert scores.overall.f1 == 1.0

    def test_empty_predictions_zero_scores(self, rng):
        gold = [make_annotated(i, True, rng) for i in range(4)]
        parsed = [(g.id, ParseOutcome(kind=ParseKind.MALFORMED_TEXT)) for g in gold]
        scores = ev.score(parsed, gold, "partial")
        assert scores.overall.tp == 0 and scores.overall.fp == 0
        assert scores.overall.fn > 0
        assert scores.overall.precision == 0.0
        assert scores.overall.recall == 0.0
        assert scores.overall.f1 == 0.0

    def test_mixed_fixture_equals_brute_force(self):
        gold = [
            annotated("a", [contribution(disease="COVID-19", r0="2.5", location="Wuhan, China")]),
            annotated("b", [contribution(disease="Ebola", method="SEIR model")]),
            annotated("c", None),
        ]
        parsed = [
            ("a", outcome_for([contribution(disease="covid-19", r0="2.5-3.5", location="China")])),
            ("b", outcome_for([contribution(disease="Zika", method="a SEIR model variant"),
                               contribution(date="2014")])),
            ("c", outcome_for([contribution(r0="1.1")])),
        ]
        for mode in ("exact", "partial"):
            got = ev.score(parsed, gold, mode)
            expected = {k: {"tp": 0, "fp": 0, "fn": 0} for k in PROPERTY_ORDER}
            for (rid, out), g in zip(parsed, gold):
                per = oracles.score_record_brute(
                    list(out.contributions), list(g.contributions), mode
                )
                for key in PROPERTY_ORDER:
                    for slot in ("tp", "fp", "fn"):
                        expected[key][slot] += per[key][slot]
            for key in PROPERTY_ORDER:
                counts = got.per_property[key]
                assert (counts.tp, counts.fp, counts.fn) == (
                    expected[key]["tp"],
                    expected[key]["fp"],
                    expected[key]["fn"],
                ), key.display

    def test_unanswerable_gold_with_prediction_counts_fp(self):
        gold = [annotated("u", None)]
        parsed = [("u", outcome_for([contribution(disease="x", date="y")]))]
        scores = ev.score(parsed, gold, "exact")
        assert scores.overall.fp == 2 and scores.overall.tp == 0 and scores.overall.fn == 0

    def test_id_mismatch_named(self):
        gold = [annotated("present", [contribution(date="x")])]
        with pytest.raises(EvaluationError, match="present"):
            ev.score([("absent", outcome_for(None))], gold, "exact")
        with pytest.raises(EvaluationError, match="absent"):
            ev.score(
                [("present", outcome_for(None)), ("absent", outcome_for(None))],
                gold,
                "exact",
            )

    def test_record_and_contribution_order_invariant(self, rng):
        gold = [make_annotated(i, True, rng) for i in range(6)]
        parsed = [
            (g.id, outcome_for(list(reversed(list(g.contributions))))) for g in gold
        ]
        forward = ev.score(parsed, gold, "partial")
        backward = ev.score(list(reversed(parsed)), list(reversed(gold)), "partial")
        for key in PROPERTY_ORDER:
            a, b = forward.per_property[key], backward.per_property[key]
            assert (a.tp, a.fp, a.fn) == (b.tp, b.fp, b.fn)
        assert forward.overall.tp == len(
            [k for g in gold for c in g.contributions for k in c.present_keys()]
        )

    def test_micro_average_conservation(self, rng):
        gold = [make_annotated(i, i % 3 != 0, rng) for i in range(9)]
        parsed = [
            (
                g.id,
                outcome_for(random_contribution_list(rng))
                if rng.random() < 0.7
                else outcome_for(None),
            )
            for g in gold
        ]
        scores = ev.score(parsed, gold, "partial")
        overall = scores.overall
        assert overall.tp == sum(c.tp for c in scores.per_property.values())
        assert overall.fp == sum(c.fp for c in scores.per_property.values())
        assert overall.fn == sum(c.fn for c in scores.per_property.values())


class TestGeneralAccuracy:
    def make_split(self):
        gold = [annotated(f"a{i}", [contribution(r0="2.5")]) for i in range(135)]
        gold += [annotated(f"u{i}", None) for i in range(165)]
        return gold

    def test_always_answers_is_45(self):
        gold = self.make_split()
        parsed = [(g.id, outcome_for([contribution(r0="9")])) for g in gold]
        assert ev.general_accuracy(parsed, gold) == 45.00

    def test_always_unanswerable_is_55(self):
        gold = self.make_split()
        parsed = [(g.id, outcome_for(None)) for g in gold]
        assert ev.general_accuracy(parsed, gold) == 55.00

    def test_perfect_is_100(self):
        gold = self.make_split()
        parsed = [
            (g.id, outcome_for(list(g.contributions) if g.answerable else None))
            for g in gold
        ]
        assert ev.general_accuracy(parsed, gold) == 100.0

    def test_broken_outputs_always_wrong(self):
        gold = [annotated("a", [contribution(r0="1")]), annotated("u", None)]
        parsed = [
            ("a", ParseOutcome(kind=ParseKind.INVALID_JSON)),
            ("u", ParseOutcome(kind=ParseKind.MALFORMED_TEXT)),
        ]
        assert ev.general_accuracy(parsed, gold) == 0.0


class TestRouge:
    def test_identical_strings_all_100(self):
        scores = ev.rouge("the R0 was 2.5 in Wuhan", "the R0 was 2.5 in Wuhan")
        assert all(v == 100.0 for v in scores.values())

    def test_disjoint_strings_all_0(self):
        scores = ev.rouge("alpha beta gamma", "delta epsilon zeta")
        assert all(v == 0.0 for v in scores.values())

    def test_cat_fixture(self):
        scores = ev.rouge("the cat sat", "the cat ran")
        assert scores["rouge1"] == pytest.approx(66.67, abs=0.01)
        assert scores["rougeL"] == pytest.approx(66.67, abs=0.01)
        # bigram overlap is only "the cat": 1 of 2 on both sides
        assert scores["rouge2"] == pytest.approx(50.0, abs=0.01)

    def test_empty_strings(self):
        assert all(v == 0.0 for v in ev.rouge("", "anything").values())
        assert all(v == 0.0 for v in ev.rouge("anything", "").values())

    def test_lsum_segments(self):
        pred = "the cat sat\nthe dog ran"
        ref = "the cat sat\nthe dog ran"
        assert ev.rouge(pred, ref)["rougeLsum"] == 100.0

    @settings(max_examples=150, deadline=None)
    @given(data=st.data())
    def test_rouge_l_matches_brute_force_lcs(self, data):
        words = ["r0", "covid", "wuhan", "2", "5", "model", "the", "of"]
        pred = " ".join(data.draw(st.lists(st.sampled_from(words), max_size=8)))
        ref = " ".join(data.draw(st.lists(st.sampled_from(words), max_size=8)))
        pred_tokens = ev._rouge_tokens(pred)
        ref_tokens = ev._rouge_tokens(ref)
        lcs = oracles.lcs_brute(tuple(pred_tokens), tuple(ref_tokens))
        if pred_tokens and ref_tokens:
            p = lcs / len(pred_tokens)
            r = lcs / len(ref_tokens)
            expected = 100 * 2 * p * r / (p + r) if p + r else 0.0
        else:
            expected = 0.0
        assert ev.rouge(pred, ref)["rougeL"] == pytest.approx(expected, abs=1e-9)

    @settings(max_examples=150, deadline=None)
    @given(data=st.data())
    def test_rouge1_at_least_rouge2_without_repetition(self, data):
        # holds whenever neither side repeats a token: matched bigrams form
        # vertex-disjoint paths, so the clipped unigram count exceeds the
        # bigram count by at least the number of paths
        words = ["a", "b", "c", "d", "e", "f", "g", "h"]
        pred = " ".join(data.draw(st.lists(st.sampled_from(words), max_size=8, unique=True)))
        ref = " ".join(data.draw(st.lists(st.sampled_from(words), max_size=8, unique=True)))
        scores = ev.rouge(pred, ref)
        assert scores["rouge1"] >= scores["rouge2"] - 1e-9

    def test_rouge2_can_exceed_rouge1_on_periodic_strings(self):
        # known property of clipped n-gram overlap: every bigram of the
        # period-2 pair matches while unigram counts clip at min frequency
        scores = ev.rouge("a b a b a", "b a b a b")
        assert scores["rouge2"] == 100.0
        assert scores["rouge1"] == pytest.approx(80.0)


class TestExactLePartial:
    @settings(max_examples=150, deadline=None)
    @given(data=st.data())
    def test_per_property_and_overall(self, data):
        rng = random.Random(data.draw(st.integers(0, 10**9)))
        gold = [make_annotated(i, rng.random() < 0.7, rng) for i in range(5)]
        parsed = []
        for g in gold:
            roll = rng.random()
            if roll < 0.2:
                parsed.append((g.id, outcome_for(None)))
            elif roll < 0.5 and g.answerable:
                parsed.append((g.id, outcome_for(g.contributions)))
            else:
                parsed.append((g.id, outcome_for(random_contribution_list(rng))))
        exact = ev.score(parsed, gold, "exact")
        partial = ev.score(parsed, gold, "partial")
        for key in PROPERTY_ORDER:
            assert exact.per_property[key].tp <= partial.per_property[key].tp
            assert exact.per_property[key].f1 <= partial.per_property[key].f1 + 1e-12
        assert exact.overall.f1 <= partial.overall.f1 + 1e-12


class TestEvaluateReport:
    def test_full_report_shape(self, rng):
        gold = [make_annotated(i, i % 2 == 0, rng) for i in range(6)]
        parsed = []
        references = {}
        for g in gold:
            if g.answerable:
                text = serialize(list(g.contributions), AnswerFormat.TEXT)
                outcome = ParseOutcome(
                    kind=ParseKind.PARSED,
                    contributions=list(g.contributions),
                    raw=text,
                )
                references[g.id] = text
            else:
                outcome = ParseOutcome(kind=ParseKind.UNANSWERABLE, raw="unanswerable")
                references[g.id] = "unanswerable"
            parsed.append((g.id, outcome))
        report = ev.evaluate(parsed, gold, references)
        assert report.n_records == 6
        assert report.general_accuracy == 100.0
        assert report.exact.overall.f1 == 1.0
        assert report.partial.overall.f1 == 1.0
        for key in ("rouge1", "rougeL", "rougeLsum"):
            assert report.rouge[key] == 100.0
        # the single-token "unanswerable" references have no bigrams, so the
        # three unanswerable records legitimately score rouge2 = 0
        assert report.rouge["rouge2"] == pytest.approx(50.0)
        payload = report.to_json()
        assert set(payload) == {
            "n_records",
            "exact",
            "partial",
            "general_accuracy",
            "rouge",
        }
        assert set(payload["exact"]["per_property"]) == {
            k.display for k in PROPERTY_ORDER
        }
