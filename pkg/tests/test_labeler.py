"""Mention extraction, classification, aggregation, corpus labeling."""

from pathlib import Path

import pytest

from radpriors.corpus import CorpusError, load_corpus, make_report
from radpriors.labeler import (ClassifiedMention, Mention, PriorLabel,
                               Verdict, aggregate, classify_mentions,
                               extract_mentions, label_corpus, label_report)
from radpriors.rules import (KeywordEntry, RuleSet, default_rules,
                             parse_template)

FIXTURES = Path(__file__).parent / "fixtures"

ROW1 = "Cardiomegaly is noted and is stable compared to prior examination from XXXX."
ROW2 = "Ill-defined opacity is again noted in the region of the lingula."
ROW3 = "There are low lung volumes. The lungs are otherwise clear."
ROW4 = "The left lower lobe have cleared in the interval."


@pytest.fixture(scope="module")
def rules():
    return default_rules()


def classify_text(text, rules):
    report = make_report("r", text)
    mentions = extract_mentions(report, rules)
    return classify_mentions(report, mentions, rules)


class TestExtractMentions:
    def test_single_keyword_sentence(self, rules):
        report = make_report("r", ROW1)
        mentions = extract_mentions(report, rules)
        assert [m.surface for m in mentions] == ["prior"]

    def test_no_keywords(self, rules):
        report = make_report("r", ROW3)
        assert extract_mentions(report, rules) == []

    def test_stem_prefix_and_exact_together(self, rules):
        report = make_report("r", "The opacity increased since prior study.")
        mentions = extract_mentions(report, rules)
        assert [(m.surface, m.keyword.surface) for m in mentions] == \
            [("increased", "increase"), ("prior", "prior")]

    def test_mentions_ordered_by_sentence_then_position(self, rules):
        report = make_report(
            "r", "Interval change of the effusion. Prior film reviewed.")
        mentions = extract_mentions(report, rules)
        assert [(m.sentence_index, m.token_span) for m in mentions] == \
            [(0, (0, 1)), (1, (0, 1))]

    def test_longest_surface_wins(self):
        rules = RuleSet(
            keywords=[KeywordEntry("unchang", stem=True),
                      KeywordEntry("unchanged")],
            negation_patterns=[], prior_patterns=[],
            change_verbs=frozenset())
        report = make_report("r", "The nodule is unchanged.")
        mentions = extract_mentions(report, rules)
        assert len(mentions) == 1
        assert mentions[0].keyword.surface == "unchanged"

    def test_span_lies_within_sentence(self, rules):
        report = make_report("r", ROW1)
        for mention in extract_mentions(report, rules):
            tokens = report.tokens[mention.sentence_index]
            start, end = mention.token_span
            assert 0 <= start < end <= len(tokens)
            assert mention.keyword.matches(tokens[start])


class TestClassifyMentions:
    def test_negated_comparison(self, rules):
        classified = classify_text(
            "Evaluation is limited with no comparison studies.", rules)
        assert [c.verdict for c in classified] == [Verdict.NEGATED]

    def test_again_noted_is_prior_expression(self, rules):
        classified = classify_text(ROW2, rules)
        assert [c.verdict for c in classified] == [Verdict.PRIOR_EXPRESSION]
        assert classified[0].fired_rule == "prior-noted"

    def test_in_the_interval_is_prior_expression(self, rules):
        classified = classify_text("The lobe has cleared in the interval.",
                                   rules)
        assert [c.verdict for c in classified] == [Verdict.PRIOR_EXPRESSION]

    def test_negation_takes_precedence(self, rules):
        # "prior study" alone would confirm; the leading "no" must veto.
        classified = classify_text("No prior study for review.", rules)
        assert classified[0].verdict is Verdict.NEGATED

    def test_change_verb_needs_marker(self, rules):
        bare = classify_text("Increased interstitial markings are present.",
                             rules)
        assert [c.verdict for c in bare] == [Verdict.IRRELEVANT]
        assert bare[0].fired_rule is None
        marked = classify_text("The nodule increased since XXXX.", rules)
        assert [c.verdict for c in marked] == [Verdict.PRIOR_EXPRESSION]

    def test_verdict_rule_consistency(self, rules):
        negation_ids = {t.rule_id for t in rules.negation_patterns}
        prior_ids = {t.rule_id for t in rules.prior_patterns}
        for text in (ROW1, ROW2, ROW4, "No prior study.",
                     "The nodule increased since XXXX."):
            for item in classify_text(text, rules):
                if item.verdict is Verdict.PRIOR_EXPRESSION:
                    assert item.fired_rule in prior_ids
                elif item.verdict is Verdict.NEGATED:
                    assert item.fired_rule in negation_ids
                else:
                    assert item.fired_rule is None


class TestAggregate:
    def _mention(self):
        return Mention(keyword=KeywordEntry("prior"), sentence_index=0,
                       token_span=(0, 1), surface="prior")

    def test_empty(self):
        assert aggregate([]) == PriorLabel(value=0, evidence=())

    def test_negated_only(self):
        item = ClassifiedMention(self._mention(), Verdict.NEGATED,
                                 fired_rule="neg-no", match_span=(0, 1))
        assert aggregate([item]).value == 0

    def test_any_prior_expression_wins(self):
        irrelevant = ClassifiedMention(self._mention(), Verdict.IRRELEVANT)
        confirmed = ClassifiedMention(self._mention(),
                                      Verdict.PRIOR_EXPRESSION,
                                      fired_rule="prior-noted",
                                      match_span=(0, 2))
        label = aggregate([irrelevant, confirmed])
        assert label.value == 1
        assert label.evidence == (confirmed,)


class TestLabelReport:
    def test_positive_row(self, rules):
        assert label_report(make_report("r", ROW1), rules).value == 1

    def test_negative_row(self, rules):
        assert label_report(make_report("r", ROW3), rules).value == 0

    def test_empty_report(self, rules):
        assert label_report(make_report("r", ""), rules).value == 0

    def test_value_iff_evidence(self, rules):
        for text in (ROW1, ROW2, ROW3, ROW4, ""):
            label = label_report(make_report("r", text), rules)
            assert (label.value == 1) == bool(label.evidence)


class TestLabelCorpus:
    def test_table_counts(self, rules):
        records = load_corpus(FIXTURES / "golden4.jsonl")
        labels, counts = label_corpus(records, rules)
        assert [l.value for l in labels] == [1, 1, 0, 1]
        assert counts.to_dict() == {"negative": 1, "positive": 3, "total": 4}

    def test_empty_corpus(self, rules):
        labels, counts = label_corpus([], rules)
        assert labels == []
        assert counts.to_dict() == {"negative": 0, "positive": 0, "total": 0}

    def test_synthetic_fixture_full_agreement(self, rules):
        records = load_corpus(FIXTURES / "synthetic50.jsonl")
        labels, counts = label_corpus(records, rules)
        disagreements = [record.id for record, label in zip(records, labels)
                         if label.value != record.gold_label]
        assert disagreements == []
        assert counts.total == 50

    def test_label_on_candidate(self, rules):
        records = load_corpus(FIXTURES / "pipeline3.jsonl")
        labels, _ = label_corpus(records, rules, text_source="candidate")
        assert [l.value for l in labels] == [0, 1, 0]

    def test_missing_field_names_record(self, rules):
        records = load_corpus(FIXTURES / "golden4.jsonl")
        with pytest.raises(CorpusError, match="t1"):
            label_corpus(records, rules, text_source="candidate")


class TestLabelerProperties:
    def test_deterministic(self, rules):
        records = load_corpus(FIXTURES / "synthetic50.jsonl")
        first, _ = label_corpus(records, rules)
        second, _ = label_corpus(records, rules)
        assert first == second

    def _with_extra_prior(self, rules):
        return RuleSet(
            keywords=rules.keywords,
            negation_patterns=rules.negation_patterns,
            prior_patterns=rules.prior_patterns
            + [parse_template("zz-extra-prior", "{m} ..4 masses")],
            change_verbs=rules.change_verbs)

    def _with_extra_negation(self, rules):
        return RuleSet(
            keywords=rules.keywords,
            negation_patterns=rules.negation_patterns
            + [parse_template("zz-extra-neg", "{m} ..4 noted")],
            prior_patterns=rules.prior_patterns,
            change_verbs=rules.change_verbs)

    def test_adding_prior_pattern_never_flips_positive_to_negative(self, rules):
        records = load_corpus(FIXTURES / "synthetic50.jsonl")
        base, _ = label_corpus(records, rules)
        extended, _ = label_corpus(records, self._with_extra_prior(rules))
        for before, after in zip(base, extended):
            if before.value == 1:
                assert after.value == 1

    def test_adding_negation_pattern_never_flips_negative_to_positive(self, rules):
        records = load_corpus(FIXTURES / "synthetic50.jsonl")
        base, _ = label_corpus(records, rules)
        extended, _ = label_corpus(records, self._with_extra_negation(rules))
        for before, after in zip(base, extended):
            if before.value == 0:
                assert after.value == 0

    def test_sentence_locality(self, rules):
        cases = [
            ("Patchy opacities right base again noted. The heart is normal.", 1),
            ("The heart is normal. Comparison is made with prior study.", 0),
            ("Lungs are clear. No prior studies available.", 1),
        ]
        for text, drop_index in cases:
            report = make_report("r", text)
            label = label_report(report, rules)
            evidence_sentences = {c.mention.sentence_index
                                  for c in label.evidence}
            assert drop_index not in evidence_sentences
            kept = [s for i, s in enumerate(report.sentences)
                    if i != drop_index]
            trimmed = label_report(make_report("r", " ".join(kept)), rules)
            assert trimmed.value == label.value

    def test_evidence_soundness(self, rules):
        prior_by_id = {t.rule_id: t for t in rules.prior_patterns}
        for fixture in ("golden4.jsonl", "synthetic50.jsonl"):
            for record in load_corpus(FIXTURES / fixture):
                label = label_report(record.report, rules)
                for item in label.evidence:
                    tokens = record.report.tokens[item.mention.sentence_index]
                    start, end = item.mention.token_span
                    assert item.mention.keyword.matches(tokens[start])
                    template = prior_by_id[item.fired_rule]
                    assert template.match(tokens, item.mention.token_span) \
                        == item.match_span

    def test_concatenation_is_disjunction(self, rules):
        records = [r for r in load_corpus(FIXTURES / "synthetic50.jsonl")
                   if "findings:" not in r.report.raw_text.lower()]
        pairs = [(records[i], records[-(i + 1)]) for i in range(12)]
        for left, right in pairs:
            joined = make_report(
                "r", left.report.raw_text + " " + right.report.raw_text)
            combined = label_report(joined, rules).value
            separate = max(label_report(left.report, rules).value,
                           label_report(right.report, rules).value)
            assert combined == separate
