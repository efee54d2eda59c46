"""Rules-file parsing and template matching."""

import pytest

from radpriors.corpus import make_report
from radpriors.labeler import label_report
from radpriors.rules import (RuleFileError, RuleSet, default_rules,
                             load_rules, parse_template)

QUOTED_KEYWORDS = {"previous", "prior", "preceding", "previously", "again",
                   "comparison", "interval", "increase", "decrease",
                   "enlarge"}


class TestDefaultRules:
    def test_contains_expected_keywords(self):
        rules = default_rules()
        surfaces = {entry.surface for entry in rules.keywords}
        assert QUOTED_KEYWORDS <= surfaces

    def test_change_verbs_are_keywords(self):
        rules = default_rules()
        surfaces = {entry.surface for entry in rules.keywords}
        assert rules.change_verbs <= surfaces

    def test_has_version(self):
        assert default_rules().version == "1"

    def test_rule_ids_unique(self):
        rules = default_rules()
        ids = [t.rule_id for t in rules.negation_patterns + rules.prior_patterns]
        assert len(ids) == len(set(ids))

    def test_validates(self):
        default_rules().validate()


class TestLoadRules:
    def test_empty_keywords_section_labels_everything_zero(self, tmp_path):
        path = tmp_path / "empty.rules"
        path.write_text("[keywords]\n[negations]\n[priors]\n[change_verbs]\n",
                        encoding="utf-8")
        rules = load_rules(path)
        assert rules.keywords == []
        report = make_report("r", "Unchanged compared to prior examination.")
        assert label_report(report, rules).value == 0

    def test_template_without_placeholder_is_rejected(self, tmp_path):
        path = tmp_path / "bad.rules"
        path.write_text("[priors]\nr1: compared to\n", encoding="utf-8")
        with pytest.raises(RuleFileError, match="r1"):
            load_rules(path)

    def test_syntax_error_carries_line_number(self, tmp_path):
        path = tmp_path / "bad.rules"
        path.write_text("[keywords]\nprior\nword extra junk\n",
                        encoding="utf-8")
        with pytest.raises(RuleFileError) as err:
            load_rules(path)
        assert err.value.line == 3

    def test_unknown_section_rejected(self, tmp_path):
        path = tmp_path / "bad.rules"
        path.write_text("[bogus]\n", encoding="utf-8")
        with pytest.raises(RuleFileError, match="bogus"):
            load_rules(path)

    def test_comments_and_blank_lines_ignored(self, tmp_path):
        path = tmp_path / "ok.rules"
        path.write_text(
            "# version: 7\n\n[keywords]\n# a comment\nprior\n\n"
            "[priors]\nr1: {m} study\n", encoding="utf-8")
        rules = load_rules(path)
        assert rules.version == "7"
        assert [k.surface for k in rules.keywords] == ["prior"]
        assert [t.rule_id for t in rules.prior_patterns] == ["r1"]

    def test_change_verb_must_be_a_keyword(self, tmp_path):
        path = tmp_path / "bad.rules"
        path.write_text("[keywords]\nprior\n[change_verbs]\nincrease\n",
                        encoding="utf-8")
        with pytest.raises(RuleFileError, match="increase"):
            load_rules(path)

    def test_duplicate_keyword_rejected(self, tmp_path):
        path = tmp_path / "bad.rules"
        path.write_text("[keywords]\nprior\nprior stem\n", encoding="utf-8")
        with pytest.raises(RuleFileError, match="prior"):
            load_rules(path)

    def test_keyword_case_normalized_on_load(self, tmp_path):
        path = tmp_path / "mixed.rules"
        path.write_text("[keywords]\nPrior\n", encoding="utf-8")
        assert [k.surface for k in load_rules(path).keywords] == ["prior"]


class TestParseTemplate:
    def test_two_placeholders_rejected(self):
        with pytest.raises(RuleFileError):
            parse_template("r", "{m} and {m}")

    def test_gap_at_edge_rejected(self):
        with pytest.raises(RuleFileError):
            parse_template("r", "..2 {m}")
        with pytest.raises(RuleFileError):
            parse_template("r", "{m} ..2")

    def test_empty_alternation_branch_rejected(self):
        with pytest.raises(RuleFileError):
            parse_template("r", "a| {m}")

    def test_malformed_gap_rejected(self):
        with pytest.raises(RuleFileError):
            parse_template("r", "a ..x {m}")

    def test_marker_prefix_detection(self):
        assert parse_template("marker-compared", "compared to {m}").is_marker
        assert not parse_template("prior-noted", "{m} noted").is_marker


class TestTemplateMatching:
    def test_literal_before_mention(self):
        t = parse_template("r", "compared to {m}")
        tokens = ["compared", "to", "prior", "examination"]
        assert t.match(tokens, (2, 3)) == (0, 3)

    def test_alternation(self):
        t = parse_template("r", "compared|similar to {m}")
        assert t.match(["similar", "to", "prior"], (2, 3)) == (0, 3)
        assert t.match(["identical", "to", "prior"], (2, 3)) is None

    def test_gap_bounds(self):
        t = parse_template("r", "compared ..2 {m}")
        assert t.match(["compared", "prior"], (1, 2)) == (0, 2)
        assert t.match(["compared", "a", "b", "prior"], (3, 4)) == (0, 4)
        assert t.match(["compared", "a", "b", "c", "prior"], (4, 5)) is None

    def test_minimal_gap_wins(self):
        # Both the first and second "to" can satisfy the template; the
        # match must bind the one closest to the mention.
        t = parse_template("r", "to ..3 {m}")
        tokens = ["to", "go", "to", "prior"]
        assert t.match(tokens, (3, 4)) == (2, 4)

    def test_forward_atoms_after_mention(self):
        t = parse_template("r", "{m} ..2 noted")
        assert t.match(["again", "noted"], (0, 1)) == (0, 2)
        assert t.match(["again", "was", "faintly", "noted"], (0, 1)) == (0, 4)
        assert t.match(["again", "a", "b", "c", "noted"], (0, 1)) is None

    def test_match_is_anchored_at_the_mention(self):
        t = parse_template("r", "compared to {m}")
        tokens = ["compared", "to", "prior", "and", "prior"]
        # The second "prior" is not preceded by "compared to".
        assert t.match(tokens, (4, 5)) is None

    def test_span_covers_template_extent(self):
        t = parse_template("r", "in the {m}")
        tokens = ["cleared", "in", "the", "interval"]
        assert t.match(tokens, (3, 4)) == (1, 4)


class TestRuleSetValidate:
    def test_duplicate_rule_ids_rejected(self):
        rules = RuleSet(
            keywords=[],
            negation_patterns=[parse_template("r1", "no {m}")],
            prior_patterns=[parse_template("r1", "{m} study")],
            change_verbs=frozenset())
        with pytest.raises(RuleFileError, match="r1"):
            rules.validate()

    def test_uppercase_keyword_rejected(self):
        from radpriors.rules import KeywordEntry
        rules = RuleSet(keywords=[KeywordEntry("Prior")],
                        negation_patterns=[], prior_patterns=[],
                        change_verbs=frozenset())
        with pytest.raises(RuleFileError, match="lowercase"):
            rules.validate()
