"""Rule-based detection of comparison-prior expressions in reports.

The labeler runs three stages over a normalized report:

1. mention extraction: find every keyword occurrence, sentence by
   sentence;
2. mention classification: match negation patterns first, then prior
   patterns, against the mention's sentence (sentence scope only);
3. aggregation: the report label is 1 exactly when at least one mention
   classified as a prior expression.

Classification is local to a sentence and independent across mentions,
so reports can be labeled with any order-preserving parallel map.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

from .corpus import CorpusError, CorpusRecord, Report, make_report
from .rules import KeywordEntry, RuleSet, RuleTemplate

__all__ = [
    "Verdict",
    "Mention",
    "ClassifiedMention",
    "PriorLabel",
    "LabelCounts",
    "extract_mentions",
    "classify_mentions",
    "aggregate",
    "label_report",
    "label_corpus",
]


class Verdict(enum.Enum):
    PRIOR_EXPRESSION = "prior_expression"
    NEGATED = "negated"
    IRRELEVANT = "irrelevant"


@dataclass(frozen=True)
class Mention:
    """A keyword occurrence: which token(s), in which sentence."""

    keyword: KeywordEntry
    sentence_index: int
    token_span: tuple[int, int]
    surface: str


@dataclass(frozen=True)
class ClassifiedMention:
    """A mention with its verdict and, when a pattern fired, the match.

    ``match_span`` is the full token extent the fired template consumed,
    mention included; for irrelevant mentions both fields are None.
    """

    mention: Mention
    verdict: Verdict
    fired_rule: str | None = None
    match_span: tuple[int, int] | None = None


@dataclass(frozen=True)
class PriorLabel:
    """Binary report label with the prior-expression mentions as evidence."""

    value: int
    evidence: tuple[ClassifiedMention, ...]


@dataclass(frozen=True)
class LabelCounts:
    negative: int
    positive: int
    total: int

    def to_dict(self) -> dict[str, int]:
        return {"negative": self.negative, "positive": self.positive,
                "total": self.total}


def extract_mentions(report: Report, rules: RuleSet) -> list[Mention]:
    """Find all keyword occurrences in sentence, then token, order.

    A token matches at most one keyword entry; when several surfaces
    apply, the longest wins and ties go to the earlier entry in the
    rules file.
    """
    exact: dict[str, tuple[int, KeywordEntry]] = {}
    stems: list[tuple[int, KeywordEntry]] = []
    for index, entry in enumerate(rules.keywords):
        if entry.stem:
            stems.append((index, entry))
        elif entry.surface not in exact:
            exact[entry.surface] = (index, entry)

    mentions = []
    for sentence_index, tokens in enumerate(report.tokens):
        for position, token in enumerate(tokens):
            candidates = []
            if token in exact:
                candidates.append(exact[token])
            for index, entry in stems:
                if entry.matches(token):
                    candidates.append((index, entry))
            if not candidates:
                continue
            # Longest surface wins; ties break toward file order.
            candidates.sort(key=lambda item: (-len(item[1].surface), item[0]))
            mentions.append(Mention(
                keyword=candidates[0][1],
                sentence_index=sentence_index,
                token_span=(position, position + 1),
                surface=token,
            ))
    return mentions


def classify_mentions(report: Report, mentions: list[Mention],
                      rules: RuleSet) -> list[ClassifiedMention]:
    """Assign a verdict to each mention against its own sentence.

    Negation patterns are evaluated before prior patterns, so "with no
    comparison studies" never reads as a prior. Change-verb keywords are
    confirmed only by comparative-marker patterns (rule ids starting
    with "marker"); a bare "increased opacity" stays irrelevant.
    """
    classified = []
    for mention in mentions:
        tokens = report.tokens[mention.sentence_index]
        classified.append(_classify_one(mention, tokens, rules))
    return classified


def _classify_one(mention: Mention, tokens: list[str],
                  rules: RuleSet) -> ClassifiedMention:
    for template in rules.negation_patterns:
        span = template.match(tokens, mention.token_span)
        if span is not None:
            return ClassifiedMention(mention, Verdict.NEGATED,
                                     template.rule_id, span)
    needs_marker = mention.keyword.surface in rules.change_verbs
    for template in rules.prior_patterns:
        if needs_marker and not template.is_marker:
            continue
        span = template.match(tokens, mention.token_span)
        if span is not None:
            return ClassifiedMention(mention, Verdict.PRIOR_EXPRESSION,
                                     template.rule_id, span)
    return ClassifiedMention(mention, Verdict.IRRELEVANT)


def aggregate(classified: list[ClassifiedMention]) -> PriorLabel:
    """Reduce mention verdicts to the report label.

    Evidence keeps exactly the prior-expression mentions, in their
    original order; the label is 1 iff that list is non-empty.
    """
    evidence = tuple(item for item in classified
                     if item.verdict is Verdict.PRIOR_EXPRESSION)
    return PriorLabel(value=1 if evidence else 0, evidence=evidence)


def label_report(report: Report, rules: RuleSet) -> PriorLabel:
    """Run the full extract/classify/aggregate chain on one report."""
    mentions = extract_mentions(report, rules)
    classified = classify_mentions(report, mentions, rules)
    return aggregate(classified)


def label_corpus(records: list[CorpusRecord], rules: RuleSet,
                 text_source: str = "text") -> tuple[list[PriorLabel], LabelCounts]:
    """Label every record, returning per-record labels plus counts.

    ``text_source`` picks which field is labeled: the record text
    (default), or the reference or candidate string, which is then
    normalized exactly like report text.
    """
    labels = []
    for record in records:
        if text_source == "text":
            report = record.report
        elif text_source in ("reference", "candidate"):
            value = getattr(record, text_source)
            if value is None:
                raise CorpusError(
                    f"record {record.id!r} has no {text_source} field")
            report = make_report(record.id, value)
        else:
            raise ValueError(f"unknown text source {text_source!r}")
        labels.append(label_report(report, rules))
    positive = sum(label.value for label in labels)
    counts = LabelCounts(negative=len(labels) - positive,
                         positive=positive, total=len(labels))
    return labels, counts
