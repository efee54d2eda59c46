"""Text-overlap metrics computed from first principles.

Implements corpus-level BLEU-1..4 (clipped modified n-gram precision,
geometric mean, brevity penalty), ROUGE-L as the LCS F-measure with
beta = 1.2, and CIDEr as the mean TF-IDF n-gram cosine over n = 1..4
scaled by 10. Every record carries a single reference.

Corpus BLEU aggregates matched and possible n-gram counts over the whole
corpus before taking precisions; it is not a mean of per-report scores.
Per-report BLEU smooths zero-count orders by 1/(2 * candidate length) so
individual scores stay finite for stratified analysis.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass

from .corpus import CorpusRecord, tokenize

__all__ = [
    "EvaluationError",
    "ReportScores",
    "CorpusScores",
    "MetricReport",
    "ngram_counts",
    "bleu",
    "lcs_length",
    "rouge_l",
    "cider",
    "cosine",
    "evaluate_corpus",
]

MAX_ORDER = 4
ROUGE_BETA = 1.2
CIDER_SCALE = 10.0


class EvaluationError(ValueError):
    """Records cannot be scored (missing fields, empty input)."""


def ngram_counts(tokens: list[str], n: int) -> Counter:
    """Count the n-grams of a token list as a multiset."""
    return Counter(tuple(tokens[i:i + n]) for i in range(len(tokens) - n + 1))


def _clipped_matches(candidate: list[str], reference: list[str],
                     n: int) -> tuple[int, int]:
    """Return (clipped matched n-grams, possible candidate n-grams)."""
    possible = max(len(candidate) - n + 1, 0)
    if possible == 0:
        return 0, 0
    cand = ngram_counts(candidate, n)
    ref = ngram_counts(reference, n)
    matched = sum(min(count, ref[gram]) for gram, count in cand.items())
    return matched, possible


def _brevity_penalty(candidate_length: int, reference_length: int) -> float:
    if candidate_length == 0:
        return 0.0
    if candidate_length < reference_length:
        return math.exp(1.0 - reference_length / candidate_length)
    return 1.0


def bleu(candidates: list[list[str]], references: list[list[str]],
         n: int = 4) -> float:
    """Corpus-level BLEU-n over parallel token lists.

    Precisions use corpus totals; an order with zero matches anywhere in
    the corpus drives the whole score to 0 (no smoothing here).
    """
    if not 1 <= n <= MAX_ORDER:
        raise EvaluationError(f"BLEU order must be in 1..{MAX_ORDER}, got {n}")
    if len(candidates) != len(references):
        raise EvaluationError(
            f"got {len(candidates)} candidates but {len(references)} references")
    if not candidates:
        raise EvaluationError("cannot score an empty candidate set")
    matched = [0] * n
    possible = [0] * n
    candidate_length = 0
    reference_length = 0
    for candidate, reference in zip(candidates, references):
        candidate_length += len(candidate)
        reference_length += len(reference)
        for order in range(1, n + 1):
            m, p = _clipped_matches(candidate, reference, order)
            matched[order - 1] += m
            possible[order - 1] += p
    if any(m == 0 or p == 0 for m, p in zip(matched, possible)):
        return 0.0
    log_precision = math.fsum(
        math.log(m / p) for m, p in zip(matched, possible)) / n
    return _brevity_penalty(candidate_length, reference_length) \
        * math.exp(log_precision)


def _smoothed_bleu(candidate: list[str], reference: list[str],
                   n: int) -> float:
    """Single-pair BLEU-n with zero-count orders smoothed to 1/(2c)."""
    c = len(candidate)
    if c == 0:
        return 0.0
    log_sum = 0.0
    for order in range(1, n + 1):
        m, p = _clipped_matches(candidate, reference, order)
        precision = m / p if m > 0 and p > 0 else 1.0 / (2.0 * c)
        log_sum += math.log(precision)
    return _brevity_penalty(c, len(reference)) * math.exp(log_sum / n)


def lcs_length(a: list[str], b: list[str]) -> int:
    """Length of the longest common subsequence of two token lists."""
    if not a or not b:
        return 0
    previous = [0] * (len(b) + 1)
    for token_a in a:
        current = [0]
        for j, token_b in enumerate(b, start=1):
            if token_a == token_b:
                current.append(previous[j - 1] + 1)
            else:
                current.append(max(previous[j], current[j - 1]))
        previous = current
    return previous[len(b)]


def rouge_l(candidate: list[str], reference: list[str],
            beta: float = ROUGE_BETA) -> float:
    """ROUGE-L F-measure. Empty candidate or reference scores 0."""
    if not candidate or not reference:
        return 0.0
    lcs = lcs_length(candidate, reference)
    if lcs == 0:
        return 0.0
    precision = lcs / len(candidate)
    recall = lcs / len(reference)
    beta_sq = beta * beta
    return ((1.0 + beta_sq) * precision * recall
            / (recall + beta_sq * precision))


def cosine(u: dict, v: dict) -> float:
    """Cosine similarity of sparse vectors; 0 when either norm is 0."""
    norm_u = math.sqrt(math.fsum(x * x for x in u.values()))
    norm_v = math.sqrt(math.fsum(x * x for x in v.values()))
    if norm_u == 0.0 or norm_v == 0.0:
        return 0.0
    dot = math.fsum(u[gram] * v.get(gram, 0.0) for gram in u)
    return dot / (norm_u * norm_v)


def _reference_idf(references: list[list[str]], n: int) -> dict:
    """log(N / df) per n-gram, df clamped to 1 for unseen grams."""
    total = len(references)
    document_frequency: Counter = Counter()
    for reference in references:
        document_frequency.update(set(ngram_counts(reference, n)))
    log_total = math.log(total)
    return {gram: log_total - math.log(df)
            for gram, df in document_frequency.items()}


def _tfidf(tokens: list[str], n: int, idf: dict, log_total: float) -> dict:
    # Grams absent from every reference get the df=1 fallback weight.
    return {gram: count * idf.get(gram, log_total)
            for gram, count in ngram_counts(tokens, n).items()}


def cider(candidates: list[list[str]],
          references: list[list[str]]) -> tuple[list[float], float]:
    """CIDEr per pair plus the corpus mean.

    IDF comes from the reference side of the corpus, so a single-document
    corpus has IDF log(1) = 0 everywhere and scores 0 by the zero-norm
    guard rather than erroring.
    """
    if len(candidates) != len(references):
        raise EvaluationError(
            f"got {len(candidates)} candidates but {len(references)} references")
    if not candidates:
        raise EvaluationError("cannot score an empty candidate set")
    log_total = math.log(len(references))
    idf_by_order = [_reference_idf(references, n)
                    for n in range(1, MAX_ORDER + 1)]
    scores = []
    for candidate, reference in zip(candidates, references):
        per_order = []
        for n in range(1, MAX_ORDER + 1):
            idf = idf_by_order[n - 1]
            cand_vec = _tfidf(candidate, n, idf, log_total)
            ref_vec = _tfidf(reference, n, idf, log_total)
            per_order.append(cosine(cand_vec, ref_vec))
        scores.append(CIDER_SCALE * math.fsum(per_order) / MAX_ORDER)
    mean = math.fsum(scores) / len(scores)
    return scores, mean


@dataclass(frozen=True)
class ReportScores:
    id: str
    bleu: tuple[float, float, float, float]
    rouge_l: float
    cider: float
    label: int | None = None

    def to_dict(self) -> dict:
        row: dict = {"id": self.id}
        for order, value in enumerate(self.bleu, start=1):
            row[f"bleu{order}"] = value
        row["rouge_l"] = self.rouge_l
        row["cider"] = self.cider
        if self.label is not None:
            row["label"] = self.label
        return row


@dataclass(frozen=True)
class CorpusScores:
    bleu: tuple[float, float, float, float]
    rouge_l: float
    cider: float

    def to_dict(self) -> dict:
        row = {f"bleu{order}": value
               for order, value in enumerate(self.bleu, start=1)}
        row["rouge_l"] = self.rouge_l
        row["cider"] = self.cider
        return row


@dataclass
class MetricReport:
    per_report: list[ReportScores]
    corpus: CorpusScores

    def to_dict(self) -> dict:
        return {"corpus": self.corpus.to_dict(),
                "per_report": [row.to_dict() for row in self.per_report]}


def evaluate_corpus(records: list[CorpusRecord]) -> MetricReport:
    """Score every record's candidate against its reference.

    Raises :class:`EvaluationError` naming the first record that lacks a
    candidate or reference.
    """
    if not records:
        raise EvaluationError("cannot score an empty corpus")
    candidates = []
    references = []
    for record in records:
        if record.candidate is None:
            raise EvaluationError(f"record {record.id!r} has no candidate")
        if record.reference is None:
            raise EvaluationError(f"record {record.id!r} has no reference")
        candidates.append(tokenize(record.candidate))
        references.append(tokenize(record.reference))

    cider_scores, cider_mean = cider(candidates, references)
    per_report = []
    for record, candidate, reference, cider_score in zip(
            records, candidates, references, cider_scores):
        per_bleu = tuple(_smoothed_bleu(candidate, reference, n)
                         for n in range(1, MAX_ORDER + 1))
        per_report.append(ReportScores(
            id=record.id,
            bleu=per_bleu,
            rouge_l=rouge_l(candidate, reference),
            cider=cider_score,
        ))
    corpus = CorpusScores(
        bleu=tuple(bleu(candidates, references, n)
                   for n in range(1, MAX_ORDER + 1)),
        rouge_l=math.fsum(row.rouge_l for row in per_report) / len(per_report),
        cider=cider_mean,
    )
    return MetricReport(per_report=per_report, corpus=corpus)
