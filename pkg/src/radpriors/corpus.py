"""Report ingestion: findings extraction, sentence splitting, tokenization.

Reports arrive as JSONL or CSV records with an ``id`` and a free-text
``text`` field, plus optional ``reference``, ``candidate``, and ``label``
columns. Each record's text is normalized once at load time into a
:class:`Report` so downstream stages share one tokenization.
"""

from __future__ import annotations

import csv
import json
import string
from dataclasses import dataclass, field
from pathlib import Path

__all__ = [
    "CorpusError",
    "Report",
    "CorpusRecord",
    "extract_findings",
    "split_sentences",
    "tokenize",
    "make_report",
    "load_corpus",
    "write_corpus",
]


class CorpusError(ValueError):
    """Malformed corpus input. Carries the offending location when known."""

    def __init__(self, message: str, *, line: int | None = None,
                 byte_offset: int | None = None) -> None:
        if line is not None:
            message = f"line {line}: {message}"
            if byte_offset is not None:
                message += f" (byte offset {byte_offset})"
        super().__init__(message)
        self.line = line
        self.byte_offset = byte_offset


# Section headers recognized when carving out the findings section.
_FINDINGS_HEADER = "findings:"
_STOP_HEADERS = ("impression:", "recommendation:")

# Sentence-final periods are suppressed after these lowercase words.
_ABBREVIATIONS = {"dr", "mr", "mrs", "ms", "vs", "a.m", "p.m", "e.g", "i.e"}

_STRIP_CHARS = string.punctuation


def extract_findings(raw_text: str) -> str:
    """Return the findings section of a report, or the whole text.

    The section starts after a case-insensitive ``FINDINGS:`` header and
    runs until the next ``IMPRESSION:`` or ``RECOMMENDATION:`` header or
    the end of the text. Reports without a findings header are returned
    unchanged, so bare-text corpora pass through.
    """
    lowered = raw_text.lower()
    start = lowered.find(_FINDINGS_HEADER)
    if start < 0:
        return raw_text
    body_start = start + len(_FINDINGS_HEADER)
    body_end = len(raw_text)
    for header in _STOP_HEADERS:
        pos = lowered.find(header, body_start)
        if 0 <= pos < body_end:
            body_end = pos
    return raw_text[body_start:body_end].strip()


def split_sentences(text: str) -> list[str]:
    """Split text into trimmed sentences on ``.``, ``!``, ``?`` boundaries.

    A period only ends a sentence when followed by whitespace or the end
    of the text, and not when the preceding word is a single letter or a
    known abbreviation ("Stable vs. prior exam." stays one sentence).
    """
    sentences: list[str] = []
    start = 0
    n = len(text)
    for i, ch in enumerate(text):
        if ch not in ".!?":
            continue
        if i + 1 < n and not text[i + 1].isspace():
            continue
        if ch == "." and _guarded_period(text, i):
            continue
        sentence = text[start:i + 1].strip()
        if sentence:
            sentences.append(sentence)
        start = i + 1
    tail = text[start:].strip()
    if tail:
        sentences.append(tail)
    return sentences


def _guarded_period(text: str, i: int) -> bool:
    # Word immediately before the period, without the period itself.
    j = i
    while j > 0 and not text[j - 1].isspace():
        j -= 1
    word = text[j:i].lower()
    if len(word) == 1 and word.isalpha():
        return True
    return word in _ABBREVIATIONS


def tokenize(sentence: str) -> list[str]:
    """Lowercase and split a sentence into punctuation-stripped tokens.

    Leading and trailing punctuation is removed from each token while
    internal hyphens and slashes survive ("ill-defined" stays one token).
    De-identification masks ("XXXX") come through as the token "xxxx".
    Tokens that were purely punctuation are dropped.
    """
    tokens = []
    for chunk in sentence.lower().split():
        token = chunk.strip(_STRIP_CHARS)
        if token:
            tokens.append(token)
    return tokens


@dataclass
class Report:
    """One normalized report: raw text plus derived views of it."""

    id: str
    raw_text: str
    findings: str
    sentences: list[str]
    tokens: list[list[str]]


def make_report(report_id: str, raw_text: str) -> Report:
    """Build a :class:`Report` by the fixed findings/sentence/token chain."""
    findings = extract_findings(raw_text)
    sentences = split_sentences(findings)
    tokens = [tokenize(s) for s in sentences]
    return Report(id=report_id, raw_text=raw_text, findings=findings,
                  sentences=sentences, tokens=tokens)


@dataclass
class CorpusRecord:
    """A report plus the optional evaluation fields that rode along."""

    report: Report
    reference: str | None = None
    candidate: str | None = None
    gold_label: int | None = None

    @property
    def id(self) -> str:
        return self.report.id


_OPTIONAL_FIELDS = ("reference", "candidate", "label")


def load_corpus(path: str | Path, format: str = "jsonl") -> list[CorpusRecord]:
    """Load a corpus file into records, preserving file order.

    Raises :class:`CorpusError` for malformed rows, with the line number
    (and byte offset for JSONL) in the message, and for duplicate ids.
    """
    path = Path(path)
    if format == "jsonl":
        records = _load_jsonl(path)
    elif format == "csv":
        records = _load_csv(path)
    else:
        raise CorpusError(f"unknown corpus format {format!r}")
    seen: dict[str, int] = {}
    for record in records:
        if record.id in seen:
            raise CorpusError(f"duplicate id {record.id!r}")
        seen[record.id] = 1
    return records


def _load_jsonl(path: Path) -> list[CorpusRecord]:
    records = []
    offset = 0
    with open(path, "rb") as handle:
        for line_no, raw_line in enumerate(handle, start=1):
            line_offset = offset
            offset += len(raw_line)
            try:
                text_line = raw_line.decode("utf-8")
            except UnicodeDecodeError as exc:
                raise CorpusError(f"invalid UTF-8: {exc}", line=line_no,
                                  byte_offset=line_offset) from exc
            if not text_line.strip():
                continue
            try:
                obj = json.loads(text_line)
            except json.JSONDecodeError as exc:
                raise CorpusError(f"malformed JSON: {exc.msg}", line=line_no,
                                  byte_offset=line_offset) from exc
            if not isinstance(obj, dict):
                raise CorpusError("record is not a JSON object", line=line_no,
                                  byte_offset=line_offset)
            records.append(_record_from_mapping(obj, line_no, line_offset))
    return records


def _load_csv(path: Path) -> list[CorpusRecord]:
    records = []
    with open(path, newline="", encoding="utf-8") as handle:
        reader = csv.DictReader(handle)
        if reader.fieldnames is None:
            return []
        missing = {"id", "text"} - set(reader.fieldnames)
        if missing:
            raise CorpusError(
                f"missing required column(s): {', '.join(sorted(missing))}",
                line=1)
        for row in reader:
            mapping = {k: v for k, v in row.items()
                       if k in ("id", "text") + _OPTIONAL_FIELDS
                       and v is not None and v != ""}
            records.append(_record_from_mapping(mapping, reader.line_num, None))
    return records


def _record_from_mapping(obj: dict, line_no: int,
                         byte_offset: int | None) -> CorpusRecord:
    for name in ("id", "text"):
        if name not in obj:
            raise CorpusError(f"missing required field {name!r}", line=line_no,
                              byte_offset=byte_offset)
        if not isinstance(obj[name], str):
            raise CorpusError(f"field {name!r} must be a string", line=line_no,
                              byte_offset=byte_offset)
    label = obj.get("label")
    if label is not None:
        if isinstance(label, str) and label in ("0", "1"):
            label = int(label)
        if not isinstance(label, int) or isinstance(label, bool) \
                or label not in (0, 1):
            raise CorpusError(
                f"field 'label' must be 0 or 1, got {obj.get('label')!r}",
                line=line_no, byte_offset=byte_offset)
    for name in ("reference", "candidate"):
        value = obj.get(name)
        if value is not None and not isinstance(value, str):
            raise CorpusError(f"field {name!r} must be a string",
                              line=line_no, byte_offset=byte_offset)
    return CorpusRecord(
        report=make_report(obj["id"], obj["text"]),
        reference=obj.get("reference"),
        candidate=obj.get("candidate"),
        gold_label=label,
    )


def write_corpus(records: list[CorpusRecord], path: str | Path,
                 format: str = "jsonl") -> None:
    """Serialize records back to disk; the inverse of :func:`load_corpus`."""
    path = Path(path)
    rows = []
    for record in records:
        row: dict[str, object] = {"id": record.id, "text": record.report.raw_text}
        if record.reference is not None:
            row["reference"] = record.reference
        if record.candidate is not None:
            row["candidate"] = record.candidate
        if record.gold_label is not None:
            row["label"] = record.gold_label
        rows.append(row)
    if format == "jsonl":
        with open(path, "w", encoding="utf-8") as handle:
            for row in rows:
                handle.write(json.dumps(row, ensure_ascii=False) + "\n")
    elif format == "csv":
        with open(path, "w", newline="", encoding="utf-8") as handle:
            writer = csv.DictWriter(
                handle, fieldnames=["id", "text", "reference", "candidate", "label"])
            writer.writeheader()
            for row in rows:
                writer.writerow(row)
    else:
        raise CorpusError(f"unknown corpus format {format!r}")
