"""Rule file parsing and the token-level template matcher.

A rules file is line oriented UTF-8 with ``#`` comments and four sections:

    [keywords]       one keyword per line: ``surface`` or ``surface stem``
    [negations]      one pattern per line: ``rule-id: template``
    [priors]         one pattern per line: ``rule-id: template``
    [change_verbs]   keyword surfaces that need a comparative marker

A template is a space-separated list of atoms matched against sentence
tokens:

    literal          matches exactly one equal token
    a|b|c            alternation, matches one token equal to any choice
    {m}              the mention slot; exactly one per template
    ..N              a gap of 0..N arbitrary tokens

Templates may not begin or end with a gap, so every match has a
well-defined token span. Prior patterns whose id starts with ``marker``
double as comparative markers: change-verb keywords are confirmed only
by marker patterns (see the labeler module).
"""

from __future__ import annotations

from dataclasses import dataclass
from importlib import resources
from pathlib import Path

__all__ = [
    "RuleFileError",
    "KeywordEntry",
    "RuleTemplate",
    "RuleSet",
    "parse_template",
    "load_rules",
    "default_rules",
    "DEFAULT_RULES_RESOURCE",
]

DEFAULT_RULES_RESOURCE = "default.rules"

_SECTIONS = ("keywords", "negations", "priors", "change_verbs")


class RuleFileError(ValueError):
    """Rules file cannot be parsed or fails validation."""

    def __init__(self, message: str, *, line: int | None = None) -> None:
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


@dataclass(frozen=True)
class KeywordEntry:
    """A keyword surface form and its match mode.

    In stem mode the surface matches any token it prefixes, so the entry
    ``increase stem`` covers "increase", "increased", and "increasing".
    """

    surface: str
    stem: bool = False

    def matches(self, token: str) -> bool:
        if self.stem:
            return token.startswith(self.surface)
        return token == self.surface


# Template atoms. A literal with several choices encodes alternation.
@dataclass(frozen=True)
class _Literal:
    choices: tuple[str, ...]


@dataclass(frozen=True)
class _Gap:
    max: int


class _MentionSlot:
    def __repr__(self) -> str:  # pragma: no cover - debug aid
        return "{m}"


_MENTION = _MentionSlot()
_Atom = _Literal | _Gap | _MentionSlot


@dataclass(frozen=True)
class RuleTemplate:
    """A compiled template: the atoms before and after the mention slot."""

    rule_id: str
    pre: tuple[_Atom, ...]
    post: tuple[_Atom, ...]
    source: str

    @property
    def is_marker(self) -> bool:
        return self.rule_id.startswith("marker")

    def match(self, tokens: list[str],
              span: tuple[int, int]) -> tuple[int, int] | None:
        """Match against a sentence with ``{m}`` bound to ``span``.

        Gaps consume as few tokens as possible, backtracking within their
        bound. Returns the full matched token span (first to last consumed
        token, mention included) or None.
        """
        start = _match_back(self.pre, tokens, span[0])
        if start is None:
            return None
        end = _match_forward(self.post, tokens, span[1])
        if end is None:
            return None
        return (start, end)


def _match_back(atoms: tuple[_Atom, ...], tokens: list[str],
                end: int) -> int | None:
    """Match atoms right-to-left so the last atom ends at ``end``."""
    if not atoms:
        return end
    atom = atoms[-1]
    rest = atoms[:-1]
    if isinstance(atom, _Gap):
        for width in range(atom.max + 1):
            if end - width < 0:
                break
            found = _match_back(rest, tokens, end - width)
            if found is not None:
                return found
        return None
    if end - 1 < 0 or tokens[end - 1] not in atom.choices:
        return None
    return _match_back(rest, tokens, end - 1)


def _match_forward(atoms: tuple[_Atom, ...], tokens: list[str],
                   start: int) -> int | None:
    """Match atoms left-to-right beginning at ``start``."""
    if not atoms:
        return start
    atom = atoms[0]
    rest = atoms[1:]
    if isinstance(atom, _Gap):
        for width in range(atom.max + 1):
            if start + width > len(tokens):
                break
            found = _match_forward(rest, tokens, start + width)
            if found is not None:
                return found
        return None
    if start >= len(tokens) or tokens[start] not in atom.choices:
        return None
    return _match_forward(rest, tokens, start + 1)


def parse_template(rule_id: str, text: str, line: int | None = None) -> RuleTemplate:
    """Compile a template string, validating the atom grammar."""
    atoms: list[_Atom] = []
    mention_index: int | None = None
    parts = text.split()
    if not parts:
        raise RuleFileError(f"template {rule_id!r} is empty", line=line)
    for part in parts:
        if part == "{m}":
            if mention_index is not None:
                raise RuleFileError(
                    f"template {rule_id!r} has more than one {{m}}", line=line)
            mention_index = len(atoms)
            atoms.append(_MENTION)
        elif part.startswith(".."):
            digits = part[2:]
            if not digits.isdigit():
                raise RuleFileError(
                    f"template {rule_id!r}: bad gap atom {part!r}", line=line)
            atoms.append(_Gap(int(digits)))
        else:
            choices = tuple(choice for choice in part.lower().split("|"))
            if any(not choice for choice in choices):
                raise RuleFileError(
                    f"template {rule_id!r}: empty alternation branch in {part!r}",
                    line=line)
            atoms.append(_Literal(choices))
    if mention_index is None:
        raise RuleFileError(
            f"template {rule_id!r} is missing the {{m}} placeholder", line=line)
    if isinstance(atoms[0], _Gap) or isinstance(atoms[-1], _Gap):
        raise RuleFileError(
            f"template {rule_id!r} may not begin or end with a gap", line=line)
    return RuleTemplate(
        rule_id=rule_id,
        pre=tuple(atoms[:mention_index]),
        post=tuple(atoms[mention_index + 1:]),
        source=text,
    )


@dataclass
class RuleSet:
    """Parsed rules: keywords, patterns, and the change-verb subset."""

    keywords: list[KeywordEntry]
    negation_patterns: list[RuleTemplate]
    prior_patterns: list[RuleTemplate]
    change_verbs: frozenset[str]
    version: str = "0"

    def validate(self) -> None:
        surfaces = set()
        for entry in self.keywords:
            if not entry.surface or entry.surface != entry.surface.lower():
                raise RuleFileError(
                    f"keyword {entry.surface!r} must be non-empty lowercase")
            if any(ch.isspace() for ch in entry.surface):
                raise RuleFileError(
                    f"keyword {entry.surface!r} must be a single token")
            if entry.surface in surfaces:
                raise RuleFileError(f"duplicate keyword {entry.surface!r}")
            surfaces.add(entry.surface)
        missing = self.change_verbs - surfaces
        if missing:
            raise RuleFileError(
                "change verbs not in keyword list: "
                + ", ".join(sorted(missing)))
        ids = set()
        for template in self.negation_patterns + self.prior_patterns:
            if template.rule_id in ids:
                raise RuleFileError(f"duplicate rule id {template.rule_id!r}")
            ids.add(template.rule_id)


def load_rules(path: str | Path) -> RuleSet:
    """Parse a rules file, raising :class:`RuleFileError` with line numbers."""
    path = Path(path)
    return _parse_rules(path.read_text(encoding="utf-8"))


def _parse_rules(content: str) -> RuleSet:
    keywords: list[KeywordEntry] = []
    negations: list[RuleTemplate] = []
    priors: list[RuleTemplate] = []
    change_verbs: list[str] = []
    version = "0"
    section: str | None = None

    for line_no, raw_line in enumerate(content.splitlines(), start=1):
        line = raw_line.split("#", 1)[0].strip()
        comment = raw_line.split("#", 1)[1].strip() if "#" in raw_line else ""
        if comment.startswith("version:"):
            version = comment.split(":", 1)[1].strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            name = line[1:-1].strip().lower()
            if name not in _SECTIONS:
                raise RuleFileError(f"unknown section [{name}]", line=line_no)
            section = name
            continue
        if section is None:
            raise RuleFileError("content before any section header", line=line_no)
        if section == "keywords":
            keywords.append(_parse_keyword_line(line, line_no))
        elif section in ("negations", "priors"):
            template = _parse_pattern_line(line, line_no)
            (negations if section == "negations" else priors).append(template)
        else:
            if any(ch.isspace() for ch in line):
                raise RuleFileError(
                    f"change verb {line!r} must be a single keyword surface",
                    line=line_no)
            change_verbs.append(line.lower())

    ruleset = RuleSet(
        keywords=keywords,
        negation_patterns=negations,
        prior_patterns=priors,
        change_verbs=frozenset(change_verbs),
        version=version,
    )
    ruleset.validate()
    return ruleset


def _parse_keyword_line(line: str, line_no: int) -> KeywordEntry:
    parts = line.split()
    if len(parts) == 1:
        return KeywordEntry(surface=parts[0].lower())
    if len(parts) == 2 and parts[1].lower() == "stem":
        return KeywordEntry(surface=parts[0].lower(), stem=True)
    raise RuleFileError(
        f"bad keyword line {line!r} (expected 'surface' or 'surface stem')",
        line=line_no)


def _parse_pattern_line(line: str, line_no: int) -> RuleTemplate:
    if ":" not in line:
        raise RuleFileError(
            f"bad pattern line {line!r} (expected 'rule-id: template')",
            line=line_no)
    rule_id, _, template_text = line.partition(":")
    rule_id = rule_id.strip()
    if not rule_id:
        raise RuleFileError("pattern line has an empty rule id", line=line_no)
    return parse_template(rule_id, template_text.strip(), line=line_no)


def default_rules() -> RuleSet:
    """Load the rule set bundled with the package."""
    content = (resources.files("radpriors") / "data" /
               DEFAULT_RULES_RESOURCE).read_text(encoding="utf-8")
    return _parse_rules(content)
