"""Corpus filtering: body-text extraction, case-report detection, lexicon matching."""

from __future__ import annotations

import hashlib
import json
import re
from dataclasses import dataclass
from importlib import resources
from typing import IO, Sequence

from .errors import LexiconError, ToolkitError

BODY_START = "==== Body"
BODY_END = "==== Ref"

# Both patterns must hit for a document to count as a case-report candidate.
CASE_REPORT_PATTERNS = ("case (report|present)", "year-? ?old")
_CASE_REPORT_RES = tuple(re.compile(p, re.IGNORECASE) for p in CASE_REPORT_PATTERNS)

DEFAULT_LEXICON_KEYS = (
    "glp1ra",
    "diabetes",
    "outcome_kidney",
    "outcome_cardiovascular",
    "outcome_respiratory",
)


@dataclass(frozen=True)
class Lexicon:
    """A named set of case-insensitive regex patterns plus literal substring terms."""

    name: str
    regex_patterns: tuple[str, ...] = ()
    literal_terms: tuple[str, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "regex_patterns", tuple(self.regex_patterns))
        terms = tuple(t.lower() for t in self.literal_terms)
        object.__setattr__(self, "literal_terms", terms)
        compiled = []
        for p in self.regex_patterns:
            try:
                compiled.append(re.compile(p, re.IGNORECASE))
            except re.error as exc:
                raise LexiconError(f"lexicon {self.name!r}: bad pattern {p!r}: {exc}") from None
        object.__setattr__(self, "_compiled", tuple(compiled))
        if any(not t for t in terms):
            raise LexiconError(f"lexicon {self.name!r}: empty literal term")
        if len(set(self.regex_patterns)) != len(self.regex_patterns):
            raise LexiconError(f"lexicon {self.name!r}: duplicate regex pattern")
        if len(set(terms)) != len(terms):
            raise LexiconError(f"lexicon {self.name!r}: duplicate literal term")

    @property
    def compiled(self) -> tuple[re.Pattern, ...]:
        return self._compiled  # type: ignore[attr-defined]

    def digest(self) -> str:
        payload = json.dumps(
            {
                "name": self.name,
                "regex_patterns": list(self.regex_patterns),
                "literal_terms": list(self.literal_terms),
            },
            sort_keys=True,
        )
        return hashlib.sha256(payload.encode("utf-8")).hexdigest()


@dataclass(frozen=True)
class FilterResult:
    is_candidate: bool
    matched_terms: tuple[tuple[str, int], ...]


def extract_body(document: str) -> str:
    """Return the text strictly between the first body marker and the first
    subsequent reference marker, markers excluded."""
    start = document.find(BODY_START)
    if start < 0:
        raise ToolkitError("no body section")
    body_from = start + len(BODY_START)
    end = document.find(BODY_END, body_from)
    if end < 0:
        raise ToolkitError("no body section")
    return document[body_from:end]


def detect_case_report(body: str) -> bool:
    """True iff both case-report patterns match anywhere (case-insensitive)."""
    return all(p.search(body) for p in _CASE_REPORT_RES)


def match_lexicon(body: str, lex: Lexicon) -> FilterResult:
    """Scan for every lexicon hit. Regex patterns run as given (case-insensitive);
    literal terms are substring-matched on a lowercase copy. Overlapping hits
    are all reported, with character offsets into ``body``."""
    hits: list[tuple[str, int]] = []
    for pattern in lex.compiled:
        for m in pattern.finditer(body):
            hits.append((m.group(0).lower(), m.start()))
    low = body.lower()
    for term in lex.literal_terms:
        start = 0
        while True:
            pos = low.find(term, start)
            if pos < 0:
                break
            hits.append((term, pos))
            start = pos + 1
    hits.sort(key=lambda h: (h[1], h[0]))
    return FilterResult(is_candidate=bool(hits), matched_terms=tuple(hits))


def has_diabetes(diagnoses: Sequence[str], lexicon: Lexicon | None = None) -> bool:
    """True iff any diagnosis string matches the diabetes keyword lexicon."""
    lex = lexicon if lexicon is not None else default_lexicon("diabetes")
    return any(match_lexicon(d, lex).is_candidate for d in diagnoses)


def lexicon_from_dict(record: dict) -> Lexicon:
    try:
        return Lexicon(
            name=record["name"],
            regex_patterns=tuple(record.get("regex_patterns", ())),
            literal_terms=tuple(record.get("literal_terms", ())),
        )
    except KeyError as exc:
        raise LexiconError(f"lexicon file missing key {exc}") from None


def load_lexicon(source: str | IO[str]) -> Lexicon:
    """Load a lexicon from a JSON file path or open stream."""
    if isinstance(source, str):
        with open(source, "r", encoding="utf-8") as fh:
            record = json.load(fh)
    else:
        record = json.load(source)
    return lexicon_from_dict(record)


def default_lexicon(key: str) -> Lexicon:
    """One of the lexicons shipped with the package (see DEFAULT_LEXICON_KEYS).

    The outcome lexicons are editable reconstructions meant as starting
    points; review them against your corpus before analysis.
    """
    if key not in DEFAULT_LEXICON_KEYS:
        raise LexiconError(f"unknown default lexicon {key!r}; known: {DEFAULT_LEXICON_KEYS}")
    data = resources.files("ttskit.data").joinpath(f"{key}.json").read_text("utf-8")
    return lexicon_from_dict(json.loads(data))
