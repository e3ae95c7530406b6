"""Timeline data model, canonical file formats, rule-based time normalization,
and corpus-level descriptive statistics.

A timeline is an ordered sequence of (event text, time-in-hours) records for
one case, anchored at a case reference point at t=0; events before the
reference point carry negative times.
"""

from __future__ import annotations

import enum
import io
import json
import math
import re
import statistics
from collections import Counter
from dataclasses import dataclass
from typing import IO, Iterable, Mapping, Sequence

import numpy as np

from .errors import CorpusError, TimelineParseError

TSV_HEADER = "time_hours\ttext"

STAT_PERCENTILES = (0, 25, 50, 75, 99, 100)


@dataclass(frozen=True)
class TimelineEvent:
    """One clinical finding with its time in hours relative to the reference point."""

    text: str
    time_hours: float

    def __post_init__(self):
        stripped = self.text.strip()
        if not stripped:
            raise ValueError("event text is empty")
        # Tabs and line breaks would corrupt the TSV record format.
        if any(c in stripped for c in "\t\n\r"):
            raise ValueError(f"event text contains tab or line break: {self.text!r}")
        object.__setattr__(self, "text", stripped)
        t = float(self.time_hours)
        if not math.isfinite(t):
            raise ValueError(f"event time must be finite, got {self.time_hours!r}")
        object.__setattr__(self, "time_hours", t)


@dataclass(frozen=True)
class Timeline:
    """All events of one case, in input order. Tied times are permitted."""

    case_id: str
    events: tuple[TimelineEvent, ...]

    def __post_init__(self):
        if not self.case_id:
            raise ValueError("case_id is empty")
        object.__setattr__(self, "events", tuple(self.events))

    def __len__(self) -> int:
        return len(self.events)

    @property
    def times(self) -> tuple[float, ...]:
        return tuple(e.time_hours for e in self.events)

    @property
    def texts(self) -> tuple[str, ...]:
        return tuple(e.text for e in self.events)


@dataclass(frozen=True)
class CaseMetadata:
    """Demographics and diagnosis list for one case, ingested from upstream."""

    case_id: str
    age_years: float | None = None
    sex: str = "NotSpecified"
    diagnoses: tuple[str, ...] = ()

    def __post_init__(self):
        if not self.case_id:
            raise ValueError("case_id is empty")
        if self.age_years is not None:
            age = float(self.age_years)
            if not (0.0 <= age <= 130.0):
                raise ValueError(f"age_years out of range [0, 130]: {age}")
            object.__setattr__(self, "age_years", age)
        sex = (self.sex or "").strip() or "NotSpecified"
        object.__setattr__(self, "sex", sex)
        object.__setattr__(self, "diagnoses", tuple(self.diagnoses))

    @property
    def sex_class(self) -> str:
        """Closed category: Male, Female, NotSpecified, or Other (free text)."""
        if self.sex in ("Male", "Female", "NotSpecified"):
            return self.sex
        return "Other"


# ---------------------------------------------------------------------------
# Canonical file formats


def _coerce_stream(stream: str | IO[str]) -> IO[str]:
    if isinstance(stream, str):
        return io.StringIO(stream)
    return stream


def parse_timeline(stream: str | IO[str], case_id: str = "case") -> Timeline:
    """Parse the canonical TSV format: ``time_hours<TAB>event text`` records.

    A leading header line equal to ``time_hours\\ttext`` is skipped. The
    Unicode minus sign is normalized before number parsing. Malformed lines
    raise :class:`TimelineParseError` carrying the 1-based line number.
    """
    events: list[TimelineEvent] = []
    saw_content = False
    for line_no, raw in enumerate(_coerce_stream(stream), start=1):
        line = raw.rstrip("\n").rstrip("\r")
        if not line.strip():
            continue
        if not saw_content and line == TSV_HEADER:
            saw_content = True
            continue
        saw_content = True
        if "\t" not in line:
            raise TimelineParseError("missing tab separator", line_no)
        time_part, text_part = line.split("\t", 1)
        time_part = time_part.strip().replace("−", "-")
        try:
            t = float(time_part)
        except ValueError:
            raise TimelineParseError(f"unparsable time {time_part!r}", line_no) from None
        try:
            events.append(TimelineEvent(text=text_part, time_hours=t))
        except ValueError as exc:
            raise TimelineParseError(str(exc), line_no) from None
    return Timeline(case_id=case_id, events=tuple(events))


def serialize_timeline(timeline: Timeline) -> str:
    """Serialize to the canonical TSV format (round-trips through parse_timeline)."""
    lines = [TSV_HEADER]
    for e in timeline.events:
        lines.append(f"{e.time_hours!r}\t{e.text}")
    return "\n".join(lines) + "\n"


def timeline_to_json_dict(timeline: Timeline) -> dict:
    return {
        "case_id": timeline.case_id,
        "events": [{"t": e.time_hours, "e": e.text} for e in timeline.events],
    }


def timeline_from_json_dict(record: Mapping, line_number: int | None = None) -> Timeline:
    try:
        case_id = record["case_id"]
        events = tuple(
            TimelineEvent(text=ev["e"], time_hours=ev["t"]) for ev in record.get("events", ())
        )
        return Timeline(case_id=case_id, events=events)
    except (KeyError, TypeError, ValueError) as exc:
        raise TimelineParseError(f"bad timeline record: {exc}", line_number) from None


def load_corpus_jsonl(stream: str | IO[str]) -> list[Timeline]:
    """Load a corpus file of JSON-lines records ``{"case_id", "events": [{"t", "e"}]}``.

    Duplicate case ids are rejected at this level.
    """
    timelines: list[Timeline] = []
    seen: set[str] = set()
    for line_no, raw in enumerate(_coerce_stream(stream), start=1):
        line = raw.strip()
        if not line:
            continue
        try:
            record = json.loads(line)
        except json.JSONDecodeError as exc:
            raise TimelineParseError(f"invalid JSON: {exc}", line_no) from None
        tl = timeline_from_json_dict(record, line_no)
        if tl.case_id in seen:
            raise CorpusError(f"duplicate case_id {tl.case_id!r} (line {line_no})")
        seen.add(tl.case_id)
        timelines.append(tl)
    return timelines


def dump_corpus_jsonl(timelines: Iterable[Timeline]) -> str:
    return "".join(
        json.dumps(timeline_to_json_dict(t), sort_keys=True) + "\n" for t in timelines
    )


# ---------------------------------------------------------------------------
# Rule-based temporal-expression normalization


class DayConvention(enum.Enum):
    """Anchoring of "day n" phrases: whether day 1 or day 0 is the reference."""

    ADMISSION_DAY_ONE = "day1"  # "day n" -> (n - 1) * 24, so day 1 = t=0
    ADMISSION_DAY_ZERO = "day0"  # "day n" -> n * 24


UNIT_HOURS = {
    "hour": 1.0,
    "day": 24.0,
    "week": 168.0,
    "month": 730.5,
    "year": 8766.0,
}

_UNIT_ALIASES = {
    "hr": "hour",
    "hrs": "hour",
    "hours": "hour",
    "days": "day",
    "wk": "week",
    "wks": "week",
    "weeks": "week",
    "mo": "month",
    "mos": "month",
    "months": "month",
    "yr": "year",
    "yrs": "year",
    "years": "year",
}

_WORD_NUMBERS = {
    "a": 1, "an": 1, "one": 1, "two": 2, "three": 3, "four": 4, "five": 5,
    "six": 6, "seven": 7, "eight": 8, "nine": 9, "ten": 10, "eleven": 11,
    "twelve": 12, "thirteen": 13, "fourteen": 14, "fifteen": 15, "sixteen": 16,
    "seventeen": 17, "eighteen": 18, "nineteen": 19, "twenty": 20,
    "thirty": 30, "forty": 40, "fifty": 50, "sixty": 60, "seventy": 70,
    "eighty": 80, "ninety": 90,
}

_UNIT_PATTERN = r"hours?|hrs?|days?|weeks?|wks?|months?|mos?|years?|yrs?"

_HISTORY_RE = re.compile(
    rf"^(?:an?\s+)?(?P<num>.+?)[\s-](?P<unit>{_UNIT_PATTERN})\s+history(?:\s+of\b.*)?$"
)
_AGO_RE = re.compile(
    rf"^(?:about\s+|approximately\s+|around\s+)?(?P<num>.+?)[\s-](?P<unit>{_UNIT_PATTERN})"
    r"\s+(?:ago|prior|before)(?:\s+.*)?$"
)
_DAY_N_RE = re.compile(r"^(?:on\s+|upon\s+)?(?:hospital\s+)?day\s+(?P<num>\S+)$")
_REFERENCE_RE = re.compile(r"^(?:(?:on|at|upon)\s+)?(?:admission|presentation)$")


def _parse_count(token: str) -> float | None:
    token = token.strip()
    if not token:
        return None
    try:
        value = float(token)
        return value if math.isfinite(value) and value >= 0 else None
    except ValueError:
        pass
    words = re.split(r"[\s-]+", token.lower())
    total = 0
    for w in words:
        if w not in _WORD_NUMBERS:
            return None
        total += _WORD_NUMBERS[w]
    return float(total) if words else None


def _unit_hours(unit_token: str) -> float:
    unit = unit_token.lower()
    unit = _UNIT_ALIASES.get(unit, unit)
    return UNIT_HOURS[unit]


def normalize_time_expression(
    expr: str, day_convention: DayConvention = DayConvention.ADMISSION_DAY_ONE
) -> float | None:
    """Map a single temporal phrase to an hour offset, or ``None`` if uncovered.

    Covered grammar: "<N> <unit> history of ...", "<N> <unit> ago/prior/before"
    (negative offsets, anchored at the interval start), "hospital day <n>" /
    "day <n>" (24-hour increments under ``day_convention``), and
    "on admission/presentation" (zero). Anything else yields ``None`` so the
    caller can fall back to upstream-supplied timestamps; this function never
    guesses.
    """
    phrase = expr.strip().lower().strip(".,;:!?")
    if not phrase:
        return None

    if _REFERENCE_RE.match(phrase):
        return 0.0

    m = _DAY_N_RE.match(phrase)
    if m:
        n = _parse_count(m.group("num"))
        if n is None:
            return None
        if day_convention is DayConvention.ADMISSION_DAY_ONE:
            if n < 1:
                return None
            return (n - 1) * 24.0
        return n * 24.0

    for pattern in (_HISTORY_RE, _AGO_RE):
        m = pattern.match(phrase)
        if m:
            n = _parse_count(m.group("num"))
            if n is None:
                return None
            return -n * _unit_hours(m.group("unit"))

    return None


# ---------------------------------------------------------------------------
# Corpus statistics


@dataclass(frozen=True)
class CorpusStats:
    """Descriptive temporal statistics over a corpus of timelines."""

    n_cases: int
    length_quantiles: Mapping[int, float]
    duration_days_quantiles: Mapping[int, float]
    shared_timestamp_fraction: float
    timestamp_uniqueness_ratio_median: float
    negative_time_fraction: float

    def to_flat_dict(self) -> dict[str, float]:
        out: dict[str, float] = {"n_cases": self.n_cases}
        for p, v in self.length_quantiles.items():
            out[f"length_p{p}"] = v
        for p, v in self.duration_days_quantiles.items():
            out[f"duration_days_p{p}"] = v
        out["shared_timestamp_fraction"] = self.shared_timestamp_fraction
        out["timestamp_uniqueness_ratio_median"] = self.timestamp_uniqueness_ratio_median
        out["negative_time_fraction"] = self.negative_time_fraction
        return out


def corpus_stats(corpus: Sequence[Timeline]) -> CorpusStats:
    """Compute corpus statistics.

    Per case: the fraction of events sharing their timestamp with at least
    one other event, the distinct-timestamp/event ratio, and the day span
    (max - min)/24. Fractions of negative-time events are pooled over all
    events. Cases with no events count toward ``n_cases`` and the length
    distribution but are excluded from the per-case ratios and durations.
    """
    if not corpus:
        raise CorpusError("no cases")
    lengths = [len(t) for t in corpus]
    shared_fracs: list[float] = []
    uniq_ratios: list[float] = []
    durations_days: list[float] = []
    n_events_total = 0
    n_negative = 0
    for tl in corpus:
        times = tl.times
        n_events_total += len(times)
        n_negative += sum(1 for t in times if t < 0)
        if not times:
            continue
        counts = Counter(times)
        shared_fracs.append(sum(1 for t in times if counts[t] > 1) / len(times))
        uniq_ratios.append(len(counts) / len(times))
        durations_days.append((max(times) - min(times)) / 24.0)
    if n_events_total == 0:
        raise CorpusError("no events in corpus")

    def quantile_map(values: Sequence[float]) -> dict[int, float]:
        arr = np.asarray(values, dtype=float)
        return {p: float(np.percentile(arr, p)) for p in STAT_PERCENTILES}

    return CorpusStats(
        n_cases=len(corpus),
        length_quantiles=quantile_map(lengths),
        duration_days_quantiles=quantile_map(durations_days),
        shared_timestamp_fraction=float(statistics.fmean(shared_fracs)),
        timestamp_uniqueness_ratio_median=float(statistics.median(uniq_ratios)),
        negative_time_fraction=n_negative / n_events_total,
    )
