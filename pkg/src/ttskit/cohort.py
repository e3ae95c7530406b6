"""Exposure-defined cohort construction and keyword outcome ascertainment.

Cases become survival records: time runs from the case reference point,
outcome onset is the earliest timeline event matching an outcome lexicon,
and cases without a match are right-censored at their last timestamp.
"""

from __future__ import annotations

import enum
import io
import logging
from dataclasses import dataclass
from typing import IO, Mapping, Sequence

import numpy as np

from .casefilter import Lexicon, match_lexicon
from .errors import CohortError
from .timeline import CaseMetadata, Timeline

logger = logging.getLogger(__name__)

HOURS_PER_MONTH = 730.5

SEX_ONEHOT_CATEGORIES = ("Female", "Other", "NotSpecified")  # Male is the reference


class ExposureClass(enum.Enum):
    TREATED = "treated"
    LATE_INITIATOR = "late_initiator"
    UNEXPOSED = "unexposed"


class BaselinePolicy(enum.Enum):
    """What to do with outcomes already documented at or before the reference point."""

    CLAMP = "clamp"  # keep the case, clamp onset to t=0, flag as baseline-prevalent
    EXCLUDE = "exclude"  # drop the case from the analysis (reported)


@dataclass(frozen=True)
class CaseRecord:
    metadata: CaseMetadata
    timeline: Timeline

    def __post_init__(self):
        if self.metadata.case_id != self.timeline.case_id:
            raise CohortError(
                f"case_id mismatch: metadata {self.metadata.case_id!r} "
                f"vs timeline {self.timeline.case_id!r}"
            )

    @property
    def case_id(self) -> str:
        return self.metadata.case_id


@dataclass(frozen=True)
class OutcomeAscertainment:
    event: bool
    time_hours: float
    baseline_prevalent: bool


@dataclass(frozen=True)
class SurvivalRecord:
    """One case flattened for survival modeling. Sex one-hots use Male as reference."""

    case_id: str
    duration_months: float
    event: bool
    exposed: bool
    age_years: float
    sex: str
    baseline_prevalent: bool
    age_imputed: bool = False

    def __post_init__(self):
        if self.duration_months < 0:
            raise CohortError(f"negative duration for case {self.case_id!r}")
        if self.sex not in ("Male",) + SEX_ONEHOT_CATEGORIES:
            raise CohortError(f"unknown sex category {self.sex!r}")

    @property
    def sex_onehot(self) -> tuple[int, int, int]:
        return tuple(int(self.sex == c) for c in SEX_ONEHOT_CATEGORIES)


@dataclass(frozen=True)
class CohortSelection:
    """Output of cohort assembly, with enough context to write a manifest."""

    treated: frozenset[str]
    comparison: frozenset[str]
    exposure_class: Mapping[str, ExposureClass]
    sampled_from_pool: tuple[str, ...]
    pool_exhausted: bool
    target_comparison_size: int
    seed: int


def classify_exposure(
    case: CaseRecord, glp: Lexicon, window_hours: float = 72.0
) -> ExposureClass:
    """Classify by the earliest timeline event matching the exposure lexicon."""
    if window_hours <= 0:
        raise CohortError(f"window_hours must be > 0, got {window_hours}")
    match_times = [
        e.time_hours for e in case.timeline.events if match_lexicon(e.text, glp).is_candidate
    ]
    if not match_times:
        return ExposureClass.UNEXPOSED
    first = min(match_times)
    return ExposureClass.TREATED if first <= window_hours else ExposureClass.LATE_INITIATOR


def _is_diabetic(case: CaseRecord, diabetes: Lexicon) -> bool:
    return any(match_lexicon(d, diabetes).is_candidate for d in case.metadata.diagnoses)


def build_cohort(
    cases: Sequence[CaseRecord],
    glp: Lexicon,
    diabetes: Lexicon,
    pool: Sequence[CaseRecord],
    ratio: float = 5.0,
    seed: int = 0,
    window_hours: float = 72.0,
) -> CohortSelection:
    """Assemble treatment and comparison cohorts.

    Treated: diabetic cases with exposure inside the baseline window.
    Comparison: diabetic unexposed cases plus late initiators (counted as
    unexposed at baseline), topped up by seeded uniform sampling without
    replacement from ``pool`` until it reaches round(ratio * n_treated) or
    the pool runs out.
    """
    if ratio <= 0:
        raise CohortError(f"ratio must be > 0, got {ratio}")
    exposure: dict[str, ExposureClass] = {}
    treated: set[str] = set()
    comparison: set[str] = set()
    for case in cases:
        cls = classify_exposure(case, glp, window_hours)
        exposure[case.case_id] = cls
        diabetic = _is_diabetic(case, diabetes)
        if cls is ExposureClass.TREATED and diabetic:
            treated.add(case.case_id)
        elif cls is ExposureClass.LATE_INITIATOR:
            comparison.add(case.case_id)
        elif cls is ExposureClass.UNEXPOSED and diabetic:
            comparison.add(case.case_id)
    if not treated:
        raise CohortError("no treated cases")

    target = int(round(ratio * len(treated)))
    eligible = sorted(
        c.case_id for c in pool if c.case_id not in treated and c.case_id not in comparison
    )
    sampled: tuple[str, ...] = ()
    exhausted = False
    need = target - len(comparison)
    if need > 0:
        if need >= len(eligible):
            sampled = tuple(eligible)
            exhausted = need > len(eligible)
            if exhausted:
                logger.warning(
                    "comparison pool exhausted: wanted %d top-up cases, only %d available",
                    need,
                    len(eligible),
                )
        else:
            rng = np.random.default_rng(seed)
            idx = rng.permutation(len(eligible))[:need]
            sampled = tuple(eligible[i] for i in sorted(idx))
        comparison.update(sampled)
    return CohortSelection(
        treated=frozenset(treated),
        comparison=frozenset(comparison),
        exposure_class=exposure,
        sampled_from_pool=sampled,
        pool_exhausted=exhausted,
        target_comparison_size=target,
        seed=seed,
    )


def ascertain_outcome(
    case: CaseRecord,
    outcome: Lexicon,
    policy: BaselinePolicy = BaselinePolicy.CLAMP,
) -> OutcomeAscertainment | None:
    """Find the earliest outcome-matching event; censor at the last timestamp
    when none matches.

    Outcomes first documented at t <= 0 are baseline-prevalent: under CLAMP
    the onset is moved to t=0 and the record flagged; under EXCLUDE the case
    is dropped (returns ``None``).
    """
    if len(case.timeline) == 0:
        raise CohortError(f"no follow-up: case {case.case_id!r} has an empty timeline")
    match_times = [
        e.time_hours
        for e in case.timeline.events
        if match_lexicon(e.text, outcome).is_candidate
    ]
    if not match_times:
        end = max(case.timeline.times)
        if end < 0:
            raise CohortError(
                f"no follow-up: case {case.case_id!r} ends before the reference point"
            )
        return OutcomeAscertainment(event=False, time_hours=end, baseline_prevalent=False)
    first = min(match_times)
    if first <= 0:
        if policy is BaselinePolicy.EXCLUDE:
            return None
        return OutcomeAscertainment(event=True, time_hours=0.0, baseline_prevalent=True)
    return OutcomeAscertainment(event=True, time_hours=first, baseline_prevalent=False)


def to_survival_records(
    treated: Sequence[CaseRecord],
    comparison: Sequence[CaseRecord],
    outcomes: Mapping[str, OutcomeAscertainment | None],
    policy: BaselinePolicy = BaselinePolicy.CLAMP,
) -> list[SurvivalRecord]:
    """Flatten the cohorts into survival records, sorted by case_id.

    ``outcomes`` maps case_id to its ascertainment (``None`` entries were
    excluded under the EXCLUDE policy and are dropped here). Missing ages are
    imputed with the cohort mean and flagged; missing sex becomes the
    NotSpecified indicator.
    """
    known_ages = [
        c.metadata.age_years
        for c in list(treated) + list(comparison)
        if c.metadata.age_years is not None
    ]
    mean_age = sum(known_ages) / len(known_ages) if known_ages else None

    records: list[SurvivalRecord] = []
    for group, exposed in ((treated, True), (comparison, False)):
        for case in group:
            if case.case_id not in outcomes:
                raise CohortError(f"no outcome ascertainment for case {case.case_id!r}")
            outcome = outcomes[case.case_id]
            if outcome is None:
                continue  # excluded baseline-prevalent case
            age = case.metadata.age_years
            imputed = age is None
            if imputed:
                if mean_age is None:
                    raise CohortError("cannot impute age: no ages present in the cohort")
                age = mean_age
            records.append(
                SurvivalRecord(
                    case_id=case.case_id,
                    duration_months=outcome.time_hours / HOURS_PER_MONTH,
                    event=outcome.event,
                    exposed=exposed,
                    age_years=age,
                    sex=case.metadata.sex_class,
                    baseline_prevalent=outcome.baseline_prevalent,
                    age_imputed=imputed,
                )
            )
    records.sort(key=lambda r: r.case_id)
    return records


# ---------------------------------------------------------------------------
# Record (de)serialization

RECORD_CSV_HEADER = "case_id,duration_months,event,exposed,age,sex,baseline_prevalent"


def records_to_csv(records: Sequence[SurvivalRecord]) -> str:
    lines = [RECORD_CSV_HEADER]
    for r in records:
        lines.append(
            ",".join(
                [
                    r.case_id,
                    format(r.duration_months, ".12g"),
                    str(int(r.event)),
                    str(int(r.exposed)),
                    format(r.age_years, ".12g"),
                    r.sex,
                    str(int(r.baseline_prevalent)),
                ]
            )
        )
    return "\n".join(lines) + "\n"


def records_from_csv(stream: str | IO[str]) -> list[SurvivalRecord]:
    if isinstance(stream, str):
        stream = io.StringIO(stream)
    records = []
    for line_no, raw in enumerate(stream, start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if line == RECORD_CSV_HEADER:
            continue
        parts = line.split(",")
        if len(parts) != 7:
            raise CohortError(f"line {line_no}: expected 7 fields, got {len(parts)}")
        case_id, dur, event, exposed, age, sex, prevalent = parts
        records.append(
            SurvivalRecord(
                case_id=case_id,
                duration_months=float(dur),
                event=bool(int(event)),
                exposed=bool(int(exposed)),
                age_years=float(age),
                sex=sex,
                baseline_prevalent=bool(int(prevalent)),
            )
        )
    return records


def cohort_manifest_dict(
    selection: CohortSelection,
    glp: Lexicon,
    diabetes: Lexicon,
    outcome: Lexicon,
    n_excluded_baseline: int,
    policy: BaselinePolicy,
) -> dict:
    return {
        "treated": sorted(selection.treated),
        "comparison": sorted(selection.comparison),
        "exposure_class": {
            cid: cls.value for cid, cls in sorted(selection.exposure_class.items())
        },
        "sampled_from_pool": list(selection.sampled_from_pool),
        "pool_exhausted": selection.pool_exhausted,
        "target_comparison_size": selection.target_comparison_size,
        "seed": selection.seed,
        "baseline_policy": policy.value,
        "n_excluded_baseline_prevalent": n_excluded_baseline,
        "lexicon_digests": {
            "glp1ra": glp.digest(),
            "diabetes": diabetes.digest(),
            "outcome": outcome.digest(),
        },
    }
