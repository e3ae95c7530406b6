"""Deterministic synthetic corpus with a planted protective exposure effect.

Builds everything the CLI pipeline consumes: raw documents for the filter
step, predicted/reference timeline pairs for evaluation and sweeps, and a
study-plus-pool corpus with metadata for cohort construction and survival
modeling. The respiratory outcome hazard for exposed cases is ``hr`` times
the comparison hazard, so a correct pipeline recovers a protective effect.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from ttskit.timeline import Timeline, TimelineEvent, dump_corpus_jsonl, serialize_timeline

HOURS_PER_MONTH = 730.5
FOLLOW_UP_MONTHS = 24.0

FILLER_EVENTS = (
    "hypertension",
    "obesity",
    "metformin started",
    "fatigue",
    "blurred vision",
    "polyuria",
    "weight loss",
    "hba1c measured",
    "lisinopril started",
    "headache",
    "dizziness",
    "nausea",
    "vomiting",
    "abdominal discomfort",
    "follow-up visit",
)

OUTCOME_EVENTS = ("pneumonia", "acute respiratory failure", "progressive dyspnea")

PARAPHRASE = {
    "hypertension": "elevated blood pressure",
    "obesity": "obese habitus",
    "fatigue": "tiredness reported",
    "headache": "cephalgia noted",
    "nausea": "feeling queasy",
}


def _filler(rng) -> str:
    return str(rng.choice(FILLER_EVENTS))


def _study_timeline(rng, case_id, exposure_time, outcome_time, baseline_outcome=False):
    """One case: admission anchor, optional exposure, planted outcome or censoring."""
    events = [TimelineEvent("admitted to the hospital", 0.0)]
    events.append(TimelineEvent("type 2 diabetes mellitus", float(-rng.integers(720, 26280))))
    for _ in range(int(rng.integers(2, 5))):
        events.append(TimelineEvent(_filler(rng), float(-rng.integers(0, 8766))))
    if baseline_outcome:
        events.append(
            TimelineEvent("chronic dyspnea on exertion", float(-rng.integers(1000, 8000)))
        )
    if exposure_time is not None:
        events.append(TimelineEvent("semaglutide started", float(exposure_time)))
    follow_up_hours = FOLLOW_UP_MONTHS * HOURS_PER_MONTH
    for _ in range(int(rng.integers(3, 7))):
        events.append(TimelineEvent(_filler(rng), float(rng.uniform(24, follow_up_hours))))
    if outcome_time is not None and outcome_time < follow_up_hours:
        events.append(
            TimelineEvent(str(rng.choice(OUTCOME_EVENTS)), float(outcome_time))
        )
    events.append(TimelineEvent("routine clinic review", follow_up_hours))
    events.sort(key=lambda e: e.time_hours)
    return Timeline(case_id=case_id, events=tuple(events))


def _perturbed_prediction(rng, ref: Timeline) -> Timeline:
    """Prediction = reference with text paraphrases, time noise, and clutter."""
    events = []
    for e in ref.events:
        u = rng.random()
        if u < 0.15 and e.text in PARAPHRASE:
            text = PARAPHRASE[e.text]
        elif u < 0.20:
            text = f"possible {e.text}"
        else:
            text = e.text
        t = e.time_hours
        if rng.random() < 0.5:
            t += float(rng.normal(0, 24))
        events.append(TimelineEvent(text, t))
    for _ in range(int(rng.integers(0, 3))):
        events.append(
            TimelineEvent(f"incidental finding {rng.integers(100)}", float(rng.uniform(0, 1000)))
        )
    return Timeline(case_id=ref.case_id, events=tuple(events))


def _document(rng, case_id, age, sex_word, glp: bool, case_report: bool) -> str:
    if case_report:
        intro = f"We present a case report of a {age}-year-old {sex_word}."
    else:
        intro = "This review summarizes pharmacology and trial evidence."
    drug = "The patient was started on semaglutide therapy." if glp else "Management included metformin."
    return (
        f"Journal header for {case_id}\n==== Body\n{intro}\n"
        f"The patient had poorly controlled type 2 diabetes.\n{drug}\n"
        "The clinical course is described below.\n==== Ref\n1. Reference list.\n"
    )


def _metadata_line(rng, case_id, diabetic: bool) -> dict:
    age = float(np.clip(rng.normal(55, 12), 20, 90).round(1))
    sex = str(rng.choice(["Male", "Female", "Female", "Male", "NotSpecified"]))
    diagnoses = ["type 2 diabetes mellitus"] if diabetic else ["gout"]
    if rng.random() < 0.5:
        diagnoses.append("hypertension")
    rec = {"case_id": case_id, "age_years": age, "sex": sex, "diagnoses": diagnoses}
    if rng.random() < 0.05:
        rec["age_years"] = None
    return rec


def make_smoke_corpus(
    root: Path,
    seed: int = 20250811,
    n_treated: int = 40,
    n_control: int = 60,
    n_late: int = 8,
    n_pool: int = 220,
    hr: float = 0.25,
) -> dict:
    """Write the full fixture tree under ``root`` and return its layout."""
    import json

    rng = np.random.default_rng(seed)
    root = Path(root)
    docs = root / "docs"
    pred_dir = root / "pred"
    ref_dir = root / "ref"
    for d in (docs, pred_dir, ref_dir):
        d.mkdir(parents=True, exist_ok=True)

    base_rate = 1.0 / (12.0 * HOURS_PER_MONTH)  # mean onset 12 months for comparison
    study: list[Timeline] = []
    study_meta: list[dict] = []

    def outcome_draw(exposed: bool) -> float:
        rate = base_rate * (hr if exposed else 1.0)
        return float(rng.exponential(1.0 / rate))

    specs = (
        [("t", i, "treated") for i in range(n_treated)]
        + [("c", i, "control") for i in range(n_control)]
        + [("l", i, "late") for i in range(n_late)]
    )
    for prefix, i, kind in specs:
        case_id = f"{prefix}{i:03d}"
        if kind == "treated":
            exposure = float(rng.uniform(0, 72))
            onset = outcome_draw(exposed=True)
        elif kind == "late":
            exposure = float(rng.uniform(100, 2000))
            onset = outcome_draw(exposed=False)
        else:
            exposure = None
            onset = outcome_draw(exposed=False)
        baseline_outcome = kind == "control" and i < 3
        tl = _study_timeline(rng, case_id, exposure, onset, baseline_outcome)
        study.append(tl)
        study_meta.append(_metadata_line(rng, case_id, diabetic=True))

    pool: list[Timeline] = []
    pool_meta: list[dict] = []
    for i in range(n_pool):
        case_id = f"p{i:03d}"
        onset = outcome_draw(exposed=False)
        pool.append(_study_timeline(rng, case_id, None, onset))
        pool_meta.append(_metadata_line(rng, case_id, diabetic=False))

    (root / "cases.jsonl").write_text(dump_corpus_jsonl(study), encoding="utf-8")
    (root / "pool.jsonl").write_text(dump_corpus_jsonl(pool), encoding="utf-8")
    (root / "cases_meta.jsonl").write_text(
        "".join(json.dumps(m, sort_keys=True) + "\n" for m in study_meta), encoding="utf-8"
    )
    (root / "pool_meta.jsonl").write_text(
        "".join(json.dumps(m, sort_keys=True) + "\n" for m in pool_meta), encoding="utf-8"
    )

    for tl in study:
        (ref_dir / f"{tl.case_id}.tsv").write_text(serialize_timeline(tl), encoding="utf-8")
        pred = _perturbed_prediction(rng, tl)
        (pred_dir / f"{pred.case_id}.tsv").write_text(serialize_timeline(pred), encoding="utf-8")

    for tl, meta in zip(study, study_meta):
        glp = tl.case_id.startswith(("t", "l"))
        doc = _document(rng, tl.case_id, int(meta["age_years"] or 50), "man", glp, True)
        (docs / f"{tl.case_id}.txt").write_text(doc, encoding="utf-8")
    for i in range(5):
        (docs / f"review{i}.txt").write_text(
            _document(rng, f"review{i}", 0, "", False, False), encoding="utf-8"
        )

    return {
        "docs": docs,
        "pred": pred_dir,
        "ref": ref_dir,
        "cases": root / "cases.jsonl",
        "cases_meta": root / "cases_meta.jsonl",
        "pool": root / "pool.jsonl",
        "pool_meta": root / "pool_meta.jsonl",
        "n_study": len(study),
    }
