"""Toolkit for evaluating clinical textual time series against reference
timelines and running time-to-onset survival analyses on exposure-defined
cohorts."""

from ._kernels import BACKEND as kernel_backend
from .alignment import Alignment, MatchedPair, align, event_match_rate
from .casefilter import (
    Lexicon,
    default_lexicon,
    detect_case_report,
    extract_body,
    has_diabetes,
    load_lexicon,
    match_lexicon,
)
from .cohort import (
    BaselinePolicy,
    CaseRecord,
    ExposureClass,
    SurvivalRecord,
    ascertain_outcome,
    build_cohort,
    classify_exposure,
    to_survival_records,
)
from .metrics import (
    DiscrepancySet,
    SweepRow,
    agreement,
    aultc,
    concordance,
    discrepancies,
    threshold_sweep,
)
from .similarity import (
    EmbeddingProvider,
    EmbeddingStore,
    LexicalProvider,
    cosine_distance,
    event_distance,
    load_embeddings,
    provider_from_spec,
)
from .survival import (
    CoxModel,
    HazardReport,
    StepFunction,
    adjusted_survival,
    bootstrap_bands,
    cox_fit,
    hazard_report,
    kaplan_meier,
)
from .timeline import (
    CaseMetadata,
    CorpusStats,
    DayConvention,
    Timeline,
    TimelineEvent,
    corpus_stats,
    load_corpus_jsonl,
    normalize_time_expression,
    parse_timeline,
    serialize_timeline,
)

__version__ = "0.1.0"
