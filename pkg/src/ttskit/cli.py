"""Command-line pipeline: filter -> stats -> evaluate/sweep -> cohort -> survival.

Every data artifact embeds the resolved config digest and seed so reruns can
be verified byte-for-byte (SVG convenience plots excluded).
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import logging
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

from . import casefilter, svgplot
from ._kernels import BACKEND
from .alignment import align, alignment_to_json_dict, event_match_rate
from .casefilter import Lexicon, default_lexicon, load_lexicon
from .cohort import (
    BaselinePolicy,
    CaseRecord,
    ascertain_outcome,
    build_cohort,
    cohort_manifest_dict,
    records_from_csv,
    records_to_csv,
    to_survival_records,
)
from .errors import MetricUndefinedError, ToolkitError
from .metrics import (
    DEFAULT_AULTC_CAP_HOURS,
    aultc,
    concordance,
    discrepancies,
    mean_sweep_rows,
    threshold_sweep,
)
from .similarity import provider_from_spec
from .survival import (
    adjusted_survival,
    bootstrap_bands,
    cox_fit,
    hazard_report,
    kaplan_meier,
    reference_profiles,
)
from .timeline import CaseMetadata, Timeline, corpus_stats, load_corpus_jsonl, parse_timeline

logger = logging.getLogger("ttskit")

OUTCOME_KEYS = ("kidney", "cardiovascular", "respiratory")


@dataclass
class RunConfig:
    provider: str = "lexical"
    threshold: float = 0.1
    sweep_start: float = 0.01
    sweep_stop: float = 0.50
    sweep_step: float = 0.01
    glp_lexicon: str | None = None
    diabetes_lexicon: str | None = None
    outcome_lexicons: dict = field(
        default_factory=lambda: {k: None for k in OUTCOME_KEYS}
    )
    exposure_window_hours: float = 72.0
    control_ratio: float = 5.0
    bootstrap_resamples: int = 500
    seed: int = 0
    aultc_cap_hours: float = DEFAULT_AULTC_CAP_HOURS
    baseline_policy: str = "clamp"
    threads: int = 1

    def sweep_grid(self) -> list[float]:
        n = int(round((self.sweep_stop - self.sweep_start) / self.sweep_step))
        grid = [round(self.sweep_start + i * self.sweep_step, 10) for i in range(n + 1)]
        if not grid or any(b <= a for a, b in zip(grid, grid[1:])):
            raise ToolkitError("invalid sweep grid specification")
        return grid

    def digest(self) -> str:
        # threads is an execution knob, not an analysis parameter: serial and
        # parallel runs must produce byte-identical artifacts.
        payload = {k: v for k, v in asdict(self).items() if k != "threads"}
        return hashlib.sha256(
            json.dumps(payload, sort_keys=True).encode("utf-8")
        ).hexdigest()

    def policy(self) -> BaselinePolicy:
        try:
            return BaselinePolicy(self.baseline_policy.lower())
        except ValueError:
            raise ToolkitError(
                f"baseline_policy must be 'clamp' or 'exclude', got {self.baseline_policy!r}"
            ) from None


def load_config(path: str | None, overrides: Mapping[str, object]) -> RunConfig:
    cfg = RunConfig()
    if path:
        with open(path, "r", encoding="utf-8") as fh:
            data = json.load(fh)
        known = set(asdict(cfg))
        unknown = set(data) - known
        if unknown:
            raise ToolkitError(f"unknown config keys: {sorted(unknown)}")
        for key, value in data.items():
            setattr(cfg, key, value)
    for key, value in overrides.items():
        if value is not None:
            setattr(cfg, key, value)
    return cfg


# ---------------------------------------------------------------------------
# i/o helpers


def _fmt(x: float | None) -> str:
    return "" if x is None else format(x, ".12g")


def _artifact_comment(cfg: RunConfig, with_cap: bool = False) -> str:
    # aultc values are only comparable for a fixed cap, so metric artifacts
    # carry it explicitly next to the digest.
    cap = f" aultc_cap_hours={format(cfg.aultc_cap_hours, '.12g')}" if with_cap else ""
    return f"# config_digest={cfg.digest()} seed={cfg.seed}{cap}\n"


def _write(path: Path, content: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(content, encoding="utf-8")


def _write_json(path: Path, payload: dict, cfg: RunConfig) -> None:
    payload = dict(payload)
    payload["config_digest"] = cfg.digest()
    payload["seed"] = cfg.seed
    _write(path, json.dumps(payload, sort_keys=True, indent=2) + "\n")


def _load_timelines(path: str) -> dict[str, Timeline]:
    """A directory of per-case ``.tsv`` files (case_id = stem) or one ``.jsonl`` corpus."""
    p = Path(path)
    if p.is_dir():
        out: dict[str, Timeline] = {}
        for f in sorted(p.glob("*.tsv")):
            out[f.stem] = parse_timeline(f.read_text(encoding="utf-8"), case_id=f.stem)
        return out
    with open(p, "r", encoding="utf-8") as fh:
        return {t.case_id: t for t in load_corpus_jsonl(fh)}


def _load_metadata(path: str) -> dict[str, CaseMetadata]:
    out: dict[str, CaseMetadata] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line:
                continue
            rec = json.loads(line)
            meta = CaseMetadata(
                case_id=rec["case_id"],
                age_years=rec.get("age_years"),
                sex=rec.get("sex") or "NotSpecified",
                diagnoses=tuple(rec.get("diagnoses", ())),
            )
            if meta.case_id in out:
                raise ToolkitError(f"duplicate case_id {meta.case_id!r} in {path} line {line_no}")
            out[meta.case_id] = meta
    return out


def _case_records(
    timelines: Mapping[str, Timeline], metadata: Mapping[str, CaseMetadata]
) -> list[CaseRecord]:
    records = []
    for cid in sorted(timelines):
        meta = metadata.get(cid, CaseMetadata(case_id=cid))
        records.append(CaseRecord(metadata=meta, timeline=timelines[cid]))
    return records


def _resolve_lexicon(path: str | None, default_key: str) -> Lexicon:
    return load_lexicon(path) if path else default_lexicon(default_key)


def _resolve_outcome_lexicon(cfg: RunConfig, outcome: str) -> Lexicon:
    if outcome in OUTCOME_KEYS:
        configured = cfg.outcome_lexicons.get(outcome)
        return load_lexicon(configured) if configured else default_lexicon(f"outcome_{outcome}")
    return load_lexicon(outcome)


def _map_cases(fn, case_ids: Sequence[str], threads: int) -> dict:
    """Apply ``fn`` per case, optionally threaded; results keyed by case id so
    output order never depends on scheduling."""
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(fn, case_ids))
    else:
        results = [fn(cid) for cid in case_ids]
    return dict(zip(case_ids, results))


# ---------------------------------------------------------------------------
# subcommands


def cmd_filter(args, cfg: RunConfig) -> int:
    corpus = Path(args.corpus_dir)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    glp = _resolve_lexicon(cfg.glp_lexicon, "glp1ra")
    rows = []
    errors = []
    for doc in sorted(f for f in corpus.iterdir() if f.is_file()):
        doc_id = doc.stem
        try:
            text = doc.read_text(encoding="utf-8")
            body = casefilter.extract_body(text)
        except (OSError, UnicodeDecodeError, ToolkitError) as exc:
            errors.append((doc_id, str(exc)))
            rows.append((doc_id, False, ()))
            continue
        is_report = casefilter.detect_case_report(body)
        hits = casefilter.match_lexicon(body, glp)
        terms = tuple(sorted({term for term, _ in hits.matched_terms}))
        rows.append((doc_id, is_report, terms))

    manifest = out_dir / "manifest.csv"
    with manifest.open("w", encoding="utf-8", newline="") as fh:
        fh.write(_artifact_comment(cfg))
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["doc_id", "is_case_report", "glp_terms"])
        for doc_id, is_report, terms in rows:
            writer.writerow([doc_id, str(is_report).lower(), ";".join(terms)])
    if errors:
        with (out_dir / "filter_errors.csv").open("w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["doc_id", "error"])
            writer.writerows(errors)
        for doc_id, msg in errors:
            logger.warning("filter: %s: %s", doc_id, msg)
    n_candidates = sum(1 for _, rep, terms in rows if rep and terms)
    logger.info("filter: %d documents, %d candidates, %d errors", len(rows), n_candidates, len(errors))
    return 1 if errors else 0


def cmd_stats(args, cfg: RunConfig) -> int:
    timelines = _load_timelines(args.corpus)
    stats = corpus_stats([timelines[cid] for cid in sorted(timelines)])
    out_dir = Path(args.out)
    flat = stats.to_flat_dict()
    _write_json(out_dir / "corpus_stats.json", flat, cfg)
    keys = list(flat)
    csv_text = _artifact_comment(cfg)
    csv_text += ",".join(keys) + "\n"
    csv_text += ",".join(_fmt(float(flat[k])) for k in keys) + "\n"
    _write(out_dir / "corpus_stats.csv", csv_text)
    return 0


def _common_ids(pred: Mapping[str, Timeline], ref: Mapping[str, Timeline]) -> list[str]:
    common = sorted(set(pred) & set(ref))
    skipped = sorted(set(pred) ^ set(ref))
    for cid in skipped:
        logger.warning("case %r present on one side only; skipped", cid)
    if not common:
        raise ToolkitError("no overlapping case_ids between predicted and reference inputs")
    return common


def cmd_evaluate(args, cfg: RunConfig) -> int:
    provider = provider_from_spec(cfg.provider)
    pred = _load_timelines(args.pred)
    ref = _load_timelines(args.ref)
    common = _common_ids(pred, ref)
    out_dir = Path(args.out)
    (out_dir / "alignments").mkdir(parents=True, exist_ok=True)

    errors: list[tuple[str, str]] = []

    def one_case(cid: str):
        try:
            a = align(pred[cid], ref[cid], provider, cfg.threshold)
            rate = event_match_rate(a, len(ref[cid]))
            try:
                c = concordance(a, pred[cid], ref[cid])
            except MetricUndefinedError:
                c = None
            try:
                u = aultc(discrepancies(a, pred[cid], ref[cid]), cfg.aultc_cap_hours)
            except MetricUndefinedError:
                u = None
            return (a, rate, c, u)
        except ToolkitError as exc:
            return exc

    results = _map_cases(one_case, common, cfg.threads)

    lines = [_artifact_comment(cfg, with_cap=True).rstrip("\n")]
    lines.append("case_id,n_pred,n_ref,n_matched,match_rate,concordance,aultc")
    rates, concs, aults = [], [], []
    for cid in common:
        result = results[cid]
        if isinstance(result, Exception):
            errors.append((cid, str(result)))
            logger.warning("evaluate: %s: %s", cid, result)
            continue
        a, rate, c, u = result
        _write_json(
            out_dir / "alignments" / f"{cid}.json",
            alignment_to_json_dict(a, pred[cid], ref[cid]),
            cfg,
        )
        lines.append(
            f"{cid},{len(pred[cid])},{len(ref[cid])},{a.n_matched},"
            f"{_fmt(rate)},{_fmt(c)},{_fmt(u)}"
        )
        rates.append(rate)
        if c is not None:
            concs.append(c)
        if u is not None:
            aults.append(u)
    if not rates:
        raise ToolkitError("no case could be evaluated")
    _write(out_dir / "metrics_cases.csv", "\n".join(lines) + "\n")

    mean_rate = sum(rates) / len(rates)
    mean_conc = sum(concs) / len(concs) if concs else None
    mean_aultc = sum(aults) / len(aults) if aults else None
    _write(
        out_dir / "metrics_mean.csv",
        _artifact_comment(cfg, with_cap=True)
        + "match_rate,concordance,aultc\n"
        + f"{_fmt(mean_rate)},{_fmt(mean_conc)},{_fmt(mean_aultc)}\n",
    )
    _write_json(
        out_dir / "metrics_summary.json",
        {
            "threshold": cfg.threshold,
            "provider": cfg.provider,
            "aultc_cap_hours": cfg.aultc_cap_hours,
            "n_cases": len(rates),
            "match_rate": mean_rate,
            "concordance": mean_conc,
            "aultc": mean_aultc,
            "errors": [{"case_id": c, "error": m} for c, m in errors],
        },
        cfg,
    )
    return 1 if errors else 0


def cmd_sweep(args, cfg: RunConfig) -> int:
    provider = provider_from_spec(cfg.provider)
    pred = _load_timelines(args.pred)
    ref = _load_timelines(args.ref)
    common = _common_ids(pred, ref)
    grid = cfg.sweep_grid()
    out_dir = Path(args.out)

    errors: list[tuple[str, str]] = []

    def one_case(cid: str):
        try:
            return threshold_sweep(pred[cid], ref[cid], provider, grid, cfg.aultc_cap_hours)
        except ToolkitError as exc:
            return exc

    results = _map_cases(one_case, common, cfg.threads)

    case_lines = [_artifact_comment(cfg, with_cap=True).rstrip("\n")]
    case_lines.append("case_id,threshold,match_rate,concordance,aultc")
    per_case_rows = []
    for cid in common:
        result = results[cid]
        if isinstance(result, Exception):
            errors.append((cid, str(result)))
            logger.warning("sweep: %s: %s", cid, result)
            continue
        per_case_rows.append(result)
        for row in result:
            case_lines.append(
                f"{cid},{_fmt(row.threshold)},{_fmt(row.match_rate)},"
                f"{_fmt(row.concordance)},{_fmt(row.aultc)}"
            )
    if not per_case_rows:
        raise ToolkitError("no case could be swept")
    _write(out_dir / "sweep_cases.csv", "\n".join(case_lines) + "\n")

    means = mean_sweep_rows(per_case_rows)
    mean_lines = [_artifact_comment(cfg, with_cap=True).rstrip("\n")]
    mean_lines.append("threshold,match_rate,concordance,aultc")
    for row in means:
        mean_lines.append(
            f"{_fmt(row.threshold)},{_fmt(row.match_rate)},"
            f"{_fmt(row.concordance)},{_fmt(row.aultc)}"
        )
    _write(out_dir / "sweep_mean.csv", "\n".join(mean_lines) + "\n")

    if args.svg:
        mark = None
        for i, row in enumerate(means):
            if abs(row.threshold - cfg.threshold) < 1e-12:
                mark = i
        svg = svgplot.tradeoff_svg(
            [
                ("concordance", [r.match_rate for r in means], [r.concordance for r in means], mark),
                ("aultc", [r.match_rate for r in means], [r.aultc for r in means], mark),
            ]
        )
        _write(out_dir / "sweep.svg", svg)
    return 1 if errors else 0


def cmd_cohort(args, cfg: RunConfig) -> int:
    glp = _resolve_lexicon(cfg.glp_lexicon, "glp1ra")
    diabetes = _resolve_lexicon(cfg.diabetes_lexicon, "diabetes")
    outcome = _resolve_outcome_lexicon(cfg, args.outcome)
    policy = cfg.policy()

    cases = _case_records(_load_timelines(args.cases), _load_metadata(args.case_meta))
    pool = _case_records(_load_timelines(args.pool), _load_metadata(args.pool_meta))

    selection = build_cohort(
        cases,
        glp,
        diabetes,
        pool,
        ratio=cfg.control_ratio,
        seed=cfg.seed,
        window_hours=cfg.exposure_window_hours,
    )
    by_id = {c.case_id: c for c in cases}
    by_id.update({c.case_id: c for c in pool if c.case_id not in by_id})
    treated = [by_id[cid] for cid in sorted(selection.treated)]
    comparison = [by_id[cid] for cid in sorted(selection.comparison)]

    outcomes = {}
    n_excluded = 0
    for case in treated + comparison:
        result = ascertain_outcome(case, outcome, policy)
        if result is None:
            n_excluded += 1
            logger.warning("cohort: %s excluded (baseline-prevalent outcome)", case.case_id)
        outcomes[case.case_id] = result
    records = to_survival_records(treated, comparison, outcomes, policy)

    out_dir = Path(args.out)
    _write(out_dir / "survival_records.csv", _artifact_comment(cfg) + records_to_csv(records))
    manifest = cohort_manifest_dict(selection, glp, diabetes, outcome, n_excluded, policy)
    manifest["outcome"] = args.outcome
    _write_json(out_dir / "cohort_manifest.json", manifest, cfg)
    logger.info(
        "cohort: %d treated, %d comparison, %d records, %d excluded",
        len(treated),
        len(comparison),
        len(records),
        n_excluded,
    )
    return 0


def _curve_csv(cfg, times, values, lower=None, upper=None) -> str:
    header = "time_months,survival" + (",lower,upper" if lower is not None else "")
    lines = [_artifact_comment(cfg).rstrip("\n"), header]
    for i, t in enumerate(times):
        row = f"{_fmt(float(t))},{_fmt(float(values[i]))}"
        if lower is not None:
            row += f",{_fmt(float(lower[i]))},{_fmt(float(upper[i]))}"
        lines.append(row)
    return "\n".join(lines) + "\n"


def cmd_survival(args, cfg: RunConfig) -> int:
    with open(args.records, "r", encoding="utf-8") as fh:
        records = records_from_csv(fh)
    if not records:
        raise ToolkitError(f"no survival records in {args.records}")
    model = cox_fit(records)
    if not model.converged:
        raise ToolkitError(f"model did not converge: {model.message}")
    report = hazard_report(model, level=args.level)
    profiles = reference_profiles(records, model.covariate_names)
    bands = bootstrap_bands(
        records,
        profiles,
        n_resamples=cfg.bootstrap_resamples,
        level=args.level,
        seed=cfg.seed,
        threads=cfg.threads,
    )

    out_dir = Path(args.out)
    curves = {}
    for name, profile in profiles.items():
        curve = adjusted_survival(model, profile)
        values = curve(bands.grid)
        lo, hi = bands.bands[name]
        _write(
            out_dir / f"curve_adjusted_{name}.csv",
            _curve_csv(cfg, bands.grid, values, lo(bands.grid), hi(bands.grid)),
        )
        curves[name] = values
    for name, flag in (("exposed", True), ("unexposed", False)):
        group = [r for r in records if r.exposed is flag]
        if group:
            km = kaplan_meier(group)
            _write(out_dir / f"curve_km_{name}.csv", _curve_csv(cfg, km.times, km.values))

    payload = {
        "covariates": list(model.covariate_names),
        "coefficients": [float(b) for b in model.coefficients],
        "covariance": [[float(v) for v in row] for row in model.covariance],
        "hazard_ratios": {
            name: {
                "hr": est.hr,
                "ci_low": est.ci_low,
                "ci_high": est.ci_high,
                "p_value": est.p_value,
            }
            for name, est in report.estimates.items()
        },
        "level": report.level,
        "n_records": model.n_records,
        "n_events": model.n_events,
        "converged": model.converged,
        "n_iterations": model.n_iterations,
        "message": model.message,
        "log_likelihood": model.log_likelihood,
        "bootstrap": {
            "n_resamples": bands.n_resamples,
            "n_omitted": bands.n_omitted,
            "level": bands.level,
        },
        "kernel_backend": BACKEND,
    }
    _write_json(out_dir / "model_report.json", payload, cfg)

    if args.svg:
        svg = svgplot.survival_svg(
            curves=[
                (name, list(bands.grid), list(curves[name])) for name in sorted(profiles)
            ],
            bands=[
                (
                    name,
                    list(bands.grid),
                    list(bands.bands[name][0].values),
                    list(bands.bands[name][1].values),
                )
                for name in sorted(profiles)
            ],
        )
        _write(out_dir / "survival.svg", svg)
    logger.info(
        "survival: n=%d events=%d exposed-HR=%.4g",
        model.n_records,
        model.n_events,
        report.estimates["exposed"].hr if "exposed" in report.estimates else float("nan"),
    )
    return 0


# ---------------------------------------------------------------------------
# argument parsing


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON run-config file")
    common.add_argument("--seed", type=int, help="override the config seed")
    common.add_argument("--threads", type=int, help="worker threads (1 = serial)")
    common.add_argument("--out", required=True, help="output directory")
    common.add_argument("--provider", help="distance provider: lexical | embedding:<path>")
    common.add_argument("--threshold", type=float, help="match distance threshold")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(
        prog="ttskit",
        description="Clinical textual time series evaluation and survival toolkit",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("filter", parents=[common], help="classify raw documents")
    p.add_argument("corpus_dir", help="directory of plain-text documents")
    p.set_defaults(handler=cmd_filter)

    p = sub.add_parser("stats", parents=[common], help="corpus descriptive statistics")
    p.add_argument("corpus", help="timeline corpus (.jsonl file or directory of .tsv)")
    p.set_defaults(handler=cmd_stats)

    p = sub.add_parser("evaluate", parents=[common], help="single-threshold evaluation")
    p.add_argument("pred", help="predicted timelines (dir or .jsonl)")
    p.add_argument("ref", help="reference timelines (dir or .jsonl)")
    p.set_defaults(handler=cmd_evaluate)

    p = sub.add_parser("sweep", parents=[common], help="threshold sensitivity sweep")
    p.add_argument("pred")
    p.add_argument("ref")
    p.add_argument("--svg", action="store_true", help="also emit a tradeoff plot")
    p.set_defaults(handler=cmd_sweep)

    p = sub.add_parser("cohort", parents=[common], help="build cohorts and survival records")
    p.add_argument("--cases", required=True, help="study timelines (dir or .jsonl)")
    p.add_argument("--case-meta", required=True, help="study metadata .jsonl")
    p.add_argument("--pool", required=True, help="top-up pool timelines (dir or .jsonl)")
    p.add_argument("--pool-meta", required=True, help="pool metadata .jsonl")
    p.add_argument(
        "--outcome",
        required=True,
        help=f"outcome lexicon: one of {OUTCOME_KEYS} or a JSON path",
    )
    p.set_defaults(handler=cmd_cohort)

    p = sub.add_parser("survival", parents=[common], help="fit and report the Cox model")
    p.add_argument("--records", required=True, help="survival records CSV")
    p.add_argument("--level", type=float, default=0.95, help="confidence level")
    p.add_argument("--svg", action="store_true", help="also emit a curve plot")
    p.set_defaults(handler=cmd_survival)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        cfg = load_config(
            args.config,
            {
                "seed": args.seed,
                "threads": args.threads,
                "provider": args.provider,
                "threshold": args.threshold,
            },
        )
        return args.handler(args, cfg)
    except ToolkitError as exc:
        logger.error("%s", exc)
        return 2


if __name__ == "__main__":
    sys.exit(main())
