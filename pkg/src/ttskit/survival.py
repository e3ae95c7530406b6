"""Survival estimation: Kaplan-Meier curves, Cox proportional hazards with
Efron tie correction, Wald inference, covariate-adjusted survival curves, and
percentile bootstrap uncertainty bands.

The partial likelihood is maximized by Newton iterations with step-halving.
The log-likelihood never decreases across accepted steps; convergence is
declared when the score is flat (max |score| < 1e-7) or the relative
log-likelihood change drops below 1e-9. A coefficient escaping past |20| is
treated as a monotone-likelihood (complete separation) signal and the model
is flagged non-converged.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from statistics import NormalDist
from typing import Mapping, Sequence

import numpy as np

from ._kernels import efron_score_info, efron_sum_log_denom
from .cohort import SEX_ONEHOT_CATEGORIES, SurvivalRecord
from .errors import NotIdentifiableError, SurvivalError

logger = logging.getLogger(__name__)

MAX_ITERATIONS = 100
SCORE_TOL = 1e-7
LOGLIK_REL_TOL = 1e-9
MAX_STEP_HALVINGS = 20
COEF_DIVERGENCE_BOUND = 20.0

# Exact standard-normal quantiles for the common confidence levels.
_Z_QUANTILES = {0.90: 1.644854, 0.95: 1.959964, 0.99: 2.575829}

DEFAULT_COVARIATE_SPEC = ("exposed", "age", "sex")


@dataclass(frozen=True)
class StepFunction:
    """Right-continuous step function; survival curves start at 1."""

    times: np.ndarray
    values: np.ndarray
    initial_value: float = 1.0

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float)
        values = np.asarray(self.values, dtype=float)
        if times.shape != values.shape or times.ndim != 1:
            raise ValueError("times and values must be matching 1-D arrays")
        if times.size > 1 and not np.all(np.diff(times) > 0):
            raise ValueError("times must be strictly increasing")
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "values", values)

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        if self.times.size == 0:
            out = np.full(t.shape, self.initial_value)
        else:
            idx = np.searchsorted(self.times, t, side="right") - 1
            out = np.where(idx < 0, self.initial_value, self.values[np.clip(idx, 0, None)])
        return float(out) if out.ndim == 0 else out


@dataclass
class CoxModel:
    coefficients: np.ndarray
    covariance: np.ndarray
    covariate_names: tuple[str, ...]
    n_events: int
    converged: bool
    baseline_cumhaz: StepFunction
    log_likelihood: float
    n_records: int
    n_iterations: int
    message: str = ""


@dataclass(frozen=True)
class HazardEstimate:
    hr: float
    ci_low: float
    ci_high: float
    p_value: float


@dataclass(frozen=True)
class HazardReport:
    level: float
    estimates: Mapping[str, HazardEstimate]


@dataclass(frozen=True)
class BootstrapBands:
    """Pointwise percentile envelopes per profile, plus convergence accounting."""

    grid: np.ndarray
    bands: Mapping[str, tuple[StepFunction, StepFunction]]
    n_resamples: int
    n_omitted: int
    level: float
    seed: int


def kaplan_meier(records: Sequence[SurvivalRecord]) -> StepFunction:
    """Product-limit survival estimate.

    At each distinct event time with d events among n at risk the curve is
    multiplied by (1 - d/n); subjects censored at a time remain at risk
    through it.
    """
    if not records:
        raise SurvivalError("no records")
    durations = np.asarray([r.duration_months for r in records], dtype=float)
    events = np.asarray([r.event for r in records], dtype=bool)
    if np.any(durations < 0):
        raise SurvivalError("negative duration")
    order = np.argsort(durations, kind="stable")
    durations = durations[order]
    events = events[order]

    times = []
    values = []
    at_risk = len(durations)
    surv = 1.0
    i = 0
    n = len(durations)
    while i < n:
        j = i
        while j < n and durations[j] == durations[i]:
            j += 1
        d = int(events[i:j].sum())
        if d > 0:
            surv *= 1.0 - d / at_risk
            times.append(float(durations[i]))
            values.append(surv)
        at_risk -= j - i
        i = j
    return StepFunction(times=np.asarray(times), values=np.asarray(values), initial_value=1.0)


# ---------------------------------------------------------------------------
# Cox partial likelihood with Efron tie correction


@dataclass(frozen=True)
class _FitData:
    """Design and grouping arrays sorted by descending duration, events first
    within each tied-duration group."""

    x: np.ndarray  # centered covariates, C-contiguous
    x_mean: np.ndarray
    durations: np.ndarray
    events: np.ndarray
    starts: np.ndarray
    sizes: np.ndarray
    n_events_per_group: np.ndarray
    event_rows: np.ndarray
    n_events: int


def _prepare_fit_data(durations, events, x) -> _FitData:
    durations = np.asarray(durations, dtype=float)
    events = np.asarray(events, dtype=bool)
    x = np.asarray(x, dtype=float)
    if x.ndim != 2 or not (x.shape[0] == durations.shape[0] == events.shape[0]):
        raise SurvivalError("durations, events and covariates have inconsistent shapes")
    order = np.lexsort((~events, -durations))
    durations = durations[order]
    events = events[order]
    x = np.ascontiguousarray(x[order])

    boundaries = np.flatnonzero(np.diff(durations)) + 1
    starts = np.concatenate(([0], boundaries)).astype(np.int64)
    ends = np.concatenate((boundaries, [len(durations)])).astype(np.int64)
    sizes = ends - starts
    n_ev = np.asarray(
        [int(events[s:e].sum()) for s, e in zip(starts, ends)], dtype=np.int64
    )
    x_mean = x.mean(axis=0)
    return _FitData(
        x=np.ascontiguousarray(x - x_mean),
        x_mean=x_mean,
        durations=durations,
        events=events,
        starts=starts,
        sizes=sizes,
        n_events_per_group=n_ev,
        event_rows=np.flatnonzero(events),
        n_events=int(events.sum()),
    )


def _breslow_denominators(theta: np.ndarray, data: _FitData, x: np.ndarray | None):
    """(sum_log, grad_denom, info) with untied denominators: every tied event
    shares the full risk-set sums, so everything falls out of cumulative sums."""
    ends = data.starts + data.sizes
    d = data.n_events_per_group.astype(float)
    has = d > 0
    s0 = np.cumsum(theta)[ends - 1][has]
    d = d[has]
    sum_log = float((d * np.log(s0)).sum())
    if x is None:
        return sum_log, None, None
    wx = theta[:, None] * x
    s1 = np.cumsum(wx, axis=0)[ends - 1][has]
    s2 = np.cumsum(wx[:, :, None] * x[:, None, :], axis=0)[ends - 1][has]
    mean = s1 / s0[:, None]
    grad = (d[:, None] * mean).sum(axis=0)
    info = np.einsum("g,gij->ij", d, s2 / s0[:, None, None])
    info -= np.einsum("g,gi,gj->ij", d, mean, mean)
    return sum_log, grad, info


def _loglik(beta: np.ndarray, data: _FitData, ties: str = "efron") -> float:
    eta = data.x @ beta
    with np.errstate(over="ignore"):
        theta = np.exp(eta)
    if not np.all(np.isfinite(theta)):
        return -np.inf
    if ties == "breslow":
        sum_log, _, _ = _breslow_denominators(theta, data, None)
    else:
        sum_log = efron_sum_log_denom(
            np.ascontiguousarray(theta), data.starts, data.sizes, data.n_events_per_group
        )
    return float(eta[data.event_rows].sum() - sum_log)


def _loglik_score_info(beta: np.ndarray, data: _FitData, ties: str = "efron"):
    eta = data.x @ beta
    with np.errstate(over="ignore"):
        theta = np.exp(eta)
    if not np.all(np.isfinite(theta)):
        return -np.inf, None, None
    if ties == "breslow":
        sum_log, grad_denom, info = _breslow_denominators(theta, data, data.x)
    else:
        sum_log, grad_denom, info = efron_score_info(
            np.ascontiguousarray(theta), data.x, data.starts, data.sizes, data.n_events_per_group
        )
    ll = float(eta[data.event_rows].sum() - sum_log)
    score = data.x[data.event_rows].sum(axis=0) - grad_denom
    return ll, score, info


def efron_partial_loglik(beta, durations, events, x) -> float:
    """Tie-corrected partial log-likelihood at ``beta`` (uncentered covariates)."""
    data = _prepare_fit_data(durations, events, x)
    beta = np.asarray(beta, dtype=float)
    # Centering shifts the log-likelihood by a beta-independent constant of
    # zero (the partial likelihood is invariant to covariate translation).
    return _loglik(beta, data)


def partial_likelihood_derivatives(beta, durations, events, x):
    """(loglik, score, observed information) at ``beta``, for diagnostics."""
    data = _prepare_fit_data(durations, events, x)
    return _loglik_score_info(np.asarray(beta, dtype=float), data)


def _breslow_baseline(beta: np.ndarray, data: _FitData) -> StepFunction:
    eta = data.x @ beta
    theta = np.exp(eta)
    cs0 = np.cumsum(theta)
    ends = data.starts + data.sizes
    increments = []
    times = []
    for g in range(len(data.starts)):
        d = int(data.n_events_per_group[g])
        if d == 0:
            continue
        s0_risk = cs0[ends[g] - 1]
        times.append(float(data.durations[data.starts[g]]))
        increments.append(d / s0_risk)
    times = times[::-1]  # groups were in descending time order
    increments = increments[::-1]
    cumhaz_centered = np.cumsum(increments)
    # Un-center: the reported baseline refers to covariates at zero, not at
    # the sample mean used during optimization.
    cumhaz = cumhaz_centered * math.exp(-float(data.x_mean @ beta))
    return StepFunction(
        times=np.asarray(times), values=np.asarray(cumhaz), initial_value=0.0
    )


def fit_partial_likelihood(
    durations: Sequence[float],
    events: Sequence[bool],
    x: np.ndarray,
    covariate_names: Sequence[str],
    max_iterations: int = MAX_ITERATIONS,
    ties: str = "efron",
) -> CoxModel:
    """Newton maximization of the partial likelihood.

    Tied event times use Efron's correction by default; ``ties="breslow"``
    selects the untied-denominator approximation instead. Raises
    :class:`SurvivalError` when no events are present and
    :class:`NotIdentifiableError` for constant covariates or a singular
    information matrix. Monotone-likelihood divergence is flagged through
    ``converged=False`` rather than raised.
    """
    if ties not in ("efron", "breslow"):
        raise SurvivalError(f"ties must be 'efron' or 'breslow', got {ties!r}")
    x = np.asarray(x, dtype=float)
    if x.ndim != 2:
        raise SurvivalError("covariate matrix must be 2-D")
    names = tuple(covariate_names)
    if len(names) != x.shape[1]:
        raise SurvivalError("covariate_names length does not match design matrix")
    data = _prepare_fit_data(durations, events, x)
    if data.n_events == 0:
        raise SurvivalError("no events")
    for j, name in enumerate(names):
        if np.ptp(x[:, j]) == 0.0:
            raise NotIdentifiableError(f"covariate not identifiable: {name!r} is constant")

    p = x.shape[1]
    beta = np.zeros(p)
    ll, score, info = _loglik_score_info(beta, data, ties)
    converged = False
    message = ""
    iterations = 0
    for iterations in range(1, max_iterations + 1):
        if np.max(np.abs(score)) < SCORE_TOL:
            converged = True
            message = "score converged"
            break
        try:
            step = np.linalg.solve(info, score)
        except np.linalg.LinAlgError:
            raise NotIdentifiableError(
                "covariate not identifiable: singular information matrix"
            ) from None
        scale = 1.0
        accepted = False
        flat = False
        for _ in range(MAX_STEP_HALVINGS + 1):
            candidate = beta + scale * step
            cand_ll = _loglik(candidate, data, ties)
            if math.isfinite(cand_ll) and cand_ll >= ll:
                accepted = True
                break
            # A candidate within the relative tolerance of the current value
            # means the likelihood is numerically flat: converged, stay put.
            if math.isfinite(cand_ll) and abs(cand_ll - ll) < LOGLIK_REL_TOL * (
                abs(ll) + LOGLIK_REL_TOL
            ):
                flat = True
                break
            scale *= 0.5
        if flat:
            converged = True
            message = "log-likelihood converged"
            break
        if not accepted:
            converged = False
            message = "step-halving could not improve the log-likelihood"
            break
        beta = candidate
        prev_ll = ll
        ll, score, info = _loglik_score_info(beta, data, ties)
        assert ll >= prev_ll, "partial log-likelihood decreased"
        if np.any(np.abs(beta) > COEF_DIVERGENCE_BOUND):
            converged = False
            message = "monotone partial likelihood suspected (coefficient diverging)"
            break
        if abs(ll - prev_ll) < LOGLIK_REL_TOL * (abs(prev_ll) + LOGLIK_REL_TOL):
            converged = True
            message = "log-likelihood converged"
            break
    else:
        message = "maximum iterations reached"

    try:
        covariance = np.linalg.inv(info)
    except np.linalg.LinAlgError:
        raise NotIdentifiableError(
            "covariate not identifiable: singular information matrix at optimum"
        ) from None
    return CoxModel(
        coefficients=beta,
        covariance=covariance,
        covariate_names=names,
        n_events=data.n_events,
        converged=converged,
        baseline_cumhaz=_breslow_baseline(beta, data),
        log_likelihood=ll,
        n_records=len(data.durations),
        n_iterations=iterations,
        message=message,
    )


def design_matrix(
    records: Sequence[SurvivalRecord], covariate_spec: Sequence[str] = DEFAULT_COVARIATE_SPEC
) -> tuple[np.ndarray, tuple[str, ...]]:
    """Expand record fields into a design matrix.

    ``sex`` expands into one-hot indicator columns (Male as reference) for
    the categories actually present among the records; absent categories
    would be all-zero columns and are dropped.
    """
    columns: list[np.ndarray] = []
    names: list[str] = []
    for spec in covariate_spec:
        if spec == "exposed":
            columns.append(np.asarray([float(r.exposed) for r in records]))
            names.append("exposed")
        elif spec == "age":
            columns.append(np.asarray([r.age_years for r in records]))
            names.append("age")
        elif spec == "sex":
            present = {r.sex for r in records}
            for category in SEX_ONEHOT_CATEGORIES:
                if category in present:
                    columns.append(
                        np.asarray([float(r.sex == category) for r in records])
                    )
                    names.append(f"sex_{category}")
        else:
            raise SurvivalError(f"unknown covariate spec entry {spec!r}")
    if not columns:
        raise SurvivalError("empty covariate specification")
    return np.column_stack(columns), tuple(names)


def cox_fit(
    records: Sequence[SurvivalRecord],
    covariate_spec: Sequence[str] = DEFAULT_COVARIATE_SPEC,
    ties: str = "efron",
) -> CoxModel:
    """Fit the proportional hazards model on survival records."""
    if not records:
        raise SurvivalError("no records")
    x, names = design_matrix(records, covariate_spec)
    durations = [r.duration_months for r in records]
    events = [r.event for r in records]
    return fit_partial_likelihood(durations, events, x, names, ties=ties)


def _normal_sf(z: float) -> float:
    # Survival function of the standard normal via erfc; accurate to machine
    # precision, well within the 1e-7 contract.
    return 0.5 * math.erfc(z / math.sqrt(2.0))


def _safe_exp(v: float) -> float:
    try:
        return math.exp(v)
    except OverflowError:
        return math.inf


def _z_quantile(level: float) -> float:
    if level in _Z_QUANTILES:
        return _Z_QUANTILES[level]
    return NormalDist().inv_cdf(0.5 + level / 2.0)


def hazard_report(model: CoxModel, level: float = 0.95) -> HazardReport:
    """Hazard ratios with Wald confidence intervals and two-sided p-values."""
    if not model.converged:
        raise SurvivalError(
            "model did not converge; inspect CoxModel.message before reporting"
        )
    if not (0.0 < level < 1.0):
        raise SurvivalError(f"level must be in (0, 1), got {level}")
    z = _z_quantile(level)
    se = np.sqrt(np.diag(model.covariance))
    estimates = {}
    for name, beta, s in zip(model.covariate_names, model.coefficients, se):
        estimates[name] = HazardEstimate(
            hr=_safe_exp(beta),
            ci_low=_safe_exp(beta - z * s),
            ci_high=_safe_exp(beta + z * s),
            p_value=min(1.0, 2.0 * _normal_sf(abs(beta) / s)) if s > 0 else 1.0,
        )
    return HazardReport(level=level, estimates=estimates)


def adjusted_survival(model: CoxModel, profile: Sequence[float]) -> StepFunction:
    """S(t | x) = exp(-baseline_cumhaz(t) * exp(beta . x)) for one covariate profile."""
    if not model.converged:
        raise SurvivalError(
            "model did not converge; inspect CoxModel.message before predicting"
        )
    profile = np.asarray(profile, dtype=float)
    if profile.shape != model.coefficients.shape:
        raise SurvivalError("profile length does not match the fitted covariates")
    risk = math.exp(float(model.coefficients @ profile))
    base = model.baseline_cumhaz
    return StepFunction(
        times=base.times, values=np.exp(-base.values * risk), initial_value=1.0
    )


def reference_profiles(
    records: Sequence[SurvivalRecord], covariate_names: Sequence[str]
) -> dict[str, np.ndarray]:
    """Representative profiles: mean age and modal sex, exposed vs unexposed.

    Sex ties are broken lexicographically by category name.
    """
    mean_age = sum(r.age_years for r in records) / len(records)
    counts: dict[str, int] = {}
    for r in records:
        counts[r.sex] = counts.get(r.sex, 0) + 1
    top = max(counts.values())
    modal_sex = min(c for c, n in counts.items() if n == top)

    def build(exposed: float) -> np.ndarray:
        vals = []
        for name in covariate_names:
            if name == "exposed":
                vals.append(exposed)
            elif name == "age":
                vals.append(mean_age)
            elif name.startswith("sex_"):
                vals.append(1.0 if name == f"sex_{modal_sex}" else 0.0)
            else:
                raise SurvivalError(f"cannot build a reference value for {name!r}")
        return np.asarray(vals)

    return {"exposed": build(1.0), "unexposed": build(0.0)}


def bootstrap_bands(
    records: Sequence[SurvivalRecord],
    profile_pair: Mapping[str, Sequence[float]],
    n_resamples: int = 500,
    level: float = 0.95,
    seed: int = 0,
    covariate_spec: Sequence[str] = DEFAULT_COVARIATE_SPEC,
    threads: int = 1,
) -> BootstrapBands:
    """Case-level bootstrap percentile envelopes for adjusted survival curves.

    Records are resampled with replacement, the model refit, and each
    profile's adjusted curve evaluated on the union of observed event times;
    resamples that fail to converge (or are unidentifiable) are omitted and
    counted. Each resample derives its own RNG stream from (seed, index), so
    serial and parallel runs agree exactly.
    """
    if n_resamples < 1:
        raise SurvivalError(f"n_resamples must be >= 1, got {n_resamples}")
    records = list(records)
    n = len(records)
    grid = np.unique(
        np.asarray([r.duration_months for r in records if r.event], dtype=float)
    )
    if grid.size == 0:
        raise SurvivalError("no events")
    profiles = {name: np.asarray(v, dtype=float) for name, v in profile_pair.items()}

    def one_resample(i: int):
        rng = np.random.default_rng([seed, i])
        idx = rng.integers(0, n, size=n)
        sample = [records[j] for j in idx]
        try:
            model = cox_fit(sample, covariate_spec)
        except SurvivalError:
            return None
        if not model.converged:
            return None
        return {name: adjusted_survival(model, prof)(grid) for name, prof in profiles.items()}

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(one_resample, range(n_resamples)))
    else:
        results = [one_resample(i) for i in range(n_resamples)]

    kept = [r for r in results if r is not None]
    n_omitted = n_resamples - len(kept)
    if not kept:
        raise SurvivalError(
            f"all {n_resamples} bootstrap resamples failed to converge"
        )
    if n_omitted:
        logger.warning("omitted %d non-converged bootstrap resamples", n_omitted)

    lo_q = 100.0 * (1.0 - level) / 2.0
    hi_q = 100.0 * (1.0 + level) / 2.0
    bands = {}
    for name in profiles:
        curves = np.vstack([r[name] for r in kept])
        lo = np.percentile(curves, lo_q, axis=0)
        hi = np.percentile(curves, hi_q, axis=0)
        bands[name] = (
            StepFunction(times=grid, values=lo, initial_value=1.0),
            StepFunction(times=grid, values=hi, initial_value=1.0),
        )
    return BootstrapBands(
        grid=grid,
        bands=bands,
        n_resamples=n_resamples,
        n_omitted=n_omitted,
        level=level,
        seed=seed,
    )
