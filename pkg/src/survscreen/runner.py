"""Scenario grid orchestration and report emission.

Replicates are the unit of parallel work.  Each replicate draws from its own
stream, so a worker only ever returns integer tallies plus per-replicate PH
statistics, and merging them gives the same report for any worker count.
"""
from __future__ import annotations

import csv
import io
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from itertools import product
from pathlib import Path

import numpy as np

from .cox import CoxDataError, SingularInformationError, SurvivalData, _fit_sorted, univariate_cox_screens
from .datagen import ScenarioSpec, SimDataset, generate_dataset
from .linear_models import RankDeficientError, SingleClassError, gaussian_screens, logistic_screens
from .metrics import ALPHA, MODEL_LABELS, MODELS, ScenarioReport, ScreeningOutcome, Tally
from .ph import PhTestFailure, _ph_test_sorted

__all__ = [
    "GridConfig",
    "ScenarioRun",
    "PhFeatureSummary",
    "screen_dataset",
    "simulate_scenario",
    "run_scenario",
    "run_grid",
    "format_report",
    "format_ph_report",
    "REPORT_COLUMNS",
    "PH_COLUMNS",
]

REPORT_COLUMNS = (
    "sample_size", "censoring_rate", "correlation", "model", "sensitivity",
    "specificity", "ranking_accuracy", "replicates", "nonconverged", "ph_failures",
)
PH_COLUMNS = ("scenario_id", "feature_id", "true_effect", "mean_chisq", "rejection_rate", "failure_count")
FORMATS = ("csv", "markdown")
NOISE_FITS = ("separate", "augmented")

_FIT_ERRORS = (CoxDataError, SingularInformationError, RankDeficientError, FloatingPointError,
               np.linalg.LinAlgError)


@dataclass
class PhRecord:
    """PH chi-squares of one replicate, keyed by feature id (NaN when the test failed)."""

    feature_ids: np.ndarray
    effects: np.ndarray
    chisq: np.ndarray
    pvalues: np.ndarray
    failed: bool = False


def _unscreened(n_features: int):
    return np.ones(n_features), np.zeros(n_features)


def _outcome(ds: SimDataset, model, pvals, stats, nonconverged=0) -> ScreeningOutcome:
    return ScreeningOutcome(
        model=model,
        p_values=pvals,
        statistics=stats,
        true_columns=ds.true_columns,
        noise_columns=ds.noise_columns,
        observed_effects=ds.observed_effects,
        nonconverged_count=nonconverged,
    )


def _from_screens(ds, model, screens):
    pvals = np.array([s.p_value for s in screens])
    stats = np.array([s.statistic for s in screens])
    return _outcome(ds, model, pvals, stats, sum(not s.converged for s in screens))


def _try_fit(data: SurvivalData):
    try:
        fit = _fit_sorted(data)
    except _FIT_ERRORS:
        return None
    return fit if fit.converged else None


def screen_dataset(ds: SimDataset, models=MODELS, with_ph_test: bool = False,
                   noise_fit: str = "separate"):
    """Apply each requested model to one dataset.

    The multivariate Cox model is fitted on the observed true features.  Its
    noise-feature decisions come from a second joint fit on the noise columns
    alone (``noise_fit="separate"``) or from a fit on all screened columns
    (``noise_fit="augmented"``).

    Returns
    -------
    outcomes : dict
        Model name to :class:`ScreeningOutcome`.
    ph : PhRecord or None
        PH tests on the multivariate Cox fits, when ``with_ph_test`` is set.
    """
    if noise_fit not in NOISE_FITS:
        raise ValueError(f"noise_fit must be one of {NOISE_FITS}")
    k = ds.n_features
    outcomes = {}
    data = None
    if {"univariate_cox", "multivariate_cox"} & set(models) or with_ph_test:
        data = SurvivalData(ds.X, ds.time, ds.event)

    if "gaussian" in models:
        try:
            outcomes["gaussian"] = _from_screens(ds, "gaussian", gaussian_screens(ds.time, ds.event, ds.X))
        except RankDeficientError:
            outcomes["gaussian"] = _outcome(ds, "gaussian", *_unscreened(k), nonconverged=k)
    if "logistic" in models:
        try:
            outcomes["logistic"] = _from_screens(ds, "logistic", logistic_screens(ds.time, ds.event, ds.X))
        except (SingleClassError, RankDeficientError):
            outcomes["logistic"] = _outcome(ds, "logistic", *_unscreened(k), nonconverged=k)
    if "univariate_cox" in models:
        try:
            screens = univariate_cox_screens(data)
            outcomes["univariate_cox"] = _from_screens(ds, "univariate_cox", screens)
        except _FIT_ERRORS:
            outcomes["univariate_cox"] = _outcome(ds, "univariate_cox", *_unscreened(k), nonconverged=k)

    true_fit = noise_fit_ = None
    if "multivariate_cox" in models or with_ph_test:
        true_fit = _try_fit(data.columns(ds.true_columns))
        if len(ds.noise_columns):
            if noise_fit == "separate":
                noise_fit_ = _try_fit(data.columns(ds.noise_columns))
                noise_pos = np.arange(len(ds.noise_columns))
            else:
                noise_fit_ = _try_fit(data)
                noise_pos = ds.noise_columns
    if "multivariate_cox" in models:
        pvals, stats = np.ones(k), np.zeros(k)
        nonconverged = 0
        if true_fit is None:
            nonconverged += 1
        else:
            pvals[ds.true_columns] = true_fit.p_values
            stats[ds.true_columns] = true_fit.statistics
        if len(ds.noise_columns):
            if noise_fit_ is None:
                nonconverged += 1
            else:
                pvals[ds.noise_columns] = noise_fit_.p_values[noise_pos]
                stats[ds.noise_columns] = noise_fit_.statistics[noise_pos]
        outcomes["multivariate_cox"] = _outcome(ds, "multivariate_cox", pvals, stats, nonconverged)

    ph = None
    if with_ph_test:
        ph = _ph_record(ds, data, true_fit, noise_fit_, noise_fit)
        if ph.failed:
            for o in outcomes.values():
                o.ph_failures = 1
    return outcomes, ph


def _ph_record(ds, data, true_fit, noise_fit_, noise_fit):
    k = ds.n_features
    n_true = ds.n_observed_true
    ids = np.concatenate([ds.observed_true_ids, 10 + np.arange(1, k - n_true + 1)])
    effects = np.concatenate([ds.observed_effects, np.zeros(k - n_true)])
    chisq = np.full(k, np.nan)
    pvals = np.full(k, np.nan)
    failed = False
    groups = [(true_fit, data.columns(ds.true_columns), ds.true_columns)]
    if k > n_true:
        if noise_fit == "separate":
            groups.append((noise_fit_, data.columns(ds.noise_columns), ds.noise_columns))
        else:
            groups.append((noise_fit_, data, None))
    for fit, sub, cols in groups:
        if fit is None:
            failed = True
            continue
        try:
            res = _ph_test_sorted(fit, sub)
        except (PhTestFailure, ValueError):
            failed = True
            continue
        if cols is None:
            # augmented fit: every column tested at once, keep all of them
            chisq[:], pvals[:] = res.per_covariate_chisq, res.per_covariate_p
        else:
            chisq[cols], pvals[cols] = res.per_covariate_chisq, res.per_covariate_p
    return PhRecord(ids, effects, chisq, pvals, failed)


@dataclass
class PhFeatureSummary:
    scenario_id: int
    feature_id: int
    true_effect: float
    mean_chisq: float
    rejection_rate: float
    failure_count: int
    tests: int


@dataclass
class ScenarioRun:
    spec: ScenarioSpec
    tallies: dict
    ph_records: list = field(default_factory=list)
    ph_failures: int = 0

    def reports(self) -> list[ScenarioReport]:
        return [ScenarioReport(self.spec, m, t) for m, t in self.tallies.items()]

    def ph_summary(self) -> list[PhFeatureSummary]:
        """Per-feature PH statistics pooled over replicates, in feature-id order."""
        values: dict[int, list] = {}
        effects: dict[int, float] = {}
        failures: dict[int, int] = {}
        for rec in self.ph_records:
            for fid, eff, c, p in zip(rec.feature_ids, rec.effects, rec.chisq, rec.pvalues):
                fid = int(fid)
                effects[fid] = float(eff)
                if np.isnan(c):
                    failures[fid] = failures.get(fid, 0) + 1
                    values.setdefault(fid, [])
                else:
                    values.setdefault(fid, []).append((float(c), float(p)))
        out = []
        for fid in sorted(values):
            vals = values[fid]
            m = len(vals)
            # fsum is exactly rounded, so the mean does not depend on merge order
            mean = math.fsum(c for c, _ in vals) / m if m else float("nan")
            rate = sum(p < ALPHA for _, p in vals) / m if m else float("nan")
            out.append(PhFeatureSummary(self.spec.scenario_id, fid, effects[fid], mean, rate,
                                        failures.get(fid, 0), m))
        return out


def _run_chunk(spec: ScenarioSpec, models, with_ph_test, ranking_key, noise_fit, indices):
    tallies = {m: Tally() for m in models}
    records = []
    for r in indices:
        ds = generate_dataset(spec, r)
        outcomes, ph = screen_dataset(ds, models, with_ph_test, noise_fit)
        for m in models:
            tallies[m].add(outcomes[m], ranking_key)
        if ph is not None:
            records.append((r, ph))
    return tallies, records


def _chunks(n: int, parts: int):
    parts = max(1, min(parts, n))
    bounds = np.linspace(0, n, parts + 1).astype(int)
    return [range(bounds[i], bounds[i + 1]) for i in range(parts)]


def simulate_scenario(spec: ScenarioSpec, models=MODELS, with_ph_test: bool = False,
                      workers: int = 1, ranking_key: str = "p_value", noise_fit: str = "separate",
                      executor=None) -> ScenarioRun:
    """Simulate every replicate of ``spec`` and keep the raw tallies.

    With ``workers > 1`` (or an ``executor``) replicates are split into
    contiguous chunks and run in separate processes.
    """
    models = _check_models(models)
    if workers <= 1 and executor is None:
        parts = [_run_chunk(spec, models, with_ph_test, ranking_key, noise_fit, range(spec.replicates))]
    else:
        chunks = _chunks(spec.replicates, 4 * max(workers, 1))
        args = [(spec, models, with_ph_test, ranking_key, noise_fit, c) for c in chunks]
        if executor is not None:
            parts = list(executor.map(_run_chunk_star, args))
        else:
            with ProcessPoolExecutor(max_workers=workers) as pool:
                parts = list(pool.map(_run_chunk_star, args))
    tallies = {m: Tally() for m in models}
    records = []
    for part_tallies, part_records in parts:
        for m in models:
            tallies[m] = tallies[m].merge(part_tallies[m])
        records.extend(part_records)
    records.sort(key=lambda item: item[0])
    ph_records = [rec for _, rec in records]
    return ScenarioRun(spec, tallies, ph_records, sum(rec.failed for rec in ph_records))


def _run_chunk_star(args):
    return _run_chunk(*args)


def run_scenario(spec: ScenarioSpec, models=MODELS, with_ph_test: bool = False,
                 workers: int = 1, ranking_key: str = "p_value",
                 noise_fit: str = "separate") -> list[ScenarioReport]:
    """Simulate ``spec.replicates`` datasets and report one row per model."""
    return simulate_scenario(spec, models, with_ph_test, workers, ranking_key, noise_fit).reports()


def _check_models(models):
    models = tuple(models)
    unknown = set(models) - set(MODELS)
    if unknown or not models:
        raise ValueError(f"models must be a nonempty subset of {MODELS}, got {models}")
    # canonical order keeps report rows stable
    return tuple(m for m in MODELS if m in models)


@dataclass
class GridConfig:
    sample_sizes: tuple = (500, 1000, 2000, 5000)
    censoring_rates: tuple = (0.10, 0.50)
    correlations: tuple = (0.0, 0.8)
    replicates: int = 1000
    master_seed: int = 20240101
    models: tuple = MODELS
    with_ph_test: bool = False
    output_path: str | None = None
    format: str = "csv"
    workers: int = 1
    ph_output_path: str | None = None

    def __post_init__(self):
        self.sample_sizes = tuple(int(n) for n in self.sample_sizes)
        self.censoring_rates = tuple(float(c) for c in self.censoring_rates)
        self.correlations = tuple(float(r) for r in self.correlations)
        self.models = _check_models(self.models)
        if not (self.sample_sizes and self.censoring_rates and self.correlations):
            raise ValueError("grid lists must be nonempty")
        if self.replicates < 1:
            raise ValueError("replicates must be at least 1")
        if self.format not in FORMATS:
            raise ValueError(f"format must be one of {FORMATS}")
        if self.workers < 1:
            raise ValueError("workers must be at least 1")

    def scenarios(self) -> list[ScenarioSpec]:
        """Grid cells in lexicographic order; ``scenario_id`` is the position."""
        cells = product(self.sample_sizes, self.censoring_rates, self.correlations)
        return [
            ScenarioSpec(n=n, censoring_rate=c, rho=r, replicates=self.replicates,
                         master_seed=self.master_seed, scenario_id=i)
            for i, (n, c, r) in enumerate(cells)
        ]

    def ph_path(self) -> Path:
        if self.ph_output_path:
            return Path(self.ph_output_path)
        if self.output_path:
            return Path(self.output_path).with_name("ph_diagnostics.csv")
        return Path("ph_diagnostics.csv")


def _check_writable(path: Path):
    parent = path.parent if str(path.parent) else Path(".")
    if not parent.is_dir():
        raise OSError(f"output directory does not exist: {parent}")
    if path.is_dir():
        raise OSError(f"output path is a directory: {path}")
    if path.exists() and not os.access(path, os.W_OK):
        raise OSError(f"output path is not writable: {path}")
    if not path.exists() and not os.access(parent, os.W_OK):
        raise OSError(f"output directory is not writable: {parent}")


def _pct(x: float) -> str:
    return f"{100 * x:.2f}%"


def _num(x: float) -> str:
    return f"{x:g}"


def format_report(reports, fmt: str = "csv") -> str:
    rows = [
        (r.spec.n, r.spec.censoring_rate, r.spec.rho, r.model, r.sensitivity, r.specificity,
         r.ranking_accuracy, r.replicates, r.nonconverged_total, r.ph_failures)
        for r in reports
    ]
    if fmt == "csv":
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(REPORT_COLUMNS)
        for n, c, rho, m, se, sp, ra, reps, nc, phf in rows:
            writer.writerow([n, _num(c), _num(rho), m, f"{se:.4f}", f"{sp:.4f}", f"{ra:.4f}", reps, nc, phf])
        return buf.getvalue()
    if fmt == "markdown":
        header = ("Sample Size", "Censoring Rate", "True Feature Correlation", "Model",
                  "Feature Selection Sensitivity", "Feature Selection Specificity",
                  "Accuracy of Effect Size Ranking", "Replicates", "Nonconverged", "PH Failures")
        lines = ["| " + " | ".join(header) + " |", "|" + "---|" * len(header)]
        for n, c, rho, m, se, sp, ra, reps, nc, phf in rows:
            cells = (str(n), f"{100 * c:g}%", _num(rho), MODEL_LABELS[m], _pct(se), _pct(sp),
                     _pct(ra), str(reps), str(nc), str(phf))
            lines.append("| " + " | ".join(cells) + " |")
        return "\n".join(lines) + "\n"
    raise ValueError(f"format must be one of {FORMATS}")


def format_ph_report(summaries) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(PH_COLUMNS)
    for s in summaries:
        writer.writerow([s.scenario_id, s.feature_id, _num(s.true_effect), f"{s.mean_chisq:.6f}",
                         f"{s.rejection_rate:.4f}", s.failure_count])
    return buf.getvalue()


def run_grid(config: GridConfig, progress=None):
    """Run every scenario of ``config`` and write the report.

    The output path is checked before any simulation starts.  Without an
    output path the report goes to standard output.  ``progress`` is an
    optional callable receiving one status line per finished scenario.

    Returns
    -------
    reports : list of ScenarioReport
    text : str
        The emitted report.
    """
    out = Path(config.output_path) if config.output_path else None
    if out is not None:
        _check_writable(out)
    if config.with_ph_test:
        _check_writable(config.ph_path())

    reports, ph_rows = [], []
    pool = ProcessPoolExecutor(max_workers=config.workers) if config.workers > 1 else None
    try:
        for spec in config.scenarios():
            run = simulate_scenario(spec, config.models, config.with_ph_test, config.workers,
                                    executor=pool)
            reports.extend(run.reports())
            if config.with_ph_test:
                ph_rows.extend(run.ph_summary())
            if progress is not None:
                progress(f"scenario {spec.scenario_id}: n={spec.n} censoring={spec.censoring_rate:g} "
                         f"rho={spec.rho:g} done ({spec.replicates} replicates)")
    finally:
        if pool is not None:
            pool.shutdown()

    text = format_report(reports, config.format)
    if out is not None:
        out.write_text(text)
    else:
        sys.stdout.write(text)
    if config.with_ph_test:
        config.ph_path().write_text(format_ph_report(ph_rows))
    return reports, text
