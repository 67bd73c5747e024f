"""Gaussian-first feature screening for right-censored data, and CSV ingestion.

Feature indices in this module are 1-based, matching the ``f1..fk`` column
names written by :func:`survscreen.datagen.dump_dataset`.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .cox import CoxDataError, SingularInformationError, multivariate_cox_fit
from .linear_models import RankDeficientError, gaussian_screens
from .metrics import ALPHA

__all__ = [
    "CsvDataset",
    "CsvFormatError",
    "RowError",
    "RefitError",
    "PipelineResult",
    "ingest_csv",
    "recommended_pipeline",
]


@dataclass(frozen=True)
class RowError:
    row: int  # 1-based data row, header excluded
    column: str
    message: str

    def __str__(self):
        return f"row {self.row}, column {self.column!r}: {self.message}"


class CsvFormatError(ValueError):
    """Raised by :func:`ingest_csv`; ``errors`` lists every offending cell."""

    def __init__(self, path, errors, header_problem: str | None = None):
        self.path = str(path)
        self.errors = list(errors)
        self.header_problem = header_problem
        if header_problem:
            msg = f"{self.path}: {header_problem}"
        else:
            shown = "; ".join(str(e) for e in self.errors[:10])
            more = len(self.errors) - 10
            msg = f"{self.path}: {shown}" + (f" (+{more} more)" if more > 0 else "")
        super().__init__(msg)

    @property
    def rows(self) -> list[int]:
        return sorted({e.row for e in self.errors})


@dataclass
class CsvDataset:
    X: np.ndarray
    time: np.ndarray
    event: np.ndarray
    feature_names: tuple = ()

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def n_features(self) -> int:
        return self.X.shape[1]


def _parse_float(text: str):
    try:
        v = float(text)
    except ValueError:
        return None
    return v if math.isfinite(v) else None


def ingest_csv(path) -> CsvDataset:
    """Read a ``time,event,<features...>`` CSV into a dataset.

    Every row is checked before anything is returned; all problems are
    reported together, each tagged with its 1-based data row.

    Raises
    ------
    CsvFormatError
        Bad header, wrong field count, missing or non-numeric values,
        nonpositive times or events outside {0, 1}.
    OSError
        The file cannot be read.
    """
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise CsvFormatError(path, [], "file is empty")
        header = [h.strip() for h in header]
        if len(header) < 3 or header[0] != "time" or header[1] != "event":
            raise CsvFormatError(path, [], "header must be time,event,<feature columns...>")
        names = tuple(header[2:])
        errors, rows = [], []
        for i, fields in enumerate(reader, start=1):
            if not fields or all(not f.strip() for f in fields):
                continue
            if len(fields) != len(header):
                errors.append(RowError(i, "*", f"expected {len(header)} fields, got {len(fields)}"))
                continue
            values = []
            for name, raw in zip(header, fields):
                raw = raw.strip()
                if raw == "" or raw.upper() in ("NA", "NAN"):
                    errors.append(RowError(i, name, "missing value"))
                    values.append(None)
                    continue
                v = _parse_float(raw)
                if v is None:
                    errors.append(RowError(i, name, f"not a finite number: {raw!r}"))
                values.append(v)
            t, e = values[0], values[1]
            if t is not None and t <= 0:
                errors.append(RowError(i, "time", f"time must be positive, got {fields[0].strip()}"))
            if e is not None and e not in (0.0, 1.0):
                errors.append(RowError(i, "event", f"event must be 0 or 1, got {fields[1].strip()}"))
            rows.append(values)
    if errors:
        raise CsvFormatError(path, errors)
    if not rows:
        raise CsvFormatError(path, [], "no data rows")
    data = np.array(rows, dtype=float)
    return CsvDataset(X=data[:, 2:], time=data[:, 0], event=data[:, 1].astype(np.int8),
                      feature_names=names)


@dataclass(frozen=True)
class RefitError:
    kind: str
    message: str


@dataclass
class PipelineResult:
    """Outcome of :func:`recommended_pipeline`.

    ``primary`` names the ranking to report first: ``"cox_refit"`` for
    correlated features when the refit succeeded, ``"gaussian"`` otherwise.
    """

    selected_features: list = field(default_factory=list)
    gaussian_ranking: list = field(default_factory=list)
    cox_refit_ranking: list | None = None
    cox_refit_error: RefitError | None = None
    primary: str = "gaussian"
    gaussian_p_values: dict = field(default_factory=dict)
    cox_p_values: dict = field(default_factory=dict)

    @property
    def primary_ranking(self) -> list:
        if self.primary == "cox_refit":
            return list(self.cox_refit_ranking)
        return list(self.gaussian_ranking)


def _rank(features, p_values, strengths) -> list:
    # ascending p; underflowed p-values fall back to the larger statistic
    return sorted(features, key=lambda f: (p_values[f], -strengths[f], f))


def recommended_pipeline(ds, correlated: bool = False, alpha: float = ALPHA) -> PipelineResult:
    """Screen with Gaussian regressions of log time, then refit a joint Cox model.

    1. Regress ``log(time)`` on each feature with the event indicator as a
       covariate; keep features with ``p < alpha``.
    2. Rank the kept features by Gaussian p-value.
    3. Refit a multivariate Cox model on the kept features and rank them by
       its Wald p-values.

    With ``correlated=True`` the Cox ranking is primary and the Gaussian one
    is the sensitivity analysis; otherwise the roles swap.  A failed refit
    leaves ``cox_refit_ranking`` as ``None`` with the reason in
    ``cox_refit_error``.
    """
    if ds.n_features < 1:
        raise ValueError("dataset has no features")
    screens = gaussian_screens(ds.time, ds.event, ds.X)
    g_p = {j + 1: s.p_value for j, s in enumerate(screens)}
    g_abs = {j + 1: abs(s.statistic) for j, s in enumerate(screens)}
    selected = [f for f in g_p if g_p[f] < alpha]
    result = PipelineResult(selected_features=selected, gaussian_p_values=g_p)
    if not selected:
        result.cox_refit_ranking = []
        return result
    result.gaussian_ranking = _rank(selected, g_p, g_abs)
    try:
        fit = multivariate_cox_fit(ds, selected)
        if not fit.converged:
            raise ArithmeticError("Newton iterations did not converge")
    except (CoxDataError, SingularInformationError, RankDeficientError, FloatingPointError,
            ArithmeticError, np.linalg.LinAlgError) as exc:
        result.cox_refit_error = RefitError(type(exc).__name__, str(exc))
        return result
    c_p = {f: float(p) for f, p in zip(selected, fit.p_values)}
    c_stat = {f: float(s) for f, s in zip(selected, fit.statistics)}
    result.cox_p_values = c_p
    result.cox_refit_ranking = _rank(selected, c_p, c_stat)
    if correlated:
        result.primary = "cox_refit"
    return result
