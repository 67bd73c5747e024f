"""Dataset-level screening decisions and their aggregation.

A dataset counts as *positive* only when every observed true feature is
selected, as *negative* only when no noise feature is selected, and as
*accurately ranked* only when the observed true features come out in exactly
the order of their true effects.  Each dataset is one analysis unit.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

__all__ = [
    "MODELS",
    "MODEL_LABELS",
    "ALPHA",
    "ScreeningOutcome",
    "Tally",
    "ScenarioReport",
    "dataset_positive",
    "dataset_negative",
    "ranking_accurate",
    "aggregate",
]

MODELS = ("multivariate_cox", "univariate_cox", "logistic", "gaussian")
MODEL_LABELS = {
    "multivariate_cox": "Multivariate Cox",
    "univariate_cox": "Univariate Cox",
    "logistic": "Logistic Regression",
    "gaussian": "Gaussian Regression",
}
ALPHA = 0.05


@dataclass
class ScreeningOutcome:
    """Per-feature inference of one model on one dataset.

    ``p_values`` and ``statistics`` are indexed by screened column; entries a
    model did not estimate are NaN.  ``true_columns`` and ``noise_columns``
    are 0-based column indices, ``observed_effects`` is aligned with
    ``true_columns``.
    """

    model: str
    p_values: np.ndarray
    statistics: np.ndarray
    true_columns: np.ndarray
    noise_columns: np.ndarray
    observed_effects: np.ndarray
    nonconverged_count: int = 0
    ph_failures: int = 0

    def __post_init__(self):
        if self.model not in MODELS:
            raise ValueError(f"unknown model {self.model!r}")
        self.p_values = np.asarray(self.p_values, dtype=float)
        self.statistics = np.asarray(self.statistics, dtype=float)
        self.true_columns = np.asarray(self.true_columns, dtype=int)
        self.noise_columns = np.asarray(self.noise_columns, dtype=int)
        self.observed_effects = np.asarray(self.observed_effects, dtype=float)

    @property
    def selected(self) -> np.ndarray:
        # NaN compares False: unestimated columns are never selected
        return self.p_values < ALPHA


def dataset_positive(outcome: ScreeningOutcome) -> bool:
    return bool(np.all(outcome.selected[outcome.true_columns]))


def dataset_negative(outcome: ScreeningOutcome) -> bool:
    return not bool(np.any(outcome.selected[outcome.noise_columns]))


def ranking_accurate(outcome: ScreeningOutcome, key: str = "p_value") -> bool:
    """Whether the observed true features are ranked in true-effect order.

    With ``key="p_value"`` features are ordered by increasing p-value, with
    ``key="statistic"`` by decreasing Wald statistic.  Any tie among the true
    features (including p-values that underflowed to 0.0) is scored as an
    inaccurate ranking, as is a missing value.
    """
    cols = outcome.true_columns
    if key == "p_value":
        score = -outcome.p_values[cols]
    elif key == "statistic":
        score = np.abs(outcome.statistics[cols])
    else:
        raise ValueError(f"key must be 'p_value' or 'statistic', got {key!r}")
    if np.any(np.isnan(score)):
        return False
    by_effect = np.argsort(-outcome.observed_effects, kind="stable")
    ordered = score[by_effect]
    # strictly decreasing scores along decreasing effects
    return bool(np.all(ordered[:-1] > ordered[1:]))


@dataclass
class Tally:
    """Integer counts behind one report row; merging is plain addition."""

    replicates: int = 0
    positives: int = 0
    negatives: int = 0
    accurate: int = 0
    nonconverged: int = 0
    ph_failures: int = 0

    def add(self, outcome: ScreeningOutcome, ranking_key: str = "p_value") -> "Tally":
        self.replicates += 1
        self.positives += dataset_positive(outcome)
        self.negatives += dataset_negative(outcome)
        self.accurate += ranking_accurate(outcome, ranking_key)
        self.nonconverged += outcome.nonconverged_count
        self.ph_failures += outcome.ph_failures
        return self

    def merge(self, other: "Tally") -> "Tally":
        return Tally(
            self.replicates + other.replicates,
            self.positives + other.positives,
            self.negatives + other.negatives,
            self.accurate + other.accurate,
            self.nonconverged + other.nonconverged,
            self.ph_failures + other.ph_failures,
        )


@dataclass
class ScenarioReport:
    spec: object
    model: str
    tally: Tally = field(default_factory=Tally)

    @property
    def replicates(self) -> int:
        return self.tally.replicates

    def _rate(self, count: int) -> Fraction:
        return Fraction(count, self.tally.replicates)

    @property
    def sensitivity(self) -> float:
        return float(self._rate(self.tally.positives))

    @property
    def specificity(self) -> float:
        return float(self._rate(self.tally.negatives))

    @property
    def ranking_accuracy(self) -> float:
        return float(self._rate(self.tally.accurate))

    @property
    def nonconverged_total(self) -> int:
        return self.tally.nonconverged

    @property
    def ph_failures(self) -> int:
        return self.tally.ph_failures


def aggregate(outcomes, spec=None, ranking_key: str = "p_value") -> ScenarioReport:
    """Reduce outcomes of one model on one scenario to a report row."""
    outcomes = list(outcomes)
    if not outcomes:
        raise ValueError("cannot aggregate an empty collection of outcomes")
    models = {o.model for o in outcomes}
    if len(models) != 1:
        raise ValueError(f"outcomes mix models: {sorted(models)}")
    tally = Tally()
    for o in outcomes:
        tally.add(o, ranking_key)
    return ScenarioReport(spec, models.pop(), tally)
