"""Simulated time-to-event datasets drawn from a multivariate Cox model.

Every dataset follows the same recipe:

1. draw a baseline scale ``theta`` uniformly from {2.0, 2.2, ..., 40.0};
2. draw 10 true features from an equicorrelated unit-variance Gaussian;
3. draw event times with cumulative baseline hazard ``t / theta`` and
   hazard ratios ``exp(effects)``;
4. censor each subject independently with probability ``censoring_rate``,
   replacing its time by a uniform fraction of the event time;
5. keep a random 5 of the 10 true features and append 5 noise features.

The columns the analyst sees are ``X[:, :5]`` (observed true features, in
random order) and ``X[:, 5:]`` (noise).
"""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .numerics import RngStream, cholesky, derive_stream, equicorrelation, sample_mvn

__all__ = [
    "DEFAULT_SAMPLE_SIZES",
    "DEFAULT_CENSORING_RATES",
    "DEFAULT_CORRELATIONS",
    "BASELINE_SCALE_GRID",
    "ScenarioSpec",
    "SimDataset",
    "draw_baseline_scale",
    "generate_true_features",
    "generate_event_times",
    "apply_censoring",
    "generate_dataset",
    "dump_dataset",
]

DEFAULT_SAMPLE_SIZES = (500, 1000, 2000, 5000)
DEFAULT_CENSORING_RATES = (0.10, 0.50)
DEFAULT_CORRELATIONS = (0.0, 0.8)

# 10:200 / 5
BASELINE_SCALE_GRID = np.arange(10, 201) / 5.0

_MAX_TIE_REDRAWS = 100


@dataclass(frozen=True)
class ScenarioSpec:
    """One cell of the simulation grid."""

    n: int
    censoring_rate: float
    rho: float
    replicates: int = 1000
    master_seed: int = 0
    scenario_id: int = 0
    n_true: int = 10
    n_observed_true: int = 5
    n_noise: int = 5
    effects: tuple = field(default=tuple(float(k) for k in range(1, 11)))

    def __post_init__(self):
        if self.n < 50:
            raise ValueError(f"sample size must be at least 50, got {self.n}")
        if not 0.0 <= self.censoring_rate < 1.0:
            raise ValueError("censoring_rate must lie in [0, 1)")
        if not 0.0 <= self.rho < 1.0:
            raise ValueError("rho must lie in [0, 1)")
        if self.replicates < 1:
            raise ValueError("replicates must be at least 1")
        if len(self.effects) != self.n_true:
            raise ValueError("effects must have length n_true")
        if any(b <= a for a, b in zip(self.effects, self.effects[1:])):
            raise ValueError("effects must be strictly increasing")
        if not 1 <= self.n_observed_true <= self.n_true:
            raise ValueError("n_observed_true must lie in 1..n_true")
        if self.n_noise < 0:
            raise ValueError("n_noise must be nonnegative")

    @property
    def n_features(self) -> int:
        return self.n_observed_true + self.n_noise


@dataclass
class SimDataset:
    """One generated dataset.

    ``observed_true_ids`` are 1-based ids into the true effect vector, aligned
    with the first ``len(observed_true_ids)`` columns of ``X``.
    """

    X: np.ndarray
    time: np.ndarray
    event: np.ndarray
    observed_true_ids: np.ndarray
    observed_effects: np.ndarray
    theta: float
    seed: tuple = ()

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def n_features(self) -> int:
        return self.X.shape[1]

    @property
    def n_observed_true(self) -> int:
        return len(self.observed_true_ids)

    @property
    def true_columns(self) -> np.ndarray:
        return np.arange(self.n_observed_true)

    @property
    def noise_columns(self) -> np.ndarray:
        return np.arange(self.n_observed_true, self.n_features)


def draw_baseline_scale(rng: RngStream) -> float:
    return float(BASELINE_SCALE_GRID[rng.integers(len(BASELINE_SCALE_GRID))])


def generate_true_features(rng: RngStream, n: int, rho: float, d: int = 10) -> np.ndarray:
    if not 0.0 <= rho < 1.0:
        raise ValueError("rho must lie in [0, 1)")
    return sample_mvn(rng, cholesky(equicorrelation(d, rho)), n)


def generate_event_times(X_true, effects, theta: float, rng: RngStream) -> np.ndarray:
    """Inverse-CDF draw of exponential-baseline Cox event times.

    ``T = theta * (-log U) * exp(-effects . x)``, so the hazard is
    ``exp(effects . x) / theta``.  Exact ties among the draws are redrawn.
    """
    if theta <= 0:
        raise ValueError("theta must be positive")
    X_true = np.asarray(X_true, dtype=float)
    scale = theta * np.exp(-(X_true @ np.asarray(effects, dtype=float)))
    times = scale * -np.log(rng.random(len(scale)))
    for _ in range(_MAX_TIE_REDRAWS):
        tied = _tied_mask(times)
        if not tied.any():
            return times
        times[tied] = scale[tied] * -np.log(rng.random(int(tied.sum())))
    raise RuntimeError("could not break ties among generated times")


def _tied_mask(values: np.ndarray) -> np.ndarray:
    order = np.argsort(values, kind="stable")
    dup = np.zeros(len(values), dtype=bool)
    same = values[order][1:] == values[order][:-1]
    # flag every member of a tie group except its first
    dup[order[1:][same]] = True
    # zero times (exp underflow) are regenerated as well
    dup |= ~(values > 0) | ~np.isfinite(values)
    return dup


def apply_censoring(event_times, rate: float, rng: RngStream):
    """Censor each subject with probability ``rate`` at a uniform fraction of its event time.

    Returns
    -------
    time, event : ndarray
        Observed follow-up times and 0/1 event flags.
    """
    if not 0.0 <= rate < 1.0:
        raise ValueError("censoring rate must lie in [0, 1)")
    t = np.asarray(event_times, dtype=float)
    censored = rng.random(len(t)) < rate
    fraction = rng.random(len(t))
    time = np.where(censored, fraction * t, t)
    for _ in range(_MAX_TIE_REDRAWS):
        tied = _tied_mask(time) & censored
        if not tied.any():
            break
        time[tied] = rng.random(int(tied.sum())) * t[tied]
    event = (~censored).astype(np.int8)
    return time, event


def generate_dataset(spec: ScenarioSpec, replicate_index: int) -> SimDataset:
    """Generate replicate ``replicate_index`` of ``spec``; deterministic in both arguments."""
    if not 0 <= replicate_index < spec.replicates:
        raise ValueError(f"replicate_index must lie in [0, {spec.replicates})")
    rng = derive_stream(spec.master_seed, spec.scenario_id, replicate_index)
    effects = np.asarray(spec.effects, dtype=float)

    theta = draw_baseline_scale(rng)
    X_true = generate_true_features(rng, spec.n, spec.rho, spec.n_true)
    event_times = generate_event_times(X_true, effects, theta, rng)
    time, event = apply_censoring(event_times, spec.censoring_rate, rng)

    kept = rng.permutation(spec.n_true)[: spec.n_observed_true]
    if spec.n_noise:
        noise = generate_true_features(rng, spec.n, spec.rho, spec.n_noise)
        X = np.hstack([X_true[:, kept], noise])
    else:
        X = X_true[:, kept].copy()
    return SimDataset(
        X=X,
        time=time,
        event=event,
        observed_true_ids=kept + 1,
        observed_effects=effects[kept],
        theta=theta,
        seed=(spec.master_seed, spec.scenario_id, replicate_index),
    )


def dump_dataset(ds: SimDataset, path) -> Path:
    """Write ``ds`` as ``time,event,f1..fk`` CSV plus a ``.meta.json`` sidecar.

    Floats are written with ``repr`` so the round trip is exact.
    """
    path = Path(path)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["time", "event"] + [f"f{j + 1}" for j in range(ds.n_features)])
        for i in range(ds.n):
            writer.writerow(
                [repr(float(ds.time[i])), int(ds.event[i])] + [repr(float(v)) for v in ds.X[i]]
            )
    meta = {
        "observed_true_ids": [int(k) for k in ds.observed_true_ids],
        "observed_effects": [float(b) for b in ds.observed_effects],
        "theta": ds.theta,
        "seed": list(ds.seed),
    }
    path.with_suffix(".meta.json").write_text(json.dumps(meta, indent=2) + "\n")
    return path
