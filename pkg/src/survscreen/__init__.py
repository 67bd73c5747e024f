"""Simulation benchmark and fitting engine for screening features against
right-censored time-to-event outcomes.

Four screening models are compared: a joint Cox model, univariate Cox
models, logistic regression of the event indicator and Gaussian regression
of log follow-up time.
"""
from .cox import CoxFit, SurvivalData, fit_cox, multivariate_cox_fit, univariate_cox_screen
from .datagen import ScenarioSpec, SimDataset, dump_dataset, generate_dataset
from .linear_models import fit_logistic, fit_ols, gaussian_screen, logistic_screen
from .metrics import MODELS, ScenarioReport, ScreeningOutcome, aggregate
from .numerics import derive_stream
from .ph import PhTestResult, ph_test, schoenfeld_residuals
from .pipeline import PipelineResult, ingest_csv, recommended_pipeline
from .runner import GridConfig, run_grid, run_scenario

__version__ = "0.1.0"

__all__ = [
    "CoxFit", "SurvivalData", "fit_cox", "multivariate_cox_fit", "univariate_cox_screen",
    "ScenarioSpec", "SimDataset", "dump_dataset", "generate_dataset",
    "fit_logistic", "fit_ols", "gaussian_screen", "logistic_screen",
    "MODELS", "ScenarioReport", "ScreeningOutcome", "aggregate",
    "derive_stream",
    "PhTestResult", "ph_test", "schoenfeld_residuals",
    "PipelineResult", "ingest_csv", "recommended_pipeline",
    "GridConfig", "run_grid", "run_scenario",
]
