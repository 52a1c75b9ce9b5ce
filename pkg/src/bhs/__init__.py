"""Empirical-Bayes hybrid shrinkage for winner's-curse correction."""

from .errors import (
    ConfigurationError,
    DegenerateDenominatorError,
    EmptySelectionError,
    InvalidInputError,
    NotFoundError,
    StoreConflictError,
    UnsupportedHyperparameterError,
)
from .estimators import (
    UnitData,
    aggregate,
    face_value_estimate,
    global_posterior,
    hybrid_posterior,
    shrinkage_gap,
    shrinkage_posterior,
)
from .hyperfit import CuratedObservation, fit_tau, gibbs_lambda_oracle, lambda_conditional, lambda_mode
from .models import AggregateEstimate, ExperimentSummary, HyperParameters, PosteriorSummary

__version__ = "0.1.0"

__all__ = [
    "AggregateEstimate",
    "ConfigurationError",
    "CuratedObservation",
    "DegenerateDenominatorError",
    "EmptySelectionError",
    "ExperimentSummary",
    "HyperParameters",
    "InvalidInputError",
    "NotFoundError",
    "PosteriorSummary",
    "StoreConflictError",
    "UnitData",
    "UnsupportedHyperparameterError",
    "aggregate",
    "face_value_estimate",
    "fit_tau",
    "gibbs_lambda_oracle",
    "global_posterior",
    "hybrid_posterior",
    "lambda_conditional",
    "lambda_mode",
    "shrinkage_gap",
    "shrinkage_posterior",
]
