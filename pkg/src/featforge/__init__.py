"""Symbolic feature synthesis, sparse linear selection, interpretable fits."""

from .errors import (
    ConvergenceError,
    DataError,
    FeatforgeError,
    MissingColumnError,
    SchemaError,
    VersionError,
)
from .expr import FeatureExpr, evaluate, parse_key, pretty, simplify
from .dimensions import Dimension, DimensionMatrix, parse_unit, pi_groups
from .synthesis import EngineeringConfig, FeaturePool, engineer
from .selection import (
    SelectionConfig,
    SelectionResult,
    correlation_filter,
    noise_filter,
    redundancy_filter,
    select_features,
)
from .sparse import lasso_cv, lasso_fit, lasso_path, r2_score, ridge_fit, standardize
from .dataio import (
    Dataset,
    DatasetManifest,
    Schema,
    fetch_dataset,
    load_csv,
    load_dataset,
    load_model,
    load_schema,
    save_model,
)
from .model import CoefficientReport, FittedModel, coefficient_report, fit, fit_transform

__version__ = "0.1.0"

__all__ = [
    "CoefficientReport",
    "ConvergenceError",
    "DataError",
    "Dataset",
    "DatasetManifest",
    "Dimension",
    "DimensionMatrix",
    "EngineeringConfig",
    "FeatforgeError",
    "FeaturePool",
    "FeatureExpr",
    "FittedModel",
    "MissingColumnError",
    "Schema",
    "SchemaError",
    "SelectionConfig",
    "SelectionResult",
    "VersionError",
    "coefficient_report",
    "correlation_filter",
    "engineer",
    "evaluate",
    "fetch_dataset",
    "fit",
    "fit_transform",
    "lasso_cv",
    "lasso_fit",
    "lasso_path",
    "load_csv",
    "load_dataset",
    "load_model",
    "load_schema",
    "noise_filter",
    "parse_key",
    "parse_unit",
    "pi_groups",
    "pretty",
    "r2_score",
    "redundancy_filter",
    "ridge_fit",
    "save_model",
    "select_features",
    "simplify",
    "standardize",
    "__version__",
]
