"""Python bindings for the cogmac simulator, feature pipeline, models and controller."""

from ._cogmac import (
    ConfigError,
    ContractViolation,
    Dataset,
    InterferencePattern,
    Model,
    SchemaError,
    SimConfig,
    Trace,
    TrainingError,
    build_dataset,
    cross_validate,
    replay,
    rmse,
    simulate,
    train,
)

__all__ = [
    "ConfigError",
    "ContractViolation",
    "Dataset",
    "InterferencePattern",
    "Model",
    "SchemaError",
    "SimConfig",
    "Trace",
    "TrainingError",
    "build_dataset",
    "cross_validate",
    "replay",
    "rmse",
    "simulate",
    "train",
]
