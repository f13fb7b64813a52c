"""Learned external-wrench prediction and NP-MPC for a quadrotor carrying a slung payload."""

from ._npred import (
    Config,
    ConfigError,
    FlightLog,
    LabeledSample,
    Model,
    NumericalError,
    SchemaError,
    certify,
    evaluate,
    fit_ab,
    label,
    labels_to_arrays,
    read_flight_log,
    rmse_wrench,
    rollout_backward,
    rollout_forward,
    run_closed_loop,
    simulate,
    train,
)

__all__ = [
    "Config",
    "ConfigError",
    "FlightLog",
    "LabeledSample",
    "Model",
    "NumericalError",
    "SchemaError",
    "certify",
    "evaluate",
    "fit_ab",
    "label",
    "labels_to_arrays",
    "read_flight_log",
    "rmse_wrench",
    "rollout_backward",
    "rollout_forward",
    "run_closed_loop",
    "simulate",
    "train",
]
