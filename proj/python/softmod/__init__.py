"""Soft-modular multi-task SAC: environments, policies, training and evaluation."""

from ._core import (
    ACTION_DIM,
    HORIZON,
    OBSERVATION_DIM,
    ConfigError,
    ContractError,
    DimensionError,
    Env,
    SoftModularPolicy,
    TrainingError,
    compare,
    evaluate,
    evaluate_expert,
    export_routing_trace,
    resolve_config,
    suite_tasks,
    task_weights,
    train,
)

__all__ = [
    "ACTION_DIM",
    "HORIZON",
    "OBSERVATION_DIM",
    "ConfigError",
    "ContractError",
    "DimensionError",
    "Env",
    "SoftModularPolicy",
    "TrainingError",
    "compare",
    "evaluate",
    "evaluate_expert",
    "export_routing_trace",
    "resolve_config",
    "suite_tasks",
    "task_weights",
    "train",
]
