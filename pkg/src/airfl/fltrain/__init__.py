from airfl.fltrain.bound import ConvexityParams, bound_trajectory, convergence_bound, least_squares_optimum
from airfl.fltrain.data import DataShard, class_balanced_subsample, pool_shards, shard_noniid
from airfl.fltrain.loop import (
    Aggregation,
    FlConfig,
    RoundRecord,
    RoundTrace,
    Scenario,
    aggregate_ideal,
    global_update,
    round_channels,
    run_fl,
)
from airfl.fltrain.model import LinearModel, LossKind, evaluate_accuracy, global_loss, local_gradient

__all__ = [
    "Aggregation",
    "ConvexityParams",
    "DataShard",
    "FlConfig",
    "LinearModel",
    "LossKind",
    "RoundRecord",
    "RoundTrace",
    "Scenario",
    "aggregate_ideal",
    "bound_trajectory",
    "class_balanced_subsample",
    "convergence_bound",
    "evaluate_accuracy",
    "global_loss",
    "global_update",
    "least_squares_optimum",
    "local_gradient",
    "pool_shards",
    "round_channels",
    "run_fl",
    "shard_noniid",
]
