from airfl.expcli.config import ExperimentConfig, default_config, load_config, parse_config_text, with_overrides
from airfl.expcli.dataset import Dataset, load_dataset
from airfl.expcli.experiment import ExperimentResult, build_scenario, run_experiment
from airfl.expcli.idx import encode_idx, parse_idx, read_idx, write_idx
from airfl.expcli.verify import SUITES, run_suite

__all__ = [
    "SUITES",
    "Dataset",
    "ExperimentConfig",
    "ExperimentResult",
    "build_scenario",
    "default_config",
    "encode_idx",
    "load_config",
    "load_dataset",
    "parse_config_text",
    "parse_idx",
    "read_idx",
    "run_experiment",
    "run_suite",
    "with_overrides",
    "write_idx",
]
