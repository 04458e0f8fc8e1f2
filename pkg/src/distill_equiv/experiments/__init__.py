from .config import ExperimentConfig, load_config
from .data import SyntheticDataset, generate_dataset, probe_batch
from .report import write_report
from .runner import run_experiment

__all__ = [
    "ExperimentConfig",
    "load_config",
    "SyntheticDataset",
    "generate_dataset",
    "probe_batch",
    "write_report",
    "run_experiment",
]
