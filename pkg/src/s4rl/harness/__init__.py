"""Experiment runner: configs, seeded runs, sweeps and report emission."""

from .config import DatasetRecipe, ExperimentConfig, dump_config, load_config, parse_config
from .run import (RunMetrics, evaluate, materialize_dataset, read_run_metrics, resolve_dataset, run,
                  run_seed)
from .sweep import (Cell, SweepReport, agent_variant, emit, parse_csv, report_from_dir,
                    sweep_augmentations, sweep_limited_data)

__all__ = [
    "Cell", "DatasetRecipe", "ExperimentConfig", "RunMetrics", "SweepReport", "agent_variant",
    "dump_config", "emit", "evaluate", "load_config", "materialize_dataset", "parse_config",
    "parse_csv", "read_run_metrics", "report_from_dir", "resolve_dataset", "run", "run_seed",
    "sweep_augmentations", "sweep_limited_data",
]
