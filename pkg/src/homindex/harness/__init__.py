"""Experiment configuration, orchestration, CLI and acceptance suite."""

from .config import ExperimentConfig, config_from_dict, load_config
from .runner import SweepRecord, run, run_experiment

__all__ = ["ExperimentConfig", "SweepRecord", "config_from_dict", "load_config", "run", "run_experiment"]
