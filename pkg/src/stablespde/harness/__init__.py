"""Scenario files, experiment registry, CLI and report persistence."""

from .config import RunConfig, build_scenario, load_config, parse_config, shipped_scenario
from .experiments import EXPERIMENTS, ExperimentResult, resolve_settings

__all__ = ["EXPERIMENTS", "ExperimentResult", "RunConfig", "build_scenario", "load_config",
           "parse_config", "resolve_settings", "shipped_scenario"]
