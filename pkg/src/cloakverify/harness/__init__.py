"""Scenario configs, grid runner, exports and the command-line interface."""

from .config import ConfigError, ScenarioConfig, load_config, parse, resolve_config, serialize
from .export import export
from .runner import ReportBundle, convergence_study, run_scenario

__all__ = ["ConfigError", "ReportBundle", "ScenarioConfig", "convergence_study", "export", "load_config",
           "parse", "resolve_config", "run_scenario", "serialize"]
