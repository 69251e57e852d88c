"""Command-line harness: ``bigjump CONFIG [--key VALUE ...]``."""

from .config import ConfigError, ExperimentConfig, parse_config, serialize_config
from .plot import Series, emit_plot, qq_slope
from .run import RunRecord, main, run

__all__ = ["ConfigError", "ExperimentConfig", "parse_config", "serialize_config", "Series", "emit_plot",
           "qq_slope", "RunRecord", "main", "run"]
