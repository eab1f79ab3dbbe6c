"""Experiment harness: configuration, records and the command-line runners."""
from .config import Config, load_config, parse_config
from .records import ExperimentRecord, read_records

__all__ = ["Config", "ExperimentRecord", "load_config", "parse_config", "read_records"]
