"""Experiment configuration, sweeps and report emission."""

from .config import CircuitSpec, ExperimentConfig, load_config, parse_config
from .report import emit_report, load_report
from .sweeps import (SweepReport, run_confidentiality_sweep, run_integrity_sweep,
                     socket_transport_factory)

__all__ = [
    "CircuitSpec", "ExperimentConfig", "SweepReport", "emit_report", "load_config",
    "load_report", "parse_config", "run_confidentiality_sweep", "run_integrity_sweep",
    "socket_transport_factory",
]
