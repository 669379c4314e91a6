"""Config-driven studies and the command-line harness."""

from crowdpulse.experiments.config import ConfigError, ExperimentConfig, default_config, load_config, parse_config
from crowdpulse.experiments.studies import (
    SequenceCheck,
    SpeedLimitFit,
    compose_sequence,
    filter_comparison,
    filter_study,
    fit_speed_limit,
    optimize_wahwah,
    robustness_error,
    run_synthesis,
    simulate,
    sweep_gate_time,
    sweep_robustness,
    sweep_speed_limit,
    synthesize,
    wahwah_error,
    wahwah_study,
)

__all__ = [
    "ConfigError",
    "ExperimentConfig",
    "SequenceCheck",
    "SpeedLimitFit",
    "compose_sequence",
    "default_config",
    "filter_comparison",
    "filter_study",
    "fit_speed_limit",
    "load_config",
    "optimize_wahwah",
    "parse_config",
    "robustness_error",
    "run_synthesis",
    "simulate",
    "sweep_gate_time",
    "sweep_robustness",
    "sweep_speed_limit",
    "synthesize",
    "wahwah_error",
    "wahwah_study",
]
