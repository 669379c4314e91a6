"""Analytic Hanning-window pulses for simultaneous gates on frequency-crowded transmons."""

from crowdpulse.estimators import PulseSynthesizer, WahWahSynthesizer
from crowdpulse.hardware import FilterSpec, apply_filter, retune_amplitudes
from crowdpulse.metrics import (
    SimResult,
    gate_fidelity,
    leakage_error,
    reduced_fidelity,
    virtual_z_fidelity,
)
from crowdpulse.model import GATES, SystemParams, TargetRotation, ghz, mhz, named_target, target_unitary
from crowdpulse.optimizer import Mode, OptimizerConfig, SynthesisContext, multistart_optimize, nelder_mead
from crowdpulse.propagator import Method, PropagationGrid, propagate_field, propagate_pair
from crowdpulse.pulses import ControlField, GaussianShape, HanningShape, WahWahShape

__version__ = "0.1.0"

__all__ = [
    "ControlField",
    "FilterSpec",
    "GATES",
    "GaussianShape",
    "HanningShape",
    "Method",
    "Mode",
    "OptimizerConfig",
    "PropagationGrid",
    "PulseSynthesizer",
    "SimResult",
    "SynthesisContext",
    "SystemParams",
    "TargetRotation",
    "WahWahShape",
    "WahWahSynthesizer",
    "apply_filter",
    "gate_fidelity",
    "ghz",
    "leakage_error",
    "mhz",
    "multistart_optimize",
    "named_target",
    "nelder_mead",
    "propagate_field",
    "propagate_pair",
    "reduced_fidelity",
    "retune_amplitudes",
    "target_unitary",
    "virtual_z_fidelity",
]
