"""Simulation and closed-form analysis of binary coherent-state receivers."""

from .analytic import (
    ReceiverErrorCurve,
    dolinar_control,
    dolinar_cost,
    dolinar_error,
    helstrom_bound,
    kennedy_error,
    sh_error,
    sh_optimal_theta,
)
from .detector import ClickRecord, ClickSource, DetectorModel, RateFunction
from .montecarlo import (
    ErrorEstimate,
    TrialConfig,
    analytic_reference,
    run_trials,
    sweep,
    wilson_interval,
)
from .presets import PRESETS, ExperimentPreset
from .receivers import (
    DolinarTrajectory,
    FeedbackModel,
    Hypothesis,
    dolinar_run,
    log_likelihood_ratio,
    reconstruct_cost,
)
from .signal import BinaryAlphabet, SignalEnvelope

__version__ = "0.1.0"

__all__ = [
    "BinaryAlphabet",
    "ClickRecord",
    "ClickSource",
    "DetectorModel",
    "DolinarTrajectory",
    "ErrorEstimate",
    "ExperimentPreset",
    "FeedbackModel",
    "Hypothesis",
    "PRESETS",
    "RateFunction",
    "ReceiverErrorCurve",
    "SignalEnvelope",
    "TrialConfig",
    "analytic_reference",
    "dolinar_control",
    "dolinar_cost",
    "dolinar_error",
    "dolinar_run",
    "helstrom_bound",
    "kennedy_error",
    "log_likelihood_ratio",
    "reconstruct_cost",
    "run_trials",
    "sh_error",
    "sh_optimal_theta",
    "sweep",
    "wilson_interval",
    "__version__",
]
