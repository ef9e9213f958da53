"""Deterministic Monte Carlo trial engine.

Every trial owns a counter-derived RNG stream keyed by (run seed, trial
index), so a run's error count is a pure function of its configuration
and seed: chunking, worker count, and scheduling cannot change it.
Trials are dispatched in fixed 4096-trial blocks to whichever kernel
implementation (compiled or pure Python) the package selected at
import; set RECEIVER_SIM_THREADS to fan blocks out across processes.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace

from scipy.stats import norm

from . import _core
from ._core.streams import derive_run_seed
from .analytic import (
    ReceiverErrorCurve,
    SweepVariable,
    dolinar_error,
    kennedy_error,
    sh_error,
    sh_optimal_theta,
)
from .detector import DetectorModel
from .receivers import FeedbackModel, default_amplitude_cap
from .signal import BinaryAlphabet, SignalEnvelope

RECEIVERS = ("kennedy", "sasaki_hirota", "dolinar")
RECEIVER_CODES = {name: i for i, name in enumerate(RECEIVERS)}
CHUNK_TRIALS = 4096
WORKERS_ENV = "RECEIVER_SIM_THREADS"


@dataclass(frozen=True)
class TrialConfig:
    receiver: str
    alphabet: BinaryAlphabet
    detector: DetectorModel
    trials: int
    master_seed: int
    feedback: FeedbackModel | None = None

    def __post_init__(self):
        if self.receiver not in RECEIVERS:
            raise ValueError(f"unknown receiver {self.receiver!r}, expected one of {RECEIVERS}")
        if self.trials < 1:
            raise ValueError(f"trials must be at least 1, got {self.trials}")
        if not 0 <= self.master_seed < 2**64:
            raise ValueError("master_seed must fit in 64 bits")
        if (self.receiver == "dolinar") != (self.feedback is not None):
            raise ValueError("feedback model is required for dolinar and meaningless otherwise")


@dataclass(frozen=True)
class ErrorEstimate:
    trials: int
    errors: int
    p_hat: float
    ci_low: float
    ci_high: float
    confidence: float
    analytic_ref: float

    def __post_init__(self):
        if not 0 <= self.errors <= self.trials:
            raise ValueError("errors must lie in [0, trials]")


def wilson_interval(errors: int, trials: int, confidence: float = 0.95) -> tuple[float, float]:
    """Wilson score interval; well behaved at zero or full error counts."""
    if trials < 1:
        raise ValueError(f"trials must be at least 1, got {trials}")
    if not 0 <= errors <= trials:
        raise ValueError(f"errors {errors} outside [0, {trials}]")
    if not 0.0 < confidence < 1.0:
        raise ValueError(f"confidence must be in (0, 1), got {confidence}")
    z = float(norm.ppf(0.5 * (1.0 + confidence)))
    n = trials
    p = errors / n
    denom = 1.0 + z * z / n
    center = (p + z * z / (2.0 * n)) / denom
    half = (z / denom) * math.sqrt(p * (1.0 - p) / n + z * z / (4.0 * n * n))
    # center - half is 0 (or 1) in exact arithmetic at the boundaries;
    # snap away the float residue so degenerate counts give clean endpoints
    low = 0.0 if errors == 0 else max(0.0, center - half)
    high = 1.0 if errors == trials else min(1.0, center + half)
    return low, high


def _kernel_call(config: TrialConfig) -> tuple[str, tuple]:
    """Kernel name plus its scalar argument block after the trial range."""
    alph = config.alphabet
    det = config.detector
    det_args = (det.efficiency, det.dark_rate, det.dead_time,
                det.afterpulse_prob, det.max_count_rate)
    if config.receiver == "kennedy":
        return "run_kennedy", (alph.xi1, alph.mean_photons, alph.duration, *det_args)
    if config.receiver == "sasaki_hirota":
        c0 = alph.overlap()
        theta = sh_optimal_theta(alph.xi0, alph.xi1, c0)
        return "run_sh", (alph.xi1, theta, c0, alph.mean_photons, alph.duration, *det_args)
    fb = config.feedback
    cap = fb.amplitude_cap
    if cap is None:
        cap = default_amplitude_cap(alph.mean_photons, alph.duration)
    return "run_dolinar", (
        alph.xi0, alph.xi1, alph.mean_photons, alph.duration, *det_args,
        fb.delay, fb.phase_error, cap, fb.policy_scale,
    )


def _run_block(kernel_name: str, run_seed: int, start: int, count: int, args: tuple) -> int:
    # module-level so worker processes can unpickle it; the child resolves
    # the same kernel implementation through the package's import switch
    kernel = getattr(_core.kernels, kernel_name)
    return kernel(run_seed, start, count, *args)


def analytic_reference(config: TrialConfig) -> float:
    """Closed-form error for the idealized counterpart of this config.

    Dark counts, dead time, afterpulsing, feedback delay, and phase
    error have no closed form; the reference keeps only the efficiency,
    which is how the simulated curves are compared against theory.
    """
    alph = config.alphabet
    eta = config.detector.efficiency
    if config.receiver == "kennedy":
        return kennedy_error(alph.xi1, alph.mean_photons, eta)
    if config.receiver == "sasaki_hirota":
        theta = sh_optimal_theta(alph.xi0, alph.xi1, alph.overlap())
        return sh_error(alph.xi0, alph.xi1, alph.mean_photons, eta, theta)
    return dolinar_error(alph.xi0, alph.xi1, alph.mean_photons, eta)


def run_trials(config: TrialConfig, confidence: float = 0.95) -> ErrorEstimate:
    """Estimate the error probability of one receiver configuration.

    Bit-identical for identical (config, master_seed) at any worker
    count: blocks are fixed, per-trial streams depend only on the seed
    and the trial index, and integer error counts add associatively.
    """
    kernel_name, args = _kernel_call(config)
    seed = config.master_seed
    blocks = [
        (start, min(CHUNK_TRIALS, config.trials - start))
        for start in range(0, config.trials, CHUNK_TRIALS)
    ]
    workers = int(os.environ.get(WORKERS_ENV, "1"))
    if workers <= 1 or len(blocks) == 1:
        errors = sum(_run_block(kernel_name, seed, s, c, args) for s, c in blocks)
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(_run_block, kernel_name, seed, s, c, args) for s, c in blocks]
            errors = sum(f.result() for f in futures)
    low, high = wilson_interval(errors, config.trials, confidence)
    return ErrorEstimate(
        trials=config.trials,
        errors=errors,
        p_hat=errors / config.trials,
        ci_low=low,
        ci_high=high,
        confidence=confidence,
        analytic_ref=analytic_reference(config),
    )


def _config_at(base: TrialConfig, variable: SweepVariable, value: float) -> TrialConfig:
    if variable == "mean_photons":
        env = base.alphabet.envelope
        alph = BinaryAlphabet(
            SignalEnvelope(duration=env.duration, mean_photons=value),
            xi0=base.alphabet.xi0,
            xi1=base.alphabet.xi1,
        )
        return replace(base, alphabet=alph)
    if variable == "efficiency":
        return replace(base, detector=replace(base.detector, efficiency=value))
    if variable == "phase_error":
        if base.feedback is None:
            raise ValueError("phase_error sweeps require a feedback model (dolinar)")
        return replace(base, feedback=replace(base.feedback, phase_error=value))
    raise ValueError(f"unknown sweep variable {variable!r}")


def sweep(
    base: TrialConfig,
    variable: SweepVariable,
    grid: list[float],
    confidence: float = 0.95,
) -> ReceiverErrorCurve:
    """run_trials across a grid, one derived seed per point.

    Seeds come from (master_seed, receiver, point index), so curves for
    different receivers over the same grid never share streams.
    """
    if not grid:
        raise ValueError("sweep grid must not be empty")
    if any(b <= a for a, b in zip(grid, grid[1:])):
        raise ValueError("sweep grid must be strictly increasing")
    code = RECEIVER_CODES[base.receiver]
    points = []
    estimates = []
    for i, value in enumerate(grid):
        config = _config_at(base, variable, value)
        config = replace(config, master_seed=derive_run_seed(base.master_seed, code, i))
        est = run_trials(config, confidence)
        points.append((value, est.p_hat))
        estimates.append(est)
    return ReceiverErrorCurve(
        sweep_variable=variable,
        points=tuple(points),
        receiver=base.receiver,
        estimates=tuple(estimates),
    )
