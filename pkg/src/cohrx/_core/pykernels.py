"""Pure-Python trial kernels.

Each kernel runs a block of trials [start, start + count) against one
fixed configuration and returns the error count.  Per-trial order, the
contract shared with the compiled mirror: rekey the Philox stream to
the trial index, draw one uniform for the truth (pulse iff u < xi1),
then simulate the receiver with that generator.  Arguments are scalars
so the blocks pickle cheaply to worker processes.

These loops delegate to the reference implementations, which keeps a
single semantic definition of every receiver; the compiled kernels are
an independent transcription checked against this module bit for bit.
"""

from __future__ import annotations

from ..detector import DetectorModel, RateFunction, apply_imperfections, sample_arrivals, sample_sh_click_count
from ..receivers import FeedbackModel, dolinar_run, kennedy_decide, sh_decide
from ..signal import BinaryAlphabet, SignalEnvelope
from .streams import TrialStreams


def run_kennedy(
    run_seed: int,
    start: int,
    count: int,
    xi1: float,
    nbar: float,
    duration: float,
    efficiency: float,
    dark_rate: float,
    dead_time: float,
    afterpulse_prob: float,
    max_count_rate: float,
) -> int:
    model = DetectorModel(
        efficiency=efficiency,
        dark_rate=dark_rate,
        dead_time=dead_time,
        afterpulse_prob=afterpulse_prob,
        max_count_rate=max_count_rate,
    )
    pulse_rate = RateFunction.constant(nbar / duration)
    no_rate = RateFunction.constant(0.0)
    streams = TrialStreams(run_seed)
    errors = 0
    for i in range(start, start + count):
        gen = streams.rekey(i)
        truth = 1 if gen.random() < xi1 else 0
        ideal = sample_arrivals(pulse_rate if truth == 1 else no_rate, duration, gen)
        clicks = apply_imperfections(ideal, model, duration, gen)
        errors += int(kennedy_decide(clicks)) != truth
    return errors


def run_sh(
    run_seed: int,
    start: int,
    count: int,
    xi1: float,
    theta: float,
    c0: float,
    nbar: float,
    duration: float,
    efficiency: float,
    dark_rate: float,
    dead_time: float,
    afterpulse_prob: float,
    max_count_rate: float,
) -> int:
    model = DetectorModel(
        efficiency=efficiency,
        dark_rate=dark_rate,
        dead_time=dead_time,
        afterpulse_prob=afterpulse_prob,
        max_count_rate=max_count_rate,
    )
    streams = TrialStreams(run_seed)
    errors = 0
    for i in range(start, start + count):
        gen = streams.rekey(i)
        truth = 1 if gen.random() < xi1 else 0
        k = sample_sh_click_count(truth, theta, c0, nbar, model, duration, gen)
        errors += int(sh_decide(k)) != truth
    return errors


def run_dolinar(
    run_seed: int,
    start: int,
    count: int,
    xi0: float,
    xi1: float,
    nbar: float,
    duration: float,
    efficiency: float,
    dark_rate: float,
    dead_time: float,
    afterpulse_prob: float,
    max_count_rate: float,
    delay: float,
    phase_error: float,
    amplitude_cap: float,
    policy_scale: float,
) -> int:
    alphabet = BinaryAlphabet(
        SignalEnvelope(duration=duration, mean_photons=nbar), xi0=xi0, xi1=xi1
    )
    model = DetectorModel(
        efficiency=efficiency,
        dark_rate=dark_rate,
        dead_time=dead_time,
        afterpulse_prob=afterpulse_prob,
        max_count_rate=max_count_rate,
    )
    feedback = FeedbackModel(
        delay=delay,
        phase_error=phase_error,
        amplitude_cap=amplitude_cap,
        policy_scale=policy_scale,
    )
    streams = TrialStreams(run_seed)
    errors = 0
    for i in range(start, start + count):
        gen = streams.rekey(i)
        truth = 1 if gen.random() < xi1 else 0
        hyp, _ = dolinar_run(truth, alphabet, model, feedback, gen)
        errors += int(hyp) != truth
    return errors
