"""Stochastic photodetection.

Ideal photon arrivals are sampled from an intensity function by
thinning, then pushed through an avalanche-photodiode imperfection
pipeline: quantum-efficiency thinning, dark counts, dead time,
afterpulsing, saturation, applied in that fixed order.

Draw-order contract (the compiled kernels reproduce it verbatim):
sample_arrivals consumes exactly two uniforms per candidate event (gap,
accept), and none at all when the declared bound is zero.
apply_imperfections consumes one uniform per input click (efficiency
thinning, drawn even when efficiency is 1), then sequential
exponential-gap uniforms for dark counts until the horizon is passed
(none when dark_rate is 0), then one uniform per registered click when
afterpulse_prob > 0 (drawn even when the would-be ghost falls past the
horizon).  Dead-time pruning and saturation consume no randomness.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import IntEnum
from typing import Callable

import numpy as np

from .analytic import sh_photon_distribution

# relative slack for the declared-bound consistency check during thinning
_BOUND_TOLERANCE = 1e-12


class ClickSource(IntEnum):
    """Where a click came from (diagnostic only; decisions ignore it)."""

    SIGNAL = 0
    DARK = 1
    AFTERPULSE = 2


@dataclass(frozen=True)
class DetectorModel:
    """Avalanche photodiode parameters.

    Defaults are the realistic device simulated throughout: 50%
    quantum efficiency, 250/s dark counts, 50 ns dead time, 1%
    afterpulsing, 1e7/s saturation rate.
    """

    efficiency: float = 0.5
    dark_rate: float = 250.0
    dead_time: float = 50e-9
    afterpulse_prob: float = 0.01
    max_count_rate: float = 1e7

    def __post_init__(self):
        if not 0.0 <= self.efficiency <= 1.0:
            raise ValueError(f"efficiency out of range [0, 1]: {self.efficiency}")
        if self.dark_rate < 0.0:
            raise ValueError(f"dark_rate must be non-negative, got {self.dark_rate}")
        if self.dead_time < 0.0:
            raise ValueError(f"dead_time must be non-negative, got {self.dead_time}")
        if not 0.0 <= self.afterpulse_prob < 1.0:
            raise ValueError(f"afterpulse_prob out of range [0, 1): {self.afterpulse_prob}")
        if not self.max_count_rate > 0.0:
            raise ValueError(f"max_count_rate must be positive, got {self.max_count_rate}")
        if self.afterpulse_prob > 0.0 and self.dead_time == 0.0:
            # ghosts fire at dead-time expiry; zero dead time would put
            # them on top of their parent and break click ordering
            raise ValueError("afterpulsing requires a positive dead_time")

    @classmethod
    def ideal(cls, efficiency: float = 1.0) -> "DetectorModel":
        """Noiseless counter: only (optionally sub-unity) efficiency."""
        return cls(
            efficiency=efficiency,
            dark_rate=0.0,
            dead_time=0.0,
            afterpulse_prob=0.0,
            max_count_rate=math.inf,
        )


@dataclass(frozen=True)
class ClickRecord:
    """Strictly increasing detection timestamps with provenance flags."""

    times: tuple[float, ...]
    sources: tuple[ClickSource, ...]

    def __post_init__(self):
        if len(self.times) != len(self.sources):
            raise ValueError("times and sources must have equal length")
        if self.times and self.times[0] < 0.0:
            raise ValueError("click times must be non-negative")
        if any(b <= a for a, b in zip(self.times, self.times[1:])):
            raise ValueError("click times must be strictly increasing")

    @classmethod
    def empty(cls) -> "ClickRecord":
        return cls((), ())

    @property
    def count(self) -> int:
        return len(self.times)

    def __len__(self) -> int:
        return len(self.times)


@dataclass(frozen=True)
class RateFunction:
    """Intensity t -> counts/s on [0, T] with a declared upper bound."""

    func: Callable[[float], float] = field(compare=False)
    upper_bound: float

    def __call__(self, t: float) -> float:
        return self.func(t)

    @classmethod
    def constant(cls, value: float) -> "RateFunction":
        if value < 0.0:
            raise ValueError(f"rate must be non-negative, got {value}")
        return cls(lambda t: value, value)


def sample_arrivals(
    rate: RateFunction, duration: float, gen: np.random.Generator
) -> ClickRecord:
    """Arrival times of an inhomogeneous Poisson process on [0, duration].

    Thinning against the declared bound: candidates arrive as a
    homogeneous process at rate upper_bound and survive with probability
    rate(t)/upper_bound.  A rate value above the bound means the caller
    mis-declared the envelope and is an internal error, not noise.
    """
    bound = rate.upper_bound
    if not math.isfinite(bound) or bound < 0.0:
        raise ValueError(f"thinning bound must be finite and non-negative, got {bound}")
    if duration < 0.0:
        raise ValueError(f"duration must be non-negative, got {duration}")
    if bound == 0.0:
        return ClickRecord.empty()
    times = []
    t = 0.0
    while True:
        t -= math.log1p(-gen.random()) / bound
        if t > duration:
            break
        value = rate(t)
        if value > bound * (1.0 + _BOUND_TOLERANCE):
            raise RuntimeError(
                f"rate {value} exceeds declared bound {bound} at t={t}; bad envelope"
            )
        if gen.random() * bound < value:
            times.append(t)
    return ClickRecord(tuple(times), (ClickSource.SIGNAL,) * len(times))


def apply_imperfections(
    ideal: ClickRecord, model: DetectorModel, duration: float, gen: np.random.Generator
) -> ClickRecord:
    """Push ideal arrivals through the APD pipeline.

    Stages, in fixed order: (1) Bernoulli-thin at the quantum
    efficiency; (2) merge in a homogeneous dark-count stream; (3) sweep
    in time order, deleting clicks within dead_time of the last
    survivor; (4) each survivor spawns, with probability
    afterpulse_prob, one ghost click at its dead-time expiry, itself
    subject to (3) and (4); (5) truncate once the count exceeds
    max_count_rate * duration.
    """
    if duration < 0.0:
        raise ValueError(f"duration must be non-negative, got {duration}")

    survivors = [
        (t, s) for t, s in zip(ideal.times, ideal.sources) if gen.random() < model.efficiency
    ]

    if model.dark_rate > 0.0:
        t = 0.0
        dark = []
        while True:
            t -= math.log1p(-gen.random()) / model.dark_rate
            if t > duration:
                break
            dark.append((t, ClickSource.DARK))
        merged = sorted(survivors + dark)  # ties broken by source code
    else:
        merged = survivors

    # dead time + afterpulsing, single forward sweep; pending holds at
    # most one ghost, which always precedes every unprocessed real click
    # beyond the dead window of its parent
    out_times: list[float] = []
    out_sources: list[ClickSource] = []
    pending: list[tuple[float, ClickSource]] = []
    idx = 0
    last = -math.inf
    while idx < len(merged) or pending:
        if pending and (idx >= len(merged) or pending[0] <= merged[idx]):
            t, src = pending.pop(0)
        else:
            t, src = merged[idx]
            idx += 1
        if t - last < model.dead_time:
            continue
        out_times.append(t)
        out_sources.append(src)
        last = t
        if model.afterpulse_prob > 0.0:
            u = gen.random()
            ghost = t + model.dead_time
            if u < model.afterpulse_prob and ghost <= duration:
                pending.append((ghost, ClickSource.AFTERPULSE))

    cap = model.max_count_rate * duration
    if math.isfinite(cap) and len(out_times) > cap:
        keep = math.floor(cap * (1.0 + 1e-12))
        out_times = out_times[:keep]
        out_sources = out_sources[:keep]

    return ClickRecord(tuple(out_times), tuple(out_sources))


def sample_sh_click_count(
    state: int,
    theta: float,
    c0: float,
    nbar: float,
    model: DetectorModel,
    duration: float,
    gen: np.random.Generator,
) -> int:
    """Click count for one rotated-codeword measurement.

    Samples the exact photon number of the rotated state, thins it at
    the quantum efficiency, places the survivors uniformly in the slot
    (the decision uses only the count; placement gives dead time and
    saturation a definite meaning), and runs the electronics pipeline.
    The pipeline is invoked with efficiency pinned to 1 because the
    thinning already happened here.
    """
    if state not in (0, 1):
        raise ValueError(f"state must be 0 (vacuum codeword) or 1, got {state}")
    if abs(c0 - math.exp(-0.5 * nbar)) > 1e-9:
        raise ValueError(f"overlap c0={c0} inconsistent with nbar={nbar}")
    pmf0, pmf1 = sh_photon_distribution(theta, nbar)
    cdf = np.cumsum(pmf0 if state == 0 else pmf1)
    # clamp: float roundoff can leave cdf[-1] a few ulp under 1
    n = min(int(np.searchsorted(cdf, gen.random(), side="right")), len(cdf) - 1)

    k = sum(1 for _ in range(n) if gen.random() < model.efficiency)
    times = sorted(gen.random() * duration for _ in range(k))

    placed = ClickRecord(tuple(times), (ClickSource.SIGNAL,) * k)
    electronics = DetectorModel(
        efficiency=1.0,
        dark_rate=model.dark_rate,
        dead_time=model.dead_time,
        afterpulse_prob=model.afterpulse_prob,
        max_count_rate=model.max_count_rate,
    )
    return apply_imperfections(placed, electronics, duration, gen).count
