"""Baseband signal model for on-off binary coherent-state keying.

The two codewords are the vacuum state (hypothesis H0) and a coherent
state with mean photon number ``mean_photons`` spread over a finite slot
of length ``duration`` (hypothesis H1).  Only the envelope magnitude is
physical here: the absolute optical phase drops out of every receiver in
this toolkit, so envelopes are kept real and non-negative and any
relative phase offset is modeled downstream by the feedback model.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Literal

EnvelopeShape = Literal["rectangular"]


@dataclass(frozen=True)
class SignalEnvelope:
    """Temporal profile psi(t) of the H1 codeword, normalized so that
    the integral of |psi|^2 over the slot equals ``mean_photons``."""

    duration: float
    mean_photons: float
    shape: EnvelopeShape = "rectangular"

    def __post_init__(self):
        if self.duration <= 0.0:
            raise ValueError(f"duration must be positive, got {self.duration}")
        if self.mean_photons < 0.0:
            raise ValueError(f"mean_photons must be non-negative, got {self.mean_photons}")
        if self.shape != "rectangular":
            raise ValueError(f"unsupported envelope shape {self.shape!r}")

    def amplitude(self, t: float) -> float:
        """Field amplitude psi(t) in sqrt(photons/s); zero outside the slot."""
        if 0.0 <= t <= self.duration:
            return math.sqrt(self.mean_photons / self.duration)
        return 0.0

    def flux(self, t: float) -> float:
        """Instantaneous photon flux |psi(t)|^2 in photons/s."""
        a = self.amplitude(t)
        return a * a

    def mean_photons_by(self, t: float) -> float:
        """Cumulative mean photon number n(t) delivered on [0, t].

        Monotone from 0 to ``mean_photons`` across the slot.
        """
        if not 0.0 <= t <= self.duration:
            raise ValueError(f"t={t} outside the slot [0, {self.duration}]")
        return self.mean_photons * (t / self.duration)


@dataclass(frozen=True)
class BinaryAlphabet:
    """Prior-weighted binary alphabet {vacuum, coherent envelope}."""

    envelope: SignalEnvelope
    xi0: float = 0.5
    xi1: float = 0.5

    def __post_init__(self):
        if self.xi0 < 0.0 or self.xi1 < 0.0:
            raise ValueError("priors must be non-negative")
        if abs(self.xi0 + self.xi1 - 1.0) > 1e-12:
            raise ValueError(f"priors must sum to 1, got {self.xi0} + {self.xi1}")

    @property
    def duration(self) -> float:
        return self.envelope.duration

    @property
    def mean_photons(self) -> float:
        return self.envelope.mean_photons

    def overlap(self) -> float:
        """|<Psi0|Psi1>| = exp(-mean_photons / 2), the c0 of the closed forms."""
        return math.exp(-0.5 * self.envelope.mean_photons)
