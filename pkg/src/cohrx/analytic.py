"""Closed-form error probabilities and the optimal feedback law.

Conventions used throughout: the binary alphabet is {vacuum, coherent
state of mean photon number nbar}, c0 = exp(-nbar/2) is the codeword
overlap, eta is the detector quantum efficiency, and (xi0, xi1) are the
priors.  A detector of efficiency eta sees an attenuated overlap, so eta
enters the quantum-limit expressions only through c0**(2*eta) =
exp(-eta*nbar).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import TYPE_CHECKING, Literal, Sequence

import numpy as np

from .signal import SignalEnvelope

if TYPE_CHECKING:  # no runtime import; avoids a cycle with receivers
    from .receivers import Hypothesis

SweepVariable = Literal["mean_photons", "efficiency", "phase_error"]

# Fock-space truncation for the rotated-state distributions.  The
# residual tail must stay below this mass or sampling would be biased.
FOCK_CUTOFF = 40
TRUNCATION_TOLERANCE = 1e-9


def _check_priors(xi0: float, xi1: float):
    if xi0 < 0.0 or xi1 < 0.0 or abs(xi0 + xi1 - 1.0) > 1e-12:
        raise ValueError(f"priors must be non-negative and sum to 1, got ({xi0}, {xi1})")


def _check_eta(eta: float):
    if not 0.0 <= eta <= 1.0:
        raise ValueError(f"efficiency out of range [0, 1]: {eta}")


def _check_nbar(nbar: float):
    if nbar < 0.0:
        raise ValueError(f"mean photon number must be non-negative, got {nbar}")


def helstrom_bound(xi0: float, xi1: float, nbar: float, eta: float) -> float:
    """Minimum attainable error probability for the binary alphabet.

    P = (1/2) * (1 - sqrt(1 - 4*xi0*xi1*exp(-eta*nbar)))
    """
    _check_priors(xi0, xi1)
    _check_eta(eta)
    _check_nbar(nbar)
    return 0.5 * (1.0 - math.sqrt(1.0 - 4.0 * xi0 * xi1 * math.exp(-eta * nbar)))


def kennedy_error(xi1: float, nbar: float, eta: float) -> float:
    """Error probability of the ideal on/off (photon counting) receiver.

    The vacuum hypothesis never produces a click, so the only error is a
    missed detection: P = xi1 * exp(-eta*nbar).
    """
    _check_priors(1.0 - xi1, xi1)
    _check_eta(eta)
    _check_nbar(nbar)
    return xi1 * math.exp(-eta * nbar)


def bernoulli_pmf(n: int, k: int, eta: float) -> float:
    """Probability that k of n photons convert in a detector of efficiency eta."""
    if n < 0 or k < 0 or k > n:
        raise ValueError(f"need 0 <= k <= n, got n={n}, k={k}")
    _check_eta(eta)
    return math.comb(n, k) * eta**k * (1.0 - eta) ** (n - k)


def sh_optimal_theta(xi0: float, xi1: float, c0: float) -> float:
    """Rotation angle minimizing the near-optimal receiver's error.

    theta* = -atan sqrt((S - 1 + 2*xi1*c0^2) / (S + 1 - 2*xi1*c0^2))
    with S = sqrt(1 - 4*xi0*xi1*c0^2).  Independent of eta: the optimal
    rotation is a property of the states, not of the detector.
    """
    _check_priors(xi0, xi1)
    if not 0.0 < c0 < 1.0:
        raise ValueError(f"overlap c0 must lie strictly inside (0, 1), got {c0}")
    c0sq = c0 * c0
    disc = 1.0 - 4.0 * xi0 * xi1 * c0sq
    if disc <= 0.0:
        raise ValueError("priors and overlap leave no distinguishable component")
    s = math.sqrt(disc)
    num = s - 1.0 + 2.0 * xi1 * c0sq
    den = s + 1.0 - 2.0 * xi1 * c0sq
    if num < 0.0:  # roundoff guard; the ratio is analytically >= 0
        num = 0.0
    return -math.atan(math.sqrt(num / den))


def _sh_bracket(c0: float, eta: float) -> float:
    # (c0^(2 eta) - 1) / (c0^2 - 1), the eta-dependent click-weight
    # factor; continuous limit eta at c0 = 1 (coinciding codewords)
    if not 0.0 < c0 <= 1.0:
        raise ValueError(f"overlap c0 must lie in (0, 1], got {c0}")
    if c0 == 1.0:
        return eta
    return (c0 ** (2.0 * eta) - 1.0) / (c0 * c0 - 1.0)


def sh_click_prob_given_rho0(theta: float, c0: float, eta: float) -> float:
    """False-alarm probability of the rotated receiver for the vacuum codeword."""
    _check_eta(eta)
    return _sh_bracket(c0, eta) * math.sin(theta) ** 2


def sh_click_prob_given_rho1(theta: float, c0: float, eta: float) -> float:
    """Click (correct detection) probability for the coherent codeword."""
    _check_eta(eta)
    amp = c0 * math.sin(theta) - math.sqrt(1.0 - c0 * c0) * math.cos(theta)
    return _sh_bracket(c0, eta) * amp * amp


def sh_error(xi0: float, xi1: float, nbar: float, eta: float, theta: float) -> float:
    """Error probability of the rotation receiver at angle theta."""
    _check_priors(xi0, xi1)
    c0 = math.exp(-0.5 * nbar)
    p_false = sh_click_prob_given_rho0(theta, c0, eta)
    p_hit = sh_click_prob_given_rho1(theta, c0, eta)
    return xi0 * p_false + xi1 * (1.0 - p_hit)


def dolinar_error(xi0: float, xi1: float, nbar: float, eta: float) -> float:
    """Error probability of the feedback receiver: the Helstrom bound itself."""
    return helstrom_bound(xi0, xi1, nbar, eta)


def dolinar_cost(xi0: float, xi1: float, eta: float, photons_so_far: float) -> float:
    """Running cost J = (1/2)(1 - sqrt(1 - 4*xi0*xi1*exp(-eta*n(t))))."""
    disc = 1.0 - 4.0 * xi0 * xi1 * math.exp(-eta * photons_so_far)
    return 0.5 * (1.0 - math.sqrt(disc if disc > 0.0 else 0.0))


def dolinar_gain(xi0: float, xi1: float, eta: float, photons_so_far: float) -> float:
    """Feedback gain g = J/(1 - 2J); +inf at the equal-priors start."""
    disc = 1.0 - 4.0 * xi0 * xi1 * math.exp(-eta * photons_so_far)
    if disc <= 0.0:
        return math.inf
    d = math.sqrt(disc)  # d = 1 - 2J
    return 0.5 * (1.0 - d) / d


def dolinar_control(
    t: float,
    hypothesis: "Hypothesis | int",
    envelope: SignalEnvelope,
    xi0: float,
    xi1: float,
    eta: float,
    u_max: float | None = None,
) -> complex:
    """Optimal displacement amplitude u(t) for the currently favored hypothesis.

    While H1 is favored the receiver nulls the coherent codeword and
    overshoots: u = -psi(t) * (1 + g).  While H0 is favored it applies
    the gentler probe u = +psi(t) * g.  The magnitude is clamped at
    u_max (default 1e3 * sqrt(nbar/T)) to regularize the equal-priors
    divergence of g at t = 0.  The clamp preserves the branch sign.
    """
    _check_priors(xi0, xi1)
    _check_eta(eta)
    psi = envelope.amplitude(t)
    if not 0.0 <= t <= envelope.duration:
        raise ValueError(f"t={t} outside the slot [0, {envelope.duration}]")
    if u_max is None:
        u_max = 1e3 * math.sqrt(envelope.mean_photons / envelope.duration)
    if u_max <= 0.0:
        raise ValueError(f"u_max must be positive, got {u_max}")
    g = dolinar_gain(xi0, xi1, eta, envelope.mean_photons_by(t))
    branch = int(hypothesis)
    if branch not in (0, 1):
        raise ValueError(f"hypothesis must be H0 or H1, got {hypothesis!r}")
    if branch == 1:
        mag = psi * (1.0 + g) if math.isfinite(g) else math.inf
        return complex(-min(mag, u_max), 0.0)
    mag = psi * g if math.isfinite(g) else math.inf
    return complex(min(mag, u_max), 0.0)


@lru_cache(maxsize=64)
def _sh_distribution_cached(theta: float, nbar: float, n_max: int):
    c0 = math.exp(-0.5 * nbar)
    root = math.sqrt(1.0 - c0 * c0)
    if root == 0.0:
        raise ValueError("rotated-state distribution undefined at nbar = 0")
    # Rotated states in the non-orthogonal {Psi0, Psi1} pair:
    #   U|Psi0> = (cos t + c0 sin t / root)|Psi0> - (sin t / root)|Psi1>
    #   U|Psi1> = (sin t / root)|Psi0> + (cos t - c0 sin t / root)|Psi1>
    # and <n|Psi1> = c0 * nbar^(n/2) / sqrt(n!), <n|Psi0> = delta_n0.
    a0 = math.cos(theta) + c0 * math.sin(theta) / root
    b0 = -math.sin(theta) / root
    a1 = math.sin(theta) / root
    b1 = math.cos(theta) - c0 * math.sin(theta) / root
    n = np.arange(n_max + 1)
    log_fact = np.concatenate(([0.0], np.cumsum(np.log(np.arange(1, n_max + 1)))))
    coherent = c0 * np.exp(0.5 * (n * math.log(nbar) - log_fact))
    delta = (n == 0).astype(float)
    p0 = (a0 * delta + b0 * coherent) ** 2
    p1 = (a1 * delta + b1 * coherent) ** 2
    for p in (p0, p1):
        deficit = 1.0 - p.sum()
        if deficit > TRUNCATION_TOLERANCE:
            raise ValueError(
                f"Fock truncation at n_max={n_max} leaks {deficit:.2e} probability; "
                "raise n_max or lower nbar"
            )
        p /= p.sum()
    p0.setflags(write=False)
    p1.setflags(write=False)
    return p0, p1


def sh_photon_distribution(
    theta: float, nbar: float, n_max: int = FOCK_CUTOFF
) -> tuple[np.ndarray, np.ndarray]:
    """Photon-number pmfs of the rotated codewords, truncated and renormalized.

    Returns (p_rho0, p_rho1), each of length n_max + 1.  Raises if the
    truncated tail exceeds the configured tolerance.
    """
    _check_nbar(nbar)
    if n_max < 1:
        raise ValueError("n_max must be at least 1")
    return _sh_distribution_cached(float(theta), float(nbar), int(n_max))


@dataclass(frozen=True)
class ReceiverErrorCurve:
    """Error probability sampled along one sweep axis, for one receiver.

    `estimates` optionally carries the per-point Monte Carlo record when
    the curve came from simulation rather than a closed form.
    """

    sweep_variable: SweepVariable
    points: tuple[tuple[float, float], ...]
    receiver: str = ""
    estimates: tuple = field(default=(), compare=False)

    def __post_init__(self):
        xs = [x for x, _ in self.points]
        if any(b <= a for a, b in zip(xs, xs[1:])):
            raise ValueError("sweep grid must be strictly increasing")
        if any(not 0.0 <= p <= 1.0 for _, p in self.points):
            raise ValueError("error probabilities must lie in [0, 1]")

    @property
    def xs(self) -> tuple[float, ...]:
        return tuple(x for x, _ in self.points)

    @property
    def p_errors(self) -> tuple[float, ...]:
        return tuple(p for _, p in self.points)


def error_curve(
    receiver: str,
    sweep_variable: SweepVariable,
    grid: Sequence[float],
    xi0: float,
    xi1: float,
    nbar: float,
    eta: float,
) -> ReceiverErrorCurve:
    """Closed-form error curve along one axis; the swept parameter in
    (nbar, eta) is ignored in favor of the grid values."""
    points = []
    for x in grid:
        nb = x if sweep_variable == "mean_photons" else nbar
        ef = x if sweep_variable == "efficiency" else eta
        if receiver == "kennedy":
            p = kennedy_error(xi1, nb, ef)
        elif receiver == "sasaki_hirota":
            if nb > 0:
                theta = sh_optimal_theta(xi0, xi1, math.exp(-0.5 * nb))
                p = sh_error(xi0, xi1, nb, ef, theta)
            else:  # no rotation possible; counting alone, as for on/off
                p = kennedy_error(xi1, nb, ef)
        elif receiver == "dolinar":
            p = dolinar_error(xi0, xi1, nb, ef)
        elif receiver == "helstrom":
            p = helstrom_bound(xi0, xi1, nb, ef)
        else:
            raise ValueError(f"unknown receiver {receiver!r}")
        points.append((float(x), p))
    return ReceiverErrorCurve(sweep_variable, tuple(points), receiver=receiver)
