"""Receiver decision logic.

The counting receivers (on/off and rotated) are one-line threshold
rules.  The feedback receiver is an event-driven closed loop: a local
oscillator displaces the incoming field, every registered click flips
the running hypothesis after the feedback delay, and the loop's
likelihood bookkeeping is reconstructed afterwards from the recorded
control trajectory.

dolinar_run's draw-order contract (the compiled kernel mirrors it
verbatim): one uniform up front for the first dark gap iff dark_rate >
0; then per loop iteration one uniform for the signal candidate gap iff
the proposal bound is positive; a dark arrival draws its next gap
immediately on processing; a signal candidate draws one acceptance
uniform, then one efficiency uniform only if accepted; every click that
survives dead time draws one afterpulse uniform iff afterpulse_prob >
0.  Hypothesis flips and dead-time swallows consume nothing.  Ties are
resolved flip, ghost, dark, signal.
"""

from __future__ import annotations

import math
from bisect import bisect_right
from collections import deque
from dataclasses import dataclass
from enum import IntEnum
from typing import Callable

import numpy as np
from scipy.integrate import solve_ivp

from .detector import ClickRecord, ClickSource, DetectorModel, RateFunction
from .signal import BinaryAlphabet

_BOUND_TOLERANCE = 1e-9


class Hypothesis(IntEnum):
    H0 = 0
    H1 = 1

    @property
    def other(self) -> "Hypothesis":
        return Hypothesis(1 - self.value)


@dataclass(frozen=True)
class FeedbackModel:
    """Feedback-loop imperfections and policy knobs.

    policy_scale multiplies the unclamped optimal control (before the
    amplitude cap), used to probe how sharply performance degrades away
    from the optimum.
    """

    delay: float = 0.0
    phase_error: float = 0.0
    amplitude_cap: float | None = None
    policy_scale: float = 1.0

    def __post_init__(self):
        if self.delay < 0.0:
            raise ValueError(f"delay must be non-negative, got {self.delay}")
        if self.amplitude_cap is not None and not self.amplitude_cap > 0.0:
            raise ValueError(f"amplitude cap must be positive, got {self.amplitude_cap}")
        if not self.policy_scale > 0.0:
            raise ValueError(f"policy_scale must be positive, got {self.policy_scale}")

    @classmethod
    def ideal(cls) -> "FeedbackModel":
        return cls()


def kennedy_decide(clicks: ClickRecord) -> Hypothesis:
    """On/off rule: the vacuum codeword cannot click, so any click means H1."""
    return Hypothesis.H1 if clicks.count > 0 else Hypothesis.H0


def sh_decide(count: int) -> Hypothesis:
    """Same threshold rule, applied after the rotation is already sampled."""
    if count < 0:
        raise ValueError(f"count must be non-negative, got {count}")
    return Hypothesis.H1 if count > 0 else Hypothesis.H0


def _stable_d(q: float, x: float) -> float:
    # d = sqrt(1 - q e^{-x}) without cancellation near q = 1, x = 0
    val = (1.0 - q) + q * (-math.expm1(-x))
    return math.sqrt(val if val > 0.0 else 0.0)


def _gain(d: float) -> float:
    # g = J/(1-2J) expressed through d = 1-2J
    return math.inf if d == 0.0 else 0.5 * (1.0 - d) / d


def default_amplitude_cap(nbar: float, duration: float) -> float:
    """Regularization cap for the equal-priors start: 1e3 envelope units."""
    return 1e3 * math.sqrt(nbar / duration) or 1.0


@dataclass(frozen=True)
class DolinarControlRecord:
    """Piecewise description of the local-oscillator amplitude over one trial.

    Segments are the hypothesis-constant intervals [start, end) covering
    [0, T].  Within a segment the control magnitude is the clamped
    optimal law evaluated at the delayed time max(0, t - delay), so each
    segment splits into at most one constant piece (cap active, or the
    pre-delay hold) followed by one decaying piece with closed-form
    integrals.
    """

    segments: tuple[tuple[float, float, Hypothesis], ...]
    alphabet: BinaryAlphabet
    efficiency: float
    amplitude_cap: float
    policy_scale: float = 1.0
    delay: float = 0.0
    phase_error: float = 0.0

    def __post_init__(self):
        if self.alphabet.envelope.shape != "rectangular":
            raise ValueError("closed-form control integrals assume a rectangular envelope")
        if not self.segments:
            raise ValueError("control record needs at least one segment")

    @property
    def psi(self) -> float:
        env = self.alphabet.envelope
        return math.sqrt(env.mean_photons / env.duration)

    @property
    def _kappa(self) -> float:
        # photon flux nbar/T; x = eta*kappa*(t - delay) is the decay variable
        return self.psi**2

    @property
    def _q(self) -> float:
        return 4.0 * self.alphabet.xi0 * self.alphabet.xi1

    def _x_of(self, t: float) -> float:
        return self.efficiency * self._kappa * max(0.0, t - self.delay)

    def _unclamped(self, hyp: Hypothesis, x: float) -> float:
        if self.psi == 0.0:
            return 0.0
        g = _gain(_stable_d(self._q, x))
        factor = (1.0 + g) if hyp is Hypothesis.H1 else g
        if factor == 0.0:
            return 0.0
        return self.policy_scale * self.psi * factor

    def _magnitude(self, hyp: Hypothesis, x: float) -> float:
        return min(self._unclamped(hyp, x), self.amplitude_cap)

    def _segment_at(self, t: float, left: bool = False) -> tuple[float, float, Hypothesis]:
        starts = [s for s, _, _ in self.segments]
        idx = bisect_right(starts, t) - 1
        if left and idx > 0 and self.segments[idx][0] == t:
            idx -= 1
        return self.segments[max(idx, 0)]

    def amplitude(self, t: float, left: bool = False) -> float:
        """Signed control value u(t); left=True takes the pre-flip branch
        at a segment boundary (the rate that produced a click there)."""
        if not 0.0 <= t <= self.alphabet.duration:
            return 0.0
        _, _, hyp = self._segment_at(t, left=left)
        mag = self._magnitude(hyp, self._x_of(t))
        return -mag if hyp is Hypothesis.H1 else mag

    def rates(self, t: float, left: bool = False) -> tuple[float, float]:
        """Hypothetical detection-rate pair (vacuum sent, pulse sent)."""
        u = self.amplitude(t, left=left)
        psi = self.alphabet.envelope.amplitude(t)
        phi0 = u * u
        phi1 = psi * psi + u * u + 2.0 * psi * u * math.cos(self.phase_error)
        return phi0, phi1

    def _clamp_release(self, hyp: Hypothesis) -> float:
        """Absolute time at which the cap stops binding on this branch."""
        scale = self.policy_scale * self.psi
        if scale == 0.0:
            return 0.0  # no signal, control is identically zero
        if self._unclamped(hyp, 0.0) <= self.amplitude_cap:
            return 0.0  # never clamped
        g_star = self.amplitude_cap / scale - (1.0 if hyp is Hypothesis.H1 else 0.0)
        if g_star <= 0.0:
            return math.inf  # cap below the branch's asymptotic magnitude
        d_star = 1.0 / (1.0 + 2.0 * g_star)
        ratio = self._q / (1.0 - d_star * d_star)
        if ratio <= 1.0:
            return 0.0
        x_star = math.log(ratio)
        return self.delay + x_star / (self.efficiency * self._kappa)

    def pieces(self) -> list[tuple[float, float, Hypothesis, float | None]]:
        """(start, end, hypothesis, constant_u or None) covering [0, T];
        None marks a closed-form decay piece."""
        out: list[tuple[float, float, Hypothesis, float | None]] = []
        for a, b, hyp in self.segments:
            sign = -1.0 if hyp is Hypothesis.H1 else 1.0
            hold_end = min(b, max(self.delay, self._clamp_release(hyp)))
            if a < hold_end:
                u = sign * self._magnitude(hyp, self._x_of(a))
                out.append((a, min(b, hold_end), hyp, u))
            if hold_end < b:
                out.append((max(a, hold_end), b, hyp, None))
        return out

    def _integral_u(self, piece: tuple[float, float, Hypothesis, float | None],
                    a: float, b: float) -> float:
        """Integral of the signed control over [a, b] within one piece."""
        s1, s2, hyp, const = piece
        a, b = max(a, s1), min(b, s2)
        if b <= a:
            return 0.0
        if const is not None:
            return const * (b - a)
        sign = -1.0 if hyp is Hypothesis.H1 else 1.0
        scale = self.policy_scale * self.psi
        d1 = _stable_d(self._q, self._x_of(a))
        d2 = _stable_d(self._q, self._x_of(b))
        # int g dx = ln((1+d2)/(1+d1)); dx = eta*kappa*ds
        int_g = math.log((1.0 + d2) / (1.0 + d1)) / (self.efficiency * self._kappa)
        if hyp is Hypothesis.H1:
            return sign * scale * ((b - a) + int_g)
        return sign * scale * int_g

    def rate_difference_integral(self, a: float, b: float) -> float:
        """Closed-form integral of (pulse rate - vacuum rate) over [a, b].

        The squared control cancels in the difference, leaving
        psi^2 dt + 2 psi cos(phase_error) u dt.
        """
        if b <= a:
            return 0.0
        psi = self.psi
        total = psi * psi * (b - a)
        coupling = 2.0 * psi * math.cos(self.phase_error)
        if coupling != 0.0:
            total += coupling * sum(self._integral_u(p, a, b) for p in self.pieces())
        return total


@dataclass(frozen=True)
class DolinarTrajectory:
    """Full record of one feedback-receiver trial."""

    click_times: tuple[float, ...]
    click_sources: tuple[ClickSource, ...]
    click_hypotheses: tuple[Hypothesis, ...]  # hypothesis held when the click landed
    final_hypothesis: Hypothesis
    control: DolinarControlRecord

    @property
    def clicks(self) -> ClickRecord:
        return ClickRecord(self.click_times, self.click_sources)

    def conditional_error_grid(
        self, times: np.ndarray
    ) -> tuple[np.ndarray, np.ndarray]:
        """Conditional error pair (wrong-call probability per codeword)
        on a time grid, reconstructed from the posterior.

        The segment's favored hypothesis carries zero conditional error
        for its own codeword, so the pair is (J/xi0, 0) on segments
        favoring the pulse and (0, J/xi1) on segments favoring vacuum.
        """
        alph = self.control.alphabet
        j = reconstruct_cost(self.clicks, self.control, alph, self.control.efficiency, times)
        p0 = np.zeros_like(j)
        p1 = np.zeros_like(j)
        starts = [s for s, _, _ in self.control.segments]
        for i, t in enumerate(np.asarray(times, dtype=float)):
            _, _, hyp = self.control.segments[max(bisect_right(starts, t) - 1, 0)]
            if hyp is Hypothesis.H1:
                p0[i] = j[i] / alph.xi0 if alph.xi0 > 0 else 0.0
            else:
                p1[i] = j[i] / alph.xi1 if alph.xi1 > 0 else 0.0
        return p0, p1


def dolinar_run(
    truth: int,
    alphabet: BinaryAlphabet,
    detector: DetectorModel,
    feedback: FeedbackModel,
    gen: np.random.Generator,
) -> tuple[Hypothesis, DolinarTrajectory]:
    """Simulate one closed-loop trial event by event.

    The proposal bound for signal candidates is evaluated at the current
    time and stays valid forward because the control magnitude only
    decays; every intervening event (flip, ghost, dark) discards the
    outstanding candidate and re-proposes, which is draw-order
    deterministic.  Clicks beyond the saturation cap still drive the
    electronics (dead time, afterpulsing) but are invisible to the
    decision logic, matching the batch pipeline where truncation acts on
    the output stream.
    """
    if truth not in (0, 1):
        raise ValueError(f"truth must be 0 or 1, got {truth}")
    env = alphabet.envelope
    duration = env.duration
    if not feedback.delay < duration:
        raise ValueError("feedback delay must be shorter than the slot")

    psi = math.sqrt(env.mean_photons / duration)
    psi_sig = psi if truth == 1 else 0.0
    eta = detector.efficiency
    cap = feedback.amplitude_cap
    if cap is None:
        cap = default_amplitude_cap(env.mean_photons, duration)
    pscale = feedback.policy_scale
    tau = feedback.delay
    cos_dphi = math.cos(feedback.phase_error)
    q = 4.0 * alphabet.xi0 * alphabet.xi1
    kappa = psi * psi
    sat_cap = (
        math.floor(detector.max_count_rate * duration * (1.0 + 1e-12))
        if math.isfinite(detector.max_count_rate)
        else math.inf
    )

    def magnitude(hyp: Hypothesis, t: float) -> float:
        if psi == 0.0:
            return 0.0
        x = eta * kappa * max(0.0, t - tau)
        g = _gain(_stable_d(q, x))
        factor = (1.0 + g) if hyp is Hypothesis.H1 else g
        return min(pscale * psi * factor, cap) if factor > 0.0 else 0.0

    hyp = Hypothesis.H1 if alphabet.xi1 >= alphabet.xi0 else Hypothesis.H0
    seg_start = 0.0
    segments: list[tuple[float, float, Hypothesis]] = []
    flips: deque[float] = deque()  # FIFO of scheduled flip times
    ghost = math.inf
    next_dark = math.inf
    if detector.dark_rate > 0.0:
        next_dark = -math.log1p(-gen.random()) / detector.dark_rate

    click_times: list[float] = []
    click_sources: list[ClickSource] = []
    click_hyps: list[Hypothesis] = []
    out_count = 0
    last_click = -math.inf
    t = 0.0

    def register(time: float, source: ClickSource):
        nonlocal ghost, out_count, last_click
        if time - last_click < detector.dead_time:
            return
        last_click = time
        if detector.afterpulse_prob > 0.0:
            u = gen.random()
            expiry = time + detector.dead_time
            if u < detector.afterpulse_prob and expiry <= duration:
                ghost = expiry
        if out_count < sat_cap:
            out_count += 1
            click_times.append(time)
            click_sources.append(source)
            click_hyps.append(hyp)
            if time + tau <= duration:
                flips.append(time + tau)

    while True:
        # worst-case |u| from now on: the H1 factor dominates and decays
        if psi == 0.0:
            u_bound = 0.0
        else:
            x_now = eta * kappa * max(0.0, t - tau)
            u_bound = min(cap, pscale * psi * (1.0 + _gain(_stable_d(q, x_now))))
        bound = (psi_sig + u_bound) ** 2
        t_sig = (t - math.log1p(-gen.random()) / bound) if bound > 0.0 else math.inf

        next_flip = flips[0] if flips else math.inf
        t_next = min(next_flip, ghost, next_dark, t_sig)
        if t_next > duration:
            break
        if next_flip == t_next:
            t = flips.popleft()
            segments.append((seg_start, t, hyp))
            seg_start = t
            hyp = hyp.other
        elif ghost == t_next:
            t, ghost = ghost, math.inf
            register(t, ClickSource.AFTERPULSE)
        elif next_dark == t_next:
            t = next_dark
            next_dark = t - math.log1p(-gen.random()) / detector.dark_rate
            register(t, ClickSource.DARK)
        else:
            t = t_sig
            u_ctrl = magnitude(hyp, t)
            if hyp is Hypothesis.H1:
                u_ctrl = -u_ctrl
            rate = psi_sig * psi_sig + u_ctrl * u_ctrl + 2.0 * psi_sig * u_ctrl * cos_dphi
            if rate > bound * (1.0 + _BOUND_TOLERANCE):
                raise RuntimeError(
                    f"rate {rate} exceeds proposal bound {bound} at t={t}; bad cap/envelope"
                )
            if gen.random() * bound < rate:
                if gen.random() < eta:
                    register(t, ClickSource.SIGNAL)

    segments.append((seg_start, duration, hyp))
    control = DolinarControlRecord(
        segments=tuple(segments),
        alphabet=alphabet,
        efficiency=eta,
        amplitude_cap=cap,
        policy_scale=pscale,
        delay=tau,
        phase_error=feedback.phase_error,
    )
    trajectory = DolinarTrajectory(
        click_times=tuple(click_times),
        click_sources=tuple(click_sources),
        click_hypotheses=tuple(click_hyps),
        final_hypothesis=hyp,
        control=control,
    )
    return hyp, trajectory


def log_likelihood_ratio(
    clicks: ClickRecord,
    control: DolinarControlRecord,
    alphabet: BinaryAlphabet,
    eta: float,
    horizon: float | None = None,
    include_boundary_click: bool = True,
) -> float:
    """Posterior log odds ln Lambda of the pulse codeword over vacuum.

    ln Lambda = ln(xi1/xi0) + sum_k ln[Phi1(t_k)/Phi0(t_k)]
                - eta * integral_0^horizon (Phi1 - Phi0) dt.

    The efficiency prefactor of each click density cancels in the
    ratio, so eta only scales the no-click exponent.  A click where one
    hypothetical rate vanishes is decisive: +inf when vacuum cannot
    explain it, -inf when the pulse cannot.
    """
    if horizon is None:
        horizon = alphabet.duration
    if not 0.0 <= horizon <= alphabet.duration:
        raise ValueError(f"horizon {horizon} outside [0, {alphabet.duration}]")
    if alphabet.xi0 == 0.0 or alphabet.xi1 == 0.0:
        raise ValueError("degenerate priors make the log odds infinite by fiat")

    total = math.log(alphabet.xi1 / alphabet.xi0)
    certain: set[Hypothesis] = set()
    for tk in clicks.times:
        if tk > horizon or (tk == horizon and not include_boundary_click):
            continue
        phi0, phi1 = control.rates(tk, left=True)
        if phi0 == 0.0 and phi1 == 0.0:
            raise ValueError(f"click at t={tk} has zero rate under both hypotheses")
        if phi0 == 0.0:
            certain.add(Hypothesis.H1)
        elif phi1 == 0.0:
            certain.add(Hypothesis.H0)
        else:
            total += math.log(phi1 / phi0)
    if len(certain) == 2:
        raise ValueError("record contains clicks impossible under each hypothesis")
    if Hypothesis.H1 in certain:
        return math.inf
    if Hypothesis.H0 in certain:
        return -math.inf
    return total - eta * control.rate_difference_integral(0.0, horizon)


def reconstruct_cost(
    clicks: ClickRecord,
    control: DolinarControlRecord,
    alphabet: BinaryAlphabet,
    eta: float,
    times: np.ndarray,
) -> np.ndarray:
    """Bayes cost J(t) = min posterior = 1/(1 + e^{|ln Lambda(t)|}).

    Under the optimal policy this tracks the closed-form cost and is
    continuous at clicks, because the log odds flips sign exactly there.
    """
    out = np.empty(len(times), dtype=float)
    for i, t in enumerate(np.asarray(times, dtype=float)):
        lam = log_likelihood_ratio(clicks, control, alphabet, eta, horizon=float(t))
        if math.isinf(lam):
            out[i] = 0.0
        else:
            ex = math.exp(-abs(lam))  # overflow-safe logistic tail
            out[i] = ex / (1.0 + ex)
    return out


def propagate_conditional_probabilities(
    p: tuple[float, float],
    t_start: float,
    t_end: float,
    phi0: RateFunction,
    phi1: RateFunction,
    branch: Hypothesis,
    eta: float,
    dlog_phi0: Callable[[float], float] | None = None,
    dlog_phi1: Callable[[float], float] | None = None,
) -> tuple[float, float]:
    """Integrate the smooth between-click evolution of the conditional
    error pair on one branch.

    Branch H1 (pulse favored):
        p0' = eta p0 [(ln Phi0)' - Phi0],   p1' = eta p1 [Phi1 - (ln Phi1)']
    Branch H0: the same pair with the roles of growth and decay swapped.
    Log-derivatives default to central differences; pass exact callables
    for stiff rates.
    """
    if t_end < t_start:
        raise ValueError("t_end must not precede t_start")
    if t_end == t_start:
        return p

    h = max(1e-7 * (t_end - t_start), 1e-12)

    def _dlog(rate: RateFunction, fallback_t: float) -> float:
        lo, hi = fallback_t - h, fallback_t + h
        lo = max(lo, t_start)
        hi = min(hi, t_end)
        a, b = rate(lo), rate(hi)
        if a <= 0.0 or b <= 0.0:
            raise ValueError(f"rate not strictly positive near t={fallback_t}")
        return (math.log(b) - math.log(a)) / (hi - lo)

    def rhs(t, y):
        r0, r1 = phi0(t), phi1(t)
        if r0 <= 0.0 or r1 <= 0.0:
            raise ValueError(f"rate not strictly positive at t={t}")
        l0 = dlog_phi0(t) if dlog_phi0 is not None else _dlog(phi0, t)
        l1 = dlog_phi1(t) if dlog_phi1 is not None else _dlog(phi1, t)
        if branch is Hypothesis.H1:
            return [eta * y[0] * (l0 - r0), eta * y[1] * (r1 - l1)]
        return [eta * y[0] * (r0 - l0), eta * y[1] * (l1 - r1)]

    sol = solve_ivp(rhs, (t_start, t_end), list(p), method="RK45", rtol=1e-9, atol=1e-14)
    if not sol.success:
        raise RuntimeError(f"conditional-probability integration failed: {sol.message}")
    return float(sol.y[0, -1]), float(sol.y[1, -1])
