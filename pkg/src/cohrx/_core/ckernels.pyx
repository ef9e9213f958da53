# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled trial kernels.

Independent C transcription of pykernels, same signatures, same
draw-order contract.  Every uniform comes from the same Philox
next_double the Generator uses and every transcendental goes through
libm, so the two implementations produce bit-identical error counts;
the test suite holds them to exact equality.
"""

from cpython.pycapsule cimport PyCapsule_GetPointer, PyCapsule_IsValid
from libc.math cimport INFINITY, cos, expm1, floor, isfinite, log1p, pow, sqrt
from libc.stdlib cimport free, malloc, realloc

import math

import numpy as np

from numpy.random cimport bitgen_t

from ..analytic import sh_photon_distribution
from ..receivers import default_amplitude_cap
from .streams import TrialStreams

cdef const char *_CAPSULE = b"BitGenerator"


cdef inline double nxt(bitgen_t *rng) noexcept:
    return rng.next_double(rng.state)


cdef inline double _stable_d(double q, double x) noexcept:
    cdef double val = (1.0 - q) + q * (-expm1(-x))
    return sqrt(val if val > 0.0 else 0.0)


cdef inline double _gain(double d) noexcept:
    return INFINITY if d == 0.0 else 0.5 * (1.0 - d) / d


# growable double array; push keeps amortized O(1) without Python objects
cdef struct DBuf:
    double *data
    Py_ssize_t n
    Py_ssize_t cap


cdef int db_init(DBuf *b, Py_ssize_t cap) except -1:
    b.data = <double *> malloc(cap * sizeof(double))
    if b.data == NULL:
        raise MemoryError()
    b.n = 0
    b.cap = cap
    return 0


cdef int db_push(DBuf *b, double v) except -1:
    cdef double *p
    if b.n == b.cap:
        p = <double *> realloc(b.data, 2 * b.cap * sizeof(double))
        if p == NULL:
            raise MemoryError()
        b.data = p
        b.cap *= 2
    b.data[b.n] = v
    b.n += 1
    return 0


cdef long _sweep(DBuf *sig, DBuf *dark, DBuf *pend, double dead, double ap,
                 double duration, bitgen_t *rng) except -1:
    """Dead-time and afterpulse sweep over merged click streams.

    Mirrors apply_imperfections stages 3 and 4: signal wins time ties
    against dark, a pending ghost fires only when strictly earliest,
    every registered click draws one afterpulse uniform iff ap > 0.
    Returns the registered count before saturation.
    """
    cdef Py_ssize_t si = 0, di = 0, ph = 0
    cdef double last = -INFINITY
    cdef double t, mt, u, expiry
    cdef long count = 0
    cdef int have, take_sig
    pend.n = 0
    while si < sig.n or di < dark.n or ph < pend.n:
        take_sig = 0
        have = 0
        if si < sig.n and (di >= dark.n or sig.data[si] <= dark.data[di]):
            mt = sig.data[si]
            take_sig = 1
            have = 1
        elif di < dark.n:
            mt = dark.data[di]
            have = 1
        if ph < pend.n and (have == 0 or pend.data[ph] < mt):
            t = pend.data[ph]
            ph += 1
        elif take_sig:
            t = mt
            si += 1
        else:
            t = mt
            di += 1
        if t - last < dead:
            continue
        count += 1
        last = t
        if ap > 0.0:
            u = nxt(rng)
            expiry = t + dead
            if u < ap and expiry <= duration:
                db_push(pend, expiry)
    return count


cdef inline long _saturate(long count, double max_rate, double duration) noexcept:
    cdef double cap_events = max_rate * duration
    if isfinite(cap_events) and count > cap_events:
        return <long> floor(cap_events * (1.0 + 1e-12))
    return count


cdef int _kennedy_trial(bitgen_t *rng, DBuf *sig, DBuf *dark, DBuf *pend,
                        double xi1, double pulse_rate, double duration,
                        double efficiency, double dark_rate, double dead,
                        double ap, double max_rate) except -1:
    cdef int truth = 1 if nxt(rng) < xi1 else 0
    cdef double t
    cdef Py_ssize_t w, j
    cdef long count
    sig.n = 0
    dark.n = 0
    if truth == 1 and pulse_rate > 0.0:
        t = 0.0
        while True:
            t -= log1p(-nxt(rng)) / pulse_rate
            if t > duration:
                break
            # constant envelope: the accept draw is consumed regardless
            if nxt(rng) * pulse_rate < pulse_rate:
                db_push(sig, t)
    w = 0
    for j in range(sig.n):
        if nxt(rng) < efficiency:
            sig.data[w] = sig.data[j]
            w += 1
    sig.n = w
    if dark_rate > 0.0:
        t = 0.0
        while True:
            t -= log1p(-nxt(rng)) / dark_rate
            if t > duration:
                break
            db_push(dark, t)
    count = _saturate(_sweep(sig, dark, pend, dead, ap, duration, rng),
                      max_rate, duration)
    return (count > 0) != truth


cdef int _sh_trial(bitgen_t *rng, DBuf *sig, DBuf *dark, DBuf *pend,
                   double xi1, double[::1] cdf0, double[::1] cdf1,
                   double duration, double efficiency, double dark_rate,
                   double dead, double ap, double max_rate) except -1:
    cdef int truth = 1 if nxt(rng) < xi1 else 0
    cdef double[::1] cdf = cdf1 if truth == 1 else cdf0
    cdef double u = nxt(rng)
    # searchsorted side="right": first index with cdf[idx] > u, clamped
    cdef Py_ssize_t lo = 0, hi = cdf.shape[0], mid
    while lo < hi:
        mid = lo + ((hi - lo) >> 1)
        if cdf[mid] <= u:
            lo = mid + 1
        else:
            hi = mid
    cdef Py_ssize_t n = lo
    if n > cdf.shape[0] - 1:
        n = cdf.shape[0] - 1
    cdef Py_ssize_t k = 0, j, m, w
    cdef double v
    cdef long count
    for j in range(n):
        if nxt(rng) < efficiency:
            k += 1
    sig.n = 0
    for j in range(k):
        db_push(sig, nxt(rng) * duration)
    # photon counts are tiny, insertion sort is plenty
    for j in range(1, sig.n):
        v = sig.data[j]
        m = j
        while m > 0 and sig.data[m - 1] > v:
            sig.data[m] = sig.data[m - 1]
            m -= 1
        sig.data[m] = v
    # electronics pass runs with efficiency pinned to 1; the thinning
    # draw is still consumed per click, matching the reference pipeline
    w = 0
    for j in range(sig.n):
        if nxt(rng) < 1.0:
            sig.data[w] = sig.data[j]
            w += 1
    sig.n = w
    dark.n = 0
    if dark_rate > 0.0:
        v = 0.0
        while True:
            v -= log1p(-nxt(rng)) / dark_rate
            if v > duration:
                break
            db_push(dark, v)
    count = _saturate(_sweep(sig, dark, pend, dead, ap, duration, rng),
                      max_rate, duration)
    return (count > 0) != truth


cdef int _dol_register(bitgen_t *rng, DBuf *flips, double time, double dead,
                       double ap, double duration, double tau, double sat_cap,
                       double *ghost, double *last_click, long *out_count) except -1:
    cdef double u, expiry
    if time - last_click[0] < dead:
        return 0
    last_click[0] = time
    if ap > 0.0:
        u = nxt(rng)
        expiry = time + dead
        if u < ap and expiry <= duration:
            ghost[0] = expiry
    if out_count[0] < sat_cap:
        out_count[0] += 1
        if time + tau <= duration:
            db_push(flips, time + tau)
    return 0


cdef int _dolinar_trial(bitgen_t *rng, DBuf *flips, double xi0, double xi1,
                        double nbar, double duration, double eta,
                        double dark_rate, double dead, double ap,
                        double max_rate, double tau, double cos_dphi,
                        double cap, double pscale) except -1:
    cdef int truth = 1 if nxt(rng) < xi1 else 0
    cdef double psi = sqrt(nbar / duration)
    cdef double psi_sig = psi if truth == 1 else 0.0
    cdef double q = 4.0 * xi0 * xi1
    cdef double kappa = psi * psi
    cdef double sat_cap = INFINITY
    if isfinite(max_rate * duration):
        sat_cap = floor(max_rate * duration * (1.0 + 1e-12))
    cdef int hyp = 1 if xi1 >= xi0 else 0
    cdef Py_ssize_t head = 0
    cdef double ghost = INFINITY
    cdef double next_dark = INFINITY
    cdef long out_count = 0
    cdef double last_click = -INFINITY
    cdef double t = 0.0
    cdef double x_now, g, factor, uu, u_bound, bound, t_sig
    cdef double next_flip, t_next, u_ctrl, rate
    flips.n = 0
    if dark_rate > 0.0:
        next_dark = -log1p(-nxt(rng)) / dark_rate
    while True:
        # worst-case |u| from now on: the H1 factor dominates and decays
        if psi == 0.0:
            u_bound = 0.0
        else:
            x_now = eta * kappa * (t - tau if t > tau else 0.0)
            uu = pscale * psi * (1.0 + _gain(_stable_d(q, x_now)))
            u_bound = cap if cap < uu else uu
        bound = pow(psi_sig + u_bound, 2.0)
        t_sig = (t - log1p(-nxt(rng)) / bound) if bound > 0.0 else INFINITY
        next_flip = flips.data[head] if head < flips.n else INFINITY
        t_next = next_flip
        if ghost < t_next:
            t_next = ghost
        if next_dark < t_next:
            t_next = next_dark
        if t_sig < t_next:
            t_next = t_sig
        if t_next > duration:
            break
        if next_flip == t_next:
            t = next_flip
            head += 1
            hyp = 1 - hyp
        elif ghost == t_next:
            t = ghost
            ghost = INFINITY
            _dol_register(rng, flips, t, dead, ap, duration, tau, sat_cap,
                          &ghost, &last_click, &out_count)
        elif next_dark == t_next:
            t = next_dark
            next_dark = t - log1p(-nxt(rng)) / dark_rate
            _dol_register(rng, flips, t, dead, ap, duration, tau, sat_cap,
                          &ghost, &last_click, &out_count)
        else:
            t = t_sig
            if psi == 0.0:
                u_ctrl = 0.0
            else:
                x_now = eta * kappa * (t - tau if t > tau else 0.0)
                g = _gain(_stable_d(q, x_now))
                factor = (1.0 + g) if hyp == 1 else g
                if factor > 0.0:
                    uu = pscale * psi * factor
                    u_ctrl = uu if uu < cap else cap
                else:
                    u_ctrl = 0.0
            if hyp == 1:
                u_ctrl = -u_ctrl
            rate = psi_sig * psi_sig + u_ctrl * u_ctrl + 2.0 * psi_sig * u_ctrl * cos_dphi
            if rate > bound * (1.0 + 1e-9):
                raise RuntimeError(
                    f"rate {rate} exceeds proposal bound {bound} at t={t}; bad cap/envelope"
                )
            if nxt(rng) * bound < rate:
                if nxt(rng) < eta:
                    _dol_register(rng, flips, t, dead, ap, duration, tau, sat_cap,
                                  &ghost, &last_click, &out_count)
    return hyp != truth


cdef bitgen_t *_raw(object bitgenerator) except NULL:
    capsule = bitgenerator.capsule
    if not PyCapsule_IsValid(capsule, _CAPSULE):
        raise ValueError("invalid BitGenerator capsule")
    return <bitgen_t *> PyCapsule_GetPointer(capsule, _CAPSULE)


def run_kennedy(run_seed, Py_ssize_t start, Py_ssize_t count, double xi1,
                double nbar, double duration, double efficiency,
                double dark_rate, double dead_time, double afterpulse_prob,
                double max_count_rate):
    streams = TrialStreams(run_seed)
    cdef bitgen_t *rng = _raw(streams._bitgen)
    cdef double pulse_rate = nbar / duration
    cdef DBuf sig, dark, pend
    cdef long errors = 0
    cdef Py_ssize_t i
    db_init(&sig, 64)
    db_init(&dark, 64)
    db_init(&pend, 8)
    try:
        for i in range(start, start + count):
            streams.rekey(i)
            errors += _kennedy_trial(rng, &sig, &dark, &pend, xi1, pulse_rate,
                                     duration, efficiency, dark_rate, dead_time,
                                     afterpulse_prob, max_count_rate)
    finally:
        free(sig.data)
        free(dark.data)
        free(pend.data)
    return errors


def run_sh(run_seed, Py_ssize_t start, Py_ssize_t count, double xi1,
           double theta, double c0, double nbar, double duration,
           double efficiency, double dark_rate, double dead_time,
           double afterpulse_prob, double max_count_rate):
    if abs(c0 - math.exp(-0.5 * nbar)) > 1e-9:
        raise ValueError(f"overlap c0={c0} inconsistent with nbar={nbar}")
    pmf0, pmf1 = sh_photon_distribution(theta, nbar)
    cdef double[::1] cdf0 = np.cumsum(pmf0)
    cdef double[::1] cdf1 = np.cumsum(pmf1)
    streams = TrialStreams(run_seed)
    cdef bitgen_t *rng = _raw(streams._bitgen)
    cdef DBuf sig, dark, pend
    cdef long errors = 0
    cdef Py_ssize_t i
    db_init(&sig, 64)
    db_init(&dark, 64)
    db_init(&pend, 8)
    try:
        for i in range(start, start + count):
            streams.rekey(i)
            errors += _sh_trial(rng, &sig, &dark, &pend, xi1, cdf0, cdf1,
                                duration, efficiency, dark_rate, dead_time,
                                afterpulse_prob, max_count_rate)
    finally:
        free(sig.data)
        free(dark.data)
        free(pend.data)
    return errors


def run_dolinar(run_seed, Py_ssize_t start, Py_ssize_t count, double xi0,
                double xi1, double nbar, double duration, double efficiency,
                double dark_rate, double dead_time, double afterpulse_prob,
                double max_count_rate, double delay, double phase_error,
                amplitude_cap, double policy_scale):
    if amplitude_cap is None:
        amplitude_cap = default_amplitude_cap(nbar, duration)
    if not delay < duration:
        raise ValueError("feedback delay must be shorter than the slot")
    cdef double cap = amplitude_cap
    cdef double cos_dphi = cos(phase_error)
    streams = TrialStreams(run_seed)
    cdef bitgen_t *rng = _raw(streams._bitgen)
    cdef DBuf flips
    cdef long errors = 0
    cdef Py_ssize_t i
    db_init(&flips, 64)
    try:
        for i in range(start, start + count):
            streams.rekey(i)
            errors += _dolinar_trial(rng, &flips, xi0, xi1, nbar, duration,
                                     efficiency, dark_rate, dead_time,
                                     afterpulse_prob, max_count_rate, delay,
                                     cos_dphi, cap, policy_scale)
    finally:
        free(flips.data)
    return errors
