"""Detector pipeline tests.

Statistical checks run on fixed seeds (one per-repetition stream keyed
by repetition index), so they are deterministic; tolerances are 3-sigma
or 1%-level test statistics as noted inline.
"""

import math

import numpy as np
import pytest
from scipy import stats

from cohrx.analytic import bernoulli_pmf, sh_optimal_theta
from cohrx.detector import (
    ClickRecord,
    ClickSource,
    DetectorModel,
    RateFunction,
    apply_imperfections,
    sample_arrivals,
    sample_sh_click_count,
)
from cohrx._core.streams import TrialStreams

THETA1 = -0.3258448347506541


class TestModels:
    def test_default_is_the_realistic_apd(self):
        m = DetectorModel()
        assert m.efficiency == 0.5
        assert m.dark_rate == 250.0
        assert m.dead_time == 50e-9
        assert m.afterpulse_prob == 0.01
        assert m.max_count_rate == 1e7

    def test_ideal_has_no_imperfections(self):
        m = DetectorModel.ideal()
        assert m.efficiency == 1.0
        assert m.dark_rate == 0.0 and m.dead_time == 0.0 and m.afterpulse_prob == 0.0
        assert math.isinf(m.max_count_rate)

    def test_validation(self):
        with pytest.raises(ValueError):
            DetectorModel(efficiency=1.2)
        with pytest.raises(ValueError):
            DetectorModel(dark_rate=-1.0)
        with pytest.raises(ValueError):
            DetectorModel(afterpulse_prob=1.0)
        with pytest.raises(ValueError):
            DetectorModel(max_count_rate=0.0)
        with pytest.raises(ValueError):
            DetectorModel(dead_time=0.0, afterpulse_prob=0.5)

    def test_click_record_validation(self):
        ClickRecord((0.1, 0.2), (ClickSource.SIGNAL, ClickSource.DARK))
        with pytest.raises(ValueError):
            ClickRecord((0.2, 0.1), (ClickSource.SIGNAL, ClickSource.SIGNAL))
        with pytest.raises(ValueError):
            ClickRecord((0.1, 0.1), (ClickSource.SIGNAL, ClickSource.SIGNAL))
        with pytest.raises(ValueError):
            ClickRecord((-0.1,), (ClickSource.SIGNAL,))
        with pytest.raises(ValueError):
            ClickRecord((0.1,), ())

    def test_rate_function_constant(self):
        r = RateFunction.constant(5.0)
        assert r(0.3) == 5.0 and r.upper_bound == 5.0
        with pytest.raises(ValueError):
            RateFunction.constant(-1.0)


class TestSampleArrivals:
    def test_zero_bound_is_empty_and_consumes_nothing(self):
        streams = TrialStreams(11)
        gen = streams.rekey(0)
        rec = sample_arrivals(RateFunction.constant(0.0), 1.0, gen)
        assert rec.count == 0
        # stream untouched: next draw equals the first draw of a fresh key
        assert gen.random() == TrialStreams(11).rekey(0).random()

    def test_zero_rate_under_positive_bound_is_empty(self):
        gen = TrialStreams(12).rekey(0)
        rec = sample_arrivals(RateFunction(lambda t: 0.0, 10.0), 1.0, gen)
        assert rec.count == 0

    def test_bound_violation_raises(self):
        gen = TrialStreams(13).rekey(0)
        with pytest.raises(RuntimeError):
            sample_arrivals(RateFunction(lambda t: 2.0, 1.0), 10.0, gen)

    def test_infinite_bound_rejected(self):
        gen = TrialStreams(14).rekey(0)
        with pytest.raises(ValueError):
            sample_arrivals(RateFunction(lambda t: 1.0, math.inf), 1.0, gen)

    def test_record_is_sorted_and_in_window(self):
        gen = TrialStreams(15).rekey(0)
        rec = sample_arrivals(RateFunction.constant(50.0), 2.0, gen)
        assert all(b > a for a, b in zip(rec.times, rec.times[1:]))
        assert all(0.0 <= t <= 2.0 for t in rec.times)
        assert all(s == ClickSource.SIGNAL for s in rec.sources)

    def test_mean_count_and_poisson_distribution(self):
        # constant 10/s over 1 s: mean 10, 3-sigma band 0.03 at 1e5 reps,
        # and the count histogram is Poisson(10) by chi-square at 1%
        reps = 100_000
        streams = TrialStreams(2026)
        rate = RateFunction.constant(10.0)
        counts = np.array(
            [sample_arrivals(rate, 1.0, streams.rekey(i)).count for i in range(reps)]
        )
        assert abs(counts.mean() - 10.0) < 3.0 * math.sqrt(10.0 / reps)

        kmax = 25
        observed = np.bincount(np.minimum(counts, kmax), minlength=kmax + 1)
        pmf = stats.poisson.pmf(np.arange(kmax + 1), 10.0)
        pmf[kmax] = 1.0 - pmf[:kmax].sum()  # pooled tail
        chi2 = ((observed - reps * pmf) ** 2 / (reps * pmf)).sum()
        assert chi2 < stats.chi2.ppf(0.99, df=kmax)

    def test_first_click_waiting_time_is_exponential(self):
        # constant rate 1/s on [0,1]: the first-click law restricted to
        # the slot is the truncated exponential; KS at the 1% level
        reps = 10_000
        streams = TrialStreams(2027)
        rate = RateFunction.constant(1.0)
        first = [
            rec.times[0]
            for i in range(reps)
            if (rec := sample_arrivals(rate, 1.0, streams.rekey(i))).count > 0
        ]
        norm = 1.0 - math.exp(-1.0)
        result = stats.kstest(first, lambda t: (1.0 - np.exp(-t)) / norm)
        assert result.pvalue > 0.01

    def test_inhomogeneous_ramp(self):
        # rate 2t on [0,1]: expected count 1, arrival density proportional
        # to t so the pooled arrival CDF is t^2
        reps = 10_000
        streams = TrialStreams(2028)
        rate = RateFunction(lambda t: 2.0 * t, 2.0)
        pooled = []
        total = 0
        for i in range(reps):
            rec = sample_arrivals(rate, 1.0, streams.rekey(i))
            total += rec.count
            pooled.extend(rec.times)
        assert abs(total / reps - 1.0) < 3.0 * math.sqrt(1.0 / reps)
        assert stats.kstest(pooled, lambda t: np.asarray(t) ** 2).pvalue > 0.01


class TestApplyImperfections:
    def test_identity_pipeline(self):
        gen = TrialStreams(21).rekey(0)
        rec = ClickRecord((0.1, 0.4, 0.9), (ClickSource.SIGNAL,) * 3)
        out = apply_imperfections(rec, DetectorModel.ideal(), 1.0, gen)
        assert out == rec

    def test_dark_counts_alone(self):
        # empty input, 250/s over 1 ms: mean count 0.25
        reps = 100_000
        streams = TrialStreams(22)
        model = DetectorModel(
            efficiency=1.0, dark_rate=250.0, dead_time=0.0, afterpulse_prob=0.0,
            max_count_rate=math.inf,
        )
        total = sum(
            apply_imperfections(ClickRecord.empty(), model, 1e-3, streams.rekey(i)).count
            for i in range(reps)
        )
        assert abs(total / reps - 0.25) < 3.0 * math.sqrt(0.25 / reps)

    def test_dead_time_prunes_close_pairs(self):
        gen = TrialStreams(23).rekey(0)
        model = DetectorModel(
            efficiency=1.0, dark_rate=0.0, dead_time=50e-9, afterpulse_prob=0.0,
            max_count_rate=math.inf,
        )
        rec = ClickRecord((100e-9, 120e-9), (ClickSource.SIGNAL,) * 2)
        out = apply_imperfections(rec, model, 1e-6, gen)
        assert out.times == (100e-9,)

    def test_dead_time_boundary_gap_survives(self):
        gen = TrialStreams(24).rekey(0)
        model = DetectorModel(
            efficiency=1.0, dark_rate=0.0, dead_time=50e-9, afterpulse_prob=0.0,
            max_count_rate=math.inf,
        )
        rec = ClickRecord((100e-9, 150e-9), (ClickSource.SIGNAL,) * 2)
        assert apply_imperfections(rec, model, 1e-6, gen).count == 2

    def test_efficiency_thinning_matches_binomial_pmf(self):
        # 5 input clicks, eta=0.37: output count is Binomial(5, 0.37),
        # chi-square at the 1% level
        reps = 100_000
        eta = 0.37
        streams = TrialStreams(25)
        model = DetectorModel(
            efficiency=eta, dark_rate=0.0, dead_time=0.0, afterpulse_prob=0.0,
            max_count_rate=math.inf,
        )
        rec = ClickRecord(
            (0.1, 0.2, 0.3, 0.4, 0.5), (ClickSource.SIGNAL,) * 5
        )
        counts = np.array(
            [apply_imperfections(rec, model, 1.0, streams.rekey(i)).count for i in range(reps)]
        )
        observed = np.bincount(counts, minlength=6)
        expected = reps * np.array([bernoulli_pmf(5, k, eta) for k in range(6)])
        chi2 = ((observed - expected) ** 2 / expected).sum()
        assert chi2 < stats.chi2.ppf(0.99, df=5)

    def test_afterpulse_ghost_at_dead_time_expiry(self):
        reps = 20_000
        streams = TrialStreams(26)
        model = DetectorModel(
            efficiency=1.0, dark_rate=0.0, dead_time=1e-3, afterpulse_prob=0.4,
            max_count_rate=math.inf,
        )
        rec = ClickRecord((0.1,), (ClickSource.SIGNAL,))
        ghosts = 0
        for i in range(reps):
            out = apply_imperfections(rec, model, 1.0, streams.rekey(i))
            if out.count > 1:
                ghosts += 1
                assert out.times[1] == pytest.approx(0.1 + 1e-3, abs=1e-15)
                assert out.sources[1] == ClickSource.AFTERPULSE
        # chains make count>=2 slightly more likely than 0.4? no: count>1
        # happens iff the first ghost fires, probability exactly 0.4
        assert abs(ghosts / reps - 0.4) < 3.0 * math.sqrt(0.4 * 0.6 / reps)

    def test_afterpulse_chain(self):
        # with ap=0.9 chains extend; every gap equals the dead time
        streams = TrialStreams(27)
        model = DetectorModel(
            efficiency=1.0, dark_rate=0.0, dead_time=1e-3, afterpulse_prob=0.9,
            max_count_rate=math.inf,
        )
        rec = ClickRecord((0.1,), (ClickSource.SIGNAL,))
        longest = 0
        for i in range(500):
            out = apply_imperfections(rec, model, 1.0, streams.rekey(i))
            longest = max(longest, out.count)
            for a, b in zip(out.times, out.times[1:]):
                assert b - a == pytest.approx(1e-3, abs=1e-12)
        assert longest >= 3

    def test_ghost_past_horizon_not_inserted(self):
        streams = TrialStreams(28)
        model = DetectorModel(
            efficiency=1.0, dark_rate=0.0, dead_time=1e-3, afterpulse_prob=0.99,
            max_count_rate=math.inf,
        )
        rec = ClickRecord((0.9995,), (ClickSource.SIGNAL,))
        for i in range(200):
            out = apply_imperfections(rec, model, 1.0, streams.rekey(i))
            assert out.count == 1

    def test_saturation_truncates(self):
        gen = TrialStreams(29).rekey(0)
        model = DetectorModel(
            efficiency=1.0, dark_rate=0.0, dead_time=0.0, afterpulse_prob=0.0,
            max_count_rate=20.0,
        )
        times = tuple(np.linspace(0.01, 0.99, 100))
        rec = ClickRecord(times, (ClickSource.SIGNAL,) * 100)
        out = apply_imperfections(rec, model, 1.0, gen)
        assert out.count == 20
        assert out.times == times[:20]

    def test_full_pipeline_respects_record_invariants(self):
        streams = TrialStreams(30)
        model = DetectorModel()  # realistic APD
        duration = 1e-3
        for i in range(300):
            gen = streams.rekey(i)
            ideal = sample_arrivals(RateFunction.constant(5e4), duration, gen)
            out = apply_imperfections(ideal, model, duration, gen)
            assert all(b - a >= model.dead_time for a, b in zip(out.times, out.times[1:]))
            assert all(0.0 <= t <= duration for t in out.times)
            assert out.count <= model.max_count_rate * duration


class TestShClickCount:
    IDEAL = DetectorModel.ideal()

    def test_vacuum_with_no_rotation_never_clicks(self):
        streams = TrialStreams(41)
        for i in range(200):
            k = sample_sh_click_count(
                0, 0.0, math.exp(-0.5), 1.0, self.IDEAL, 1.0, streams.rekey(i)
            )
            assert k == 0

    def test_unrotated_coherent_codeword_vacuum_weight(self):
        # theta=0, ideal detector: P(count=0) = e^{-nbar}
        reps = 100_000
        streams = TrialStreams(42)
        zeros = sum(
            sample_sh_click_count(1, 0.0, math.exp(-0.5), 1.0, self.IDEAL, 1.0, streams.rekey(i))
            == 0
            for i in range(reps)
        )
        p = math.exp(-1.0)
        assert abs(zeros / reps - p) < 3.0 * math.sqrt(p * (1 - p) / reps)

    def test_rotated_vacuum_click_probability(self):
        # theta*(nbar=1), vacuum codeword, eta=1: P(count>=1) = sin^2 theta*
        reps = 100_000
        streams = TrialStreams(43)
        theta = sh_optimal_theta(0.5, 0.5, math.exp(-0.5))
        clicks = sum(
            sample_sh_click_count(
                0, theta, math.exp(-0.5), 1.0, self.IDEAL, 1.0, streams.rekey(i)
            )
            >= 1
            for i in range(reps)
        )
        p = math.sin(theta) ** 2
        assert abs(clicks / reps - p) < 3.0 * math.sqrt(p * (1 - p) / reps)

    def test_validation(self):
        gen = TrialStreams(44).rekey(0)
        with pytest.raises(ValueError):
            sample_sh_click_count(2, THETA1, math.exp(-0.5), 1.0, self.IDEAL, 1.0, gen)
        with pytest.raises(ValueError):
            sample_sh_click_count(0, THETA1, 0.9, 1.0, self.IDEAL, 1.0, gen)
