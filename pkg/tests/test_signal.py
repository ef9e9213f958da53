import math

import pytest

from cohrx.signal import BinaryAlphabet, SignalEnvelope


def test_rectangular_amplitude_is_flat_inside_slot():
    env = SignalEnvelope(duration=2.0, mean_photons=3.0)
    amp = math.sqrt(3.0 / 2.0)
    assert env.amplitude(0.0) == pytest.approx(amp, rel=1e-15)
    assert env.amplitude(1.7) == pytest.approx(amp, rel=1e-15)
    assert env.amplitude(2.0) == pytest.approx(amp, rel=1e-15)
    assert env.amplitude(-0.1) == 0.0
    assert env.amplitude(2.1) == 0.0


def test_flux_integrates_to_mean_photons():
    env = SignalEnvelope(duration=0.5, mean_photons=1.3)
    # rectangular: flux * T recovers the photon budget exactly
    assert env.flux(0.25) * env.duration == pytest.approx(1.3, rel=1e-12)


def test_cumulative_photons_linear_in_time():
    env = SignalEnvelope(duration=1.0, mean_photons=1.0)
    assert env.mean_photons_by(0.0) == 0.0
    assert env.mean_photons_by(0.5) == pytest.approx(0.5, rel=1e-15)
    assert env.mean_photons_by(1.0) == pytest.approx(1.0, rel=1e-15)


def test_cumulative_photons_monotone():
    env = SignalEnvelope(duration=2.0, mean_photons=0.7)
    grid = [0.0, 0.3, 0.9, 1.5, 2.0]
    vals = [env.mean_photons_by(t) for t in grid]
    assert all(b >= a for a, b in zip(vals, vals[1:]))


def test_cumulative_photons_rejects_out_of_slot_times():
    env = SignalEnvelope(duration=1.0, mean_photons=1.0)
    with pytest.raises(ValueError):
        env.mean_photons_by(-1e-9)
    with pytest.raises(ValueError):
        env.mean_photons_by(1.0 + 1e-9)


def test_envelope_validation():
    with pytest.raises(ValueError):
        SignalEnvelope(duration=0.0, mean_photons=1.0)
    with pytest.raises(ValueError):
        SignalEnvelope(duration=1.0, mean_photons=-0.1)
    with pytest.raises(ValueError):
        SignalEnvelope(duration=1.0, mean_photons=1.0, shape="gaussian")


def test_overlap_frozen_values():
    assert BinaryAlphabet(SignalEnvelope(1.0, 0.0)).overlap() == 1.0
    assert BinaryAlphabet(SignalEnvelope(1.0, 1.0)).overlap() == pytest.approx(
        0.6065306597126334, rel=1e-12
    )
    assert BinaryAlphabet(SignalEnvelope(1.0, 4.0)).overlap() == pytest.approx(
        0.1353352832366127, rel=1e-12
    )


def test_overlap_strictly_decreasing_in_photon_number():
    values = [
        BinaryAlphabet(SignalEnvelope(1.0, nb)).overlap() for nb in (0.0, 0.3, 1.0, 2.5, 4.0)
    ]
    assert all(b < a for a, b in zip(values, values[1:]))


def test_alphabet_prior_validation():
    env = SignalEnvelope(1.0, 1.0)
    BinaryAlphabet(env, 0.25, 0.75)  # fine
    with pytest.raises(ValueError):
        BinaryAlphabet(env, 0.6, 0.6)
    with pytest.raises(ValueError):
        BinaryAlphabet(env, -0.1, 1.1)


def test_alphabet_exposes_envelope_shortcuts():
    alph = BinaryAlphabet(SignalEnvelope(2.0, 0.5), 0.4, 0.6)
    assert alph.duration == 2.0
    assert alph.mean_photons == 0.5
    assert alph.xi0 == 0.4 and alph.xi1 == 0.6
