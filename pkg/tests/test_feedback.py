import numpy as np
import pytest
from hypothesis import assume, given, strategies as st

from feedback_gi.feedback import (
    AnalogControllerConfig,
    ClampSaturationError,
    ControllerConfigError,
    ControllerState,
    DigitalControllerConfig,
    MonotonicityError,
    analog_step,
    digital_step,
    monotonicity_check,
    settle,
)
from feedback_gi.optics import NoiseModel, bucket_signal

DIGITAL = DigitalControllerConfig(b=0.5, delta=0.01, i_min=0.01, i_max=10.0)


def _digital_from(T, I, cfg=DIGITAL):
    return digital_step(ControllerState(I), bucket_signal(I, T).B, cfg)


def test_digital_fixed_point_holds():
    assert _digital_from(0.5, 1.0).intensity == 1.0


def test_digital_decrease_branch():
    out = _digital_from(0.5, 2.0)
    assert out.intensity == pytest.approx(1.99)
    assert out.step_count == 1


def test_digital_increase_hits_clamp():
    assert _digital_from(0.0, DIGITAL.i_max).intensity == DIGITAL.i_max


def test_digital_default_step():
    assert DigitalControllerConfig(b=0.5).delta == 0.5 / 200


def test_config_validation():
    with pytest.raises(ControllerConfigError):
        DigitalControllerConfig(b=0)
    with pytest.raises(ControllerConfigError):
        DigitalControllerConfig(b=1, delta=5, i_min=1, i_max=2)
    with pytest.raises(ControllerConfigError):
        AnalogControllerConfig(U=1, relaxation=0)
    with pytest.raises(ControllerConfigError):
        AnalogControllerConfig(U=1, relaxation=1.5)
    with pytest.raises(ControllerConfigError):
        AnalogControllerConfig(U=1, i_min=2, i_max=1)
    with pytest.raises(ControllerConfigError):
        AnalogControllerConfig(U=1, scheme="rk4")


@pytest.mark.parametrize("scheme", ["implicit", "explicit"])
def test_analog_fixed_point_examples(scheme):
    cfg = AnalogControllerConfig(U=1.0, relaxation=1.0, scheme=scheme)
    assert analog_step(ControllerState(0.5), bucket_signal(0.5, 1.0).B, cfg).intensity == 0.5
    for lam in (0.1, 0.5, 1.0):
        cfg = AnalogControllerConfig(U=1.0, relaxation=lam, scheme=scheme)
        assert analog_step(ControllerState(1.0), 0.0, cfg).intensity == 1.0


@pytest.mark.parametrize("scheme", ["implicit", "explicit"])
def test_analog_fifty_steps(scheme):
    cfg = AnalogControllerConfig(U=1.0, relaxation=0.5, scheme=scheme)
    state = ControllerState(1.0)
    for _ in range(50):
        state = analog_step(state, bucket_signal(state.intensity, 0.25).B, cfg)
    assert state.intensity == pytest.approx(0.8, abs=1e-6)
    assert state.step_count == 50


def test_explicit_scheme_is_the_literal_update():
    cfg = AnalogControllerConfig(U=1.0, relaxation=0.5, scheme="explicit")
    assert analog_step(ControllerState(1.0), 0.25, cfg).intensity == pytest.approx(1.0 + 0.5 * ((1.0 - 0.25) - 1.0))


def test_explicit_scheme_oscillates_at_stability_edge():
    # multiplier 1 - r(1 + T) = -1: period-2 cycle, never settles
    cfg = AnalogControllerConfig(U=1.0, relaxation=1.0, scheme="explicit", i_max=2.0)
    r = settle(cfg, 1.0, max_steps=200, initial=cfg.i_min)
    assert not r.settled
    assert abs(r.intensity - 0.5) > 0.4


def test_settle_analog():
    cfg = AnalogControllerConfig(U=1.0, relaxation=0.5)
    r = settle(cfg, 0.5)
    assert r.settled and r.steps < 100
    assert r.intensity == pytest.approx(2 / 3, abs=1e-6)


def test_settle_digital_bracket():
    cfg = DigitalControllerConfig(b=0.5, delta=0.005, i_min=0.01, i_max=10.0)
    r = settle(cfg, 0.5, max_steps=1000, initial=2.0)
    assert r.settled
    assert abs(r.intensity - 1.0) <= 0.005


def test_settle_digital_opaque_saturates():
    cfg = DigitalControllerConfig(b=0.5, delta=0.05, i_min=0.01, i_max=3.0)
    r = settle(cfg, 0.0, max_steps=500, initial=1.0)
    assert r.intensity == cfg.i_max
    assert r.hit_max and r.flags == ["hit_max"]


def test_settle_vector_matches_scalar():
    cfg = DigitalControllerConfig(b=0.3, delta=0.004, i_min=0.01, i_max=5.0)
    T = np.array([0.1, 0.25, 0.6, 0.0, 1.0])
    vec = settle(cfg, T, max_steps=3000, initial=1.0)
    for i, t in enumerate(T):
        one = settle(cfg, float(t), max_steps=3000, initial=1.0)
        assert one.intensity == vec.intensity[i]
        assert one.steps == vec.steps[i]
        assert one.settled == vec.settled[i]


def test_settle_rejects_bad_arguments():
    cfg = AnalogControllerConfig(U=1.0)
    with pytest.raises(ValueError):
        settle(cfg, 0.5, max_steps=0)
    with pytest.raises(ValueError):
        settle(cfg, 1.5)


def test_settle_with_noise_is_reproducible():
    cfg = AnalogControllerConfig(U=1.0, relaxation=0.5)
    noise = NoiseModel("uniform", 0.1, seed=9)
    a = settle(cfg, np.linspace(0.1, 1, 10), max_steps=50, noise=noise)
    b = settle(cfg, np.linspace(0.1, 1, 10), max_steps=50, noise=noise)
    assert a.intensity.tobytes() == b.intensity.tobytes()


def test_monotonicity_analog():
    cfg = AnalogControllerConfig(U=1.0, relaxation=0.5)
    out = monotonicity_check(cfg, [0.0, 0.5, 1.0])
    assert out == pytest.approx([1.0, 2 / 3, 0.5], abs=1e-6)


def test_monotonicity_digital():
    cfg = DigitalControllerConfig(b=0.5, delta=0.0025, i_min=0.01, i_max=10.0)
    out = monotonicity_check(cfg, [0.25, 0.5, 1.0], max_steps=5000)
    assert np.abs(out - [2.0, 1.0, 0.5]).max() <= cfg.delta
    assert (np.diff(out) < 0).all()


def test_monotonicity_singleton():
    assert monotonicity_check(AnalogControllerConfig(U=1.0), [0.3]).shape == (1,)


def test_monotonicity_reports_clamp_saturation():
    with pytest.raises(ClampSaturationError):
        monotonicity_check(DigitalControllerConfig(b=0.5, delta=0.01, i_max=4.0), [0.1, 0.5])
    with pytest.raises(ClampSaturationError):
        monotonicity_check(AnalogControllerConfig(U=1.0, i_max=0.7), [0.0, 0.5, 1.0])


def test_monotonicity_detects_coarse_digital_step():
    # delta wider than the target gap: limit-cycle positions may tie or invert
    cfg = DigitalControllerConfig(b=0.5, delta=0.4, i_min=0.01, i_max=10.0)
    with pytest.raises(MonotonicityError):
        monotonicity_check(cfg, [0.5, 0.51, 0.52], initial=1.0, max_steps=100)


@given(lam=st.floats(0.01, 1.0), T=st.floats(0.0, 1.0), I0=st.floats(1e-3, 10.0))
def test_analog_converges_from_anywhere(lam, T, I0):
    cfg = AnalogControllerConfig(U=1.0, relaxation=lam)
    r = settle(cfg, T, max_steps=5000, tol=1e-13, initial=I0)
    assert r.settled
    assert r.intensity == pytest.approx(1.0 / (1.0 + T), abs=1e-9)


@given(lam=st.floats(0.01, 1.0), T=st.floats(0.0, 1.0))
def test_explicit_contraction_factor(lam, T):
    assume(lam * (1 + T) < 2 - 1e-9)
    cfg = AnalogControllerConfig(U=1.0, relaxation=lam, scheme="explicit", i_min=1e-9, i_max=1e9)
    fp = 1.0 / (1.0 + T)
    a, b = fp + 0.1, fp - 0.2
    fa = float(cfg.update(a, a * T))
    fb = float(cfg.update(b, b * T))
    assert abs(fa - fb) == pytest.approx(abs(1 - lam * (1 + T)) * abs(a - b), rel=1e-9, abs=1e-14)
    assert abs(1 - lam * (1 + T)) < 1


@given(lam=st.floats(0.01, 1.0), T=st.floats(0.0, 1.0))
def test_implicit_contraction_factor(lam, T):
    cfg = AnalogControllerConfig(U=1.0, relaxation=lam, i_min=1e-9, i_max=1e9)
    fp = 1.0 / (1.0 + T)
    a, b = fp + 0.1, fp - 0.2
    fa = float(cfg.update(a, a * T))
    fb = float(cfg.update(b, b * T))
    assert abs(fa - fb) <= (1 - lam) / (1 + lam * T) * abs(a - b) + 1e-12


@given(T=st.floats(0.05, 1.0), offset=st.integers(-3, 3), steps=st.integers(1, 300))
def test_digital_band_is_invariant(T, offset, steps):
    cfg = DigitalControllerConfig(b=0.5, delta=0.01, i_min=0.01, i_max=20.0)
    target = cfg.b / T
    state = ControllerState(target + offset * cfg.delta / 3.0)
    for _ in range(steps):
        state = digital_step(state, bucket_signal(state.intensity, T).B, cfg)
        assert abs(state.intensity - target) <= cfg.delta * (1 + 1e-9)


@given(I=st.floats(0.01, 10.0), B1=st.floats(0, 5), B2=st.floats(0, 5), lam=st.floats(0.01, 1.0),
       scheme=st.sampled_from(["implicit", "explicit"]))
def test_negative_feedback_sign(I, B1, B2, lam, scheme):
    lo, hi = sorted((B1, B2))
    analog = AnalogControllerConfig(U=1.0, relaxation=lam, i_min=0.01, i_max=10.0, scheme=scheme)
    assert float(analog.update(I, hi)) <= float(analog.update(I, lo))
    assert float(DIGITAL.update(I, hi)) <= float(DIGITAL.update(I, lo))


@given(I=st.floats(-100, 100), B=st.floats(0, 1e3), lam=st.floats(0.01, 1.0))
def test_clamp_invariant(I, B, lam):
    analog = AnalogControllerConfig(U=2.0, relaxation=lam, i_min=0.05, i_max=3.0, scheme="explicit")
    for cfg in (analog, DIGITAL):
        out = float(cfg.update(I, B))
        assert cfg.i_min <= out <= cfg.i_max
