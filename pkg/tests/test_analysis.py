import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from etchprobe.analysis import (amplitude_at, cut_early, deconvolve_spectrum, estimate_shift,
                                kernel, lattice_step, resample_log, response_derivative,
                                smooth_derivative)
from etchprobe.curves import TransientCurve


def lattice(t0, t1, spo=200):
    n = int(math.floor(math.log2(t1 / t0) * spo + 1e-9)) + 1
    return t0 * np.exp2(np.arange(n) / spo)


def cooling(t, taus=(1e-4,), mags=(1.0,)):
    return sum(m * np.exp(-t / tau) for tau, m in zip(taus, mags))


def heating_derivative(t, taus, mags):
    """Closed-form d/dln t of sum m(1 - exp(-t/tau)); an independent oracle."""
    return sum(m * (t / tau) * np.exp(-t / tau) for tau, m in zip(taus, mags))


COOL = TransientCurve(lattice(1e-7, 10.0), cooling(lattice(1e-7, 10.0), (1e-5, 3e-3), (2.0, 1.0)))


# -- resampling ----------------------------------------------------------------

def test_constant_curve_resamples_to_constant():
    c = TransientCurve(np.logspace(-6, 0, 37), np.full(37, 4.2))
    np.testing.assert_array_equal(resample_log(c).values, 4.2)


def test_resampling_a_lattice_curve_is_identity():
    out = resample_log(COOL, 200)
    np.testing.assert_allclose(out.t, COOL.t, rtol=1e-12)
    np.testing.assert_allclose(out.values, COOL.values, rtol=1e-12, atol=1e-15)


def test_sample_count_formula():
    c = TransientCurve(np.array([1e-6, 1e-3, 1.0]), np.zeros(3))
    out = resample_log(c, 200)
    assert len(out) == math.floor(math.log2(1e6) * 200) + 1 == 3987
    assert lattice_step(out) == pytest.approx(math.log(2) / 200)
    assert out.t[0] == 1e-6 and out.t[-1] <= 1.0


@given(t0=st.floats(1e-8, 1e-3), steps=st.integers(8, 4000), spo=st.integers(8, 400))
def test_resampling_keeps_end_values(t0, steps, spo):
    t1 = t0 * 2.0 ** (steps / spo)
    t = np.geomspace(t0, t1, 57)
    c = TransientCurve(t, np.exp(-t / (t0 * 30)) + 0.5)
    out = resample_log(c, spo)
    assert out.values[0] == c.values[0]
    assert out.values[-1] == pytest.approx(c.values[-1], rel=1e-9)


def test_resampling_errors():
    with pytest.raises(ValueError):
        resample_log(TransientCurve(np.array([1.0]), np.array([1.0])))
    with pytest.raises(ValueError):
        resample_log(COOL, 4)


# -- early cut -----------------------------------------------------------------

def test_cut_at_zero_is_identity():
    assert cut_early(COOL, 0.0).equals(COOL)


def test_cut_drops_early_samples():
    out = cut_early(COOL, 1e-5)
    assert out.t[0] >= 1e-5
    assert len(COOL) - len(out) == np.sum(COOL.t < 1e-5)
    with pytest.raises(ValueError):
        cut_early(COOL, 100.0)


def test_cut_removes_parasitic_tail():
    amp, tau_p = 5e-3, 2e-6
    t = lattice(1e-6, 1.0)
    thermal = 1e-2 * cooling(t, (1e-3,))
    c = cut_early(TransientCurve(t, thermal + amp * np.exp(-t / tau_p), "voltage"), 1e-5)
    residue = c.values - 1e-2 * cooling(c.t, (1e-3,))
    assert np.max(np.abs(residue)) <= math.exp(-5) * amp


# -- derivative ----------------------------------------------------------------

def test_derivative_of_linear_in_log_time_is_exact():
    t = lattice(1e-6, 1.0)
    c = TransientCurve(t, 3.0 * np.log(t) + 7.0)
    np.testing.assert_allclose(smooth_derivative(c).values, 3.0, atol=1e-10)


def test_derivative_peak_of_single_time_constant():
    r, tau = 50.0, 1e-3
    t = lattice(1e-7, 10.0)
    c = TransientCurve(t, r * (1 - np.exp(-t / tau)))
    d = smooth_derivative(c).values
    i = int(np.argmax(d))
    assert d[i] == pytest.approx(r / math.e, rel=0.01)
    assert abs(math.log(t[i] / tau)) <= 2 * lattice_step(c)


def test_derivative_sign_of_noise_free_response():
    t = lattice(1e-7, 10.0)
    heat = TransientCurve(t, 1 - np.exp(-t / 1e-4))
    assert np.all(smooth_derivative(heat).values >= -1e-12)
    assert np.all(response_derivative(COOL) >= -1e-12)


def test_derivative_errors():
    with pytest.raises(ValueError):
        smooth_derivative(COOL, 20)
    with pytest.raises(ValueError):
        smooth_derivative(TransientCurve(lattice(1e-6, 1e-5), np.zeros(665)), 701)
    with pytest.raises(ValueError, match="log-uniform"):
        smooth_derivative(TransientCurve(np.array([1.0, 2, 3, 5, 8, 13, 21, 34.0]), np.zeros(8)), 5)


# -- spectrum ------------------------------------------------------------------

def derivative_curve(taus, mags, t0=1e-8, t1=10.0, spo=200):
    t = lattice(t0, t1, spo)
    return TransientCurve(t, heating_derivative(t, taus, mags))


def test_kernel_is_single_time_constant_response():
    z = np.linspace(-10, 3, 50)
    np.testing.assert_allclose(kernel(z), heating_derivative(np.exp(z), (1.0,), (1.0,)), rtol=1e-12)


def test_zero_derivative_gives_flagged_zero_spectrum():
    spec = deconvolve_spectrum(TransientCurve(lattice(1e-6, 1.0), np.zeros(3987)))
    assert spec.flagged and spec.mass == 0.0 and np.all(spec.R == 0)


def test_single_time_constant_round_trip():
    spec = deconvolve_spectrum(derivative_curve((1e-3,), (100.0,)))
    assert spec.mass == pytest.approx(100.0, rel=0.05)
    assert abs(spec.centroid_decades() - (-3.0)) <= 0.5
    assert spec.residual_rms <= 0.02
    assert np.all(spec.R >= 0)
    assert not spec.flagged


def test_two_time_constants_three_decades_apart():
    spec = deconvolve_spectrum(derivative_curve((1e-5, 1e-2), (100.0, 60.0)))
    near_first = spec.mass_between(10 ** -6.5, 10 ** -3.5)
    near_second = spec.mass_between(10 ** -3.5, 10 ** -0.5)
    assert near_first == pytest.approx(100.0, rel=0.10)
    assert near_second == pytest.approx(60.0, rel=0.10)
    between = (spec.tau > 10 ** -4) & (spec.tau < 10 ** -3)
    assert spec.R[between].min() < 0.1 * min(spec.R[spec.tau < 10 ** -4].max(),
                                             spec.R[spec.tau > 10 ** -3].max())
    assert spec.residual_rms <= 0.02


def test_reconvolution_matches_input():
    d = derivative_curve((3e-6, 2e-4, 5e-2), (10.0, 30.0, 20.0), spo=100)
    spec = deconvolve_spectrum(d)
    rms = np.sqrt(np.mean((spec.reconvolve() - d.values) ** 2)) / np.sqrt(np.mean(d.values ** 2))
    assert rms <= 0.02


# -- amplitude -----------------------------------------------------------------

def test_amplitude_of_constant_curve():
    c = TransientCurve(lattice(1e-6, 1.0), np.full(3987, 50.0))
    assert amplitude_at(c, 1e-5) == 50.0
    assert amplitude_at(c, 0.5) == 50.0


def test_amplitude_at_time_constant():
    tau = 1e-4
    t = lattice(1e-6, 1.0)
    c = TransientCurve(t, 300.0 * np.exp(-t / tau))
    assert amplitude_at(c, tau) == pytest.approx(300.0 / math.e, rel=1e-4)
    with pytest.raises(ValueError, match="outside"):
        amplitude_at(c, 1e-7)


# -- shift ---------------------------------------------------------------------

def test_identical_curves_have_no_shift():
    assert estimate_shift(COOL, COOL) == 0.0


def test_tenfold_faster_copy_is_one_decade_earlier():
    assert estimate_shift(COOL, COOL.time_scaled(0.1)) == pytest.approx(1.0, abs=0.02)


@given(log_s=st.floats(-2.0, 2.0))
def test_time_scaling_covariance_and_antisymmetry(log_s):
    cand = resample_log(COOL.time_scaled(10 ** -log_s), 200)
    forward = estimate_shift(COOL, cand)
    backward = estimate_shift(cand, COOL)
    assert forward == pytest.approx(log_s, abs=0.02)
    assert forward == pytest.approx(-backward, abs=0.01)


def test_shift_ignores_amplitude():
    assert estimate_shift(COOL, COOL.scaled(0.01).time_scaled(0.1)) == pytest.approx(1.0, abs=0.02)


def test_shift_errors():
    with pytest.raises(ValueError, match="densities"):
        estimate_shift(COOL, resample_log(COOL, 100))
    flat = COOL.with_values(np.zeros(len(COOL)))
    with pytest.raises(ValueError, match="no positive"):
        estimate_shift(COOL, flat)
    t = lattice(1e-7, 1e-5)
    early = TransientCurve(t, cooling(t, (1e-6,)))
    late = early.time_scaled(1e8)
    with pytest.raises(ValueError, match="overlapping"):
        estimate_shift(early, late)
