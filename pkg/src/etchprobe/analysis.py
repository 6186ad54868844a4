"""Curve conditioning, time-constant spectra and curve-to-curve time shifts.

All operations work on the logarithmic time axis ``z = ln(t / 1 s)``. The
time-constant spectrum follows the network-identification-by-deconvolution
picture: the log-time derivative of a step response equals the spectrum
convolved with the fixed kernel ``w(z) = exp(z - exp(z))``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.signal import correlate, correlation_lags, fftconvolve, savgol_filter

from .curves import TransientCurve

LN10 = math.log(10.0)
MIN_SAMPLES = 8


def _require(curve: TransientCurve, n: int = MIN_SAMPLES) -> None:
    if len(curve) < n:
        raise ValueError(f"curve has {len(curve)} samples, need at least {n}")


def lattice_step(curve: TransientCurve, rtol: float = 1e-6) -> float:
    """Spacing of a log-uniform curve in nats; raises if not log-uniform."""
    dz = np.diff(curve.log_t)
    step = float(dz.mean())
    if len(dz) == 0 or np.max(np.abs(dz - step)) > rtol * step + 1e-12:
        raise ValueError("curve is not sampled on a log-uniform lattice")
    return step


def resample_log(curve: TransientCurve, samples_per_octave: int = 200) -> TransientCurve:
    """Interpolate ``curve`` linearly in ``(ln t, value)`` onto ``t0 * 2**(k/n)``.

    The lattice starts at the first sample and holds
    ``floor(log2(t_max / t_min) * n) + 1`` points.
    """
    if len(curve) < 2:
        raise ValueError("need at least 2 samples to resample")
    if samples_per_octave < 8:
        raise ValueError("samples_per_octave must be >= 8")
    t0, t1 = curve.t[0], curve.t[-1]
    count = int(math.floor(math.log2(t1 / t0) * samples_per_octave + 1e-9)) + 1
    t = t0 * np.exp2(np.arange(count) / samples_per_octave)
    t[0] = t0
    vals = np.interp(np.log(t), curve.log_t, curve.values)
    md = dict(curve.metadata, samples_per_octave=samples_per_octave)
    return TransientCurve(t, vals, curve.kind, md)


def cut_early(curve: TransientCurve, t_cut: float = 1e-5) -> TransientCurve:
    """Drop samples taken before ``t_cut`` (electrical settling window)."""
    if not t_cut < curve.t[-1]:
        raise ValueError(f"t_cut={t_cut:g} s removes every sample")
    keep = curve.t >= t_cut
    return TransientCurve(curve.t[keep], curve.values[keep], curve.kind, dict(curve.metadata))


def smooth_derivative(curve: TransientCurve, window: int = 21) -> TransientCurve:
    """Derivative of the values with respect to ``ln t``.

    Each point gets the slope of a quadratic least-squares fit over
    ``window`` neighbouring samples; near the ends the window is held
    against the boundary.
    """
    if window < 5 or window % 2 == 0:
        raise ValueError("window must be odd and >= 5")
    if window > len(curve):
        raise ValueError(f"window {window} larger than sample count {len(curve)}")
    dz = lattice_step(curve)
    d = savgol_filter(curve.values, window, 2, deriv=1, delta=dz, mode="interp")
    return TransientCurve(curve.t, d, curve.kind, dict(curve.metadata, derivative="d/dlnt"))


def response_derivative(curve: TransientCurve, window: int = 21) -> np.ndarray:
    """Log-time derivative oriented so a step response gives a positive bump.

    Cooling curves (value falling with time) are negated, which turns them
    into the equivalent heating response.
    """
    d = smooth_derivative(curve, window).values
    return -d if curve.values[0] > curve.values[-1] else d


def kernel(z: np.ndarray) -> np.ndarray:
    """``w(z) = exp(z - exp(z))``, the response derivative of one time constant."""
    z = np.asarray(z, dtype=float)
    return np.exp(z - np.exp(np.minimum(z, 700.0)))


@dataclass(frozen=True, eq=False)
class TimeConstantSpectrum:
    """Spectrum density ``R(z)`` on the lattice ``z = ln(tau / 1 s)``.

    ``R`` is per nat, so ``R.sum() * dz`` is the total resistance (or total
    excursion, when the input was not normalised by power).
    """

    z: np.ndarray
    R: np.ndarray
    dz: float
    residual_rms: float
    iterations: int
    flagged: bool = False

    @property
    def tau(self) -> np.ndarray:
        return np.exp(self.z)

    @property
    def mass(self) -> float:
        return float(self.R.sum() * self.dz)

    def mass_between(self, tau_lo: float, tau_hi: float) -> float:
        m = (self.tau >= tau_lo) & (self.tau < tau_hi)
        return float(self.R[m].sum() * self.dz)

    def centroid_decades(self) -> float:
        """Mass-weighted mean of log10(tau)."""
        if self.mass <= 0:
            return float("nan")
        return float(np.sum(self.R * self.z) / np.sum(self.R) / LN10)

    def reconvolve(self) -> np.ndarray:
        return _forward(self.R, _kernel_taps(self.dz))


def _kernel_taps(dz: float, lo: float = -30.0, hi: float = 5.0) -> np.ndarray:
    m = int(math.ceil(max(-lo, hi) / dz))
    offsets = np.arange(-m, m + 1) * dz
    return kernel(offsets) * dz


def _forward(R: np.ndarray, taps: np.ndarray) -> np.ndarray:
    return fftconvolve(R, taps, mode="same")


def _adjoint(r: np.ndarray, taps: np.ndarray) -> np.ndarray:
    return fftconvolve(r, taps[::-1], mode="same")


def deconvolve_spectrum(d: TransientCurve, iterations: int = 500) -> TimeConstantSpectrum:
    """Recover a non-negative time-constant spectrum from a response derivative.

    Uses the multiplicative (Richardson-Lucy) update
    ``R <- R * K^T(d / K R) / K^T 1`` with ``K`` the discrete convolution by
    ``w``. Negative derivative samples are clipped to zero first. An all-zero
    input returns a zero spectrum with ``flagged=True``.
    """
    _require(d)
    if iterations < 1:
        raise ValueError("iterations must be >= 1")
    dz = lattice_step(d)
    z = d.log_t
    data = np.clip(d.values, 0.0, None)
    if not np.any(data > 0):
        return TimeConstantSpectrum(z, np.zeros_like(z), dz, 0.0, 0, flagged=True)

    taps = _kernel_taps(dz)
    norm = _adjoint(np.ones_like(data), taps)
    norm = np.where(norm > 1e-12, norm, np.inf)
    R = np.full_like(data, data.sum() / len(data))
    tiny = 1e-300
    for _ in range(iterations):
        model = _forward(R, taps)
        ratio = np.where(model > tiny, data / np.maximum(model, tiny), 0.0)
        R = R * np.clip(_adjoint(ratio, taps), 0.0, None) / norm
    resid = _forward(R, taps) - data
    rel = float(np.linalg.norm(resid) / np.linalg.norm(data))
    return TimeConstantSpectrum(z, R, dz, rel, iterations)


def amplitude_at(curve: TransientCurve, t_eval: float = 1e-5) -> float:
    """Value at ``t_eval``, interpolated linearly in ``ln t``."""
    if not curve.t[0] <= t_eval <= curve.t[-1]:
        raise ValueError(f"t_eval={t_eval:g} s outside curve range "
                         f"[{curve.t[0]:g}, {curve.t[-1]:g}] s")
    return float(np.interp(math.log(t_eval), curve.log_t, curve.values))


def estimate_shift(ref: TransientCurve, cand: TransientCurve, window: int = 21) -> float:
    """Log-time shift of ``cand`` relative to ``ref`` in decades.

    Positive when the candidate responds earlier. Both derivatives are
    scaled to unit peak, placed on a common lattice anchored at 1 s,
    cross-correlated over integer lags, and the best lag refined with a
    parabola through its two neighbours.
    """
    _require(ref)
    _require(cand)
    dz = lattice_step(ref)
    if abs(lattice_step(cand) - dz) > 1e-6 * dz:
        raise ValueError("curves are sampled at different densities; resample first")

    def on_anchor(curve):
        d = response_derivative(curve, window)
        peak = d.max()
        if not peak > 0:
            raise ValueError("curve has no positive response derivative")
        d = d / peak
        z = curve.log_t
        k = np.arange(math.ceil(z[0] / dz - 1e-9), math.floor(z[-1] / dz + 1e-9) + 1)
        return k, np.interp(k * dz, z, d)

    k_r, d_r = on_anchor(ref)
    k_c, d_c = on_anchor(cand)
    if k_r[-1] < k_c[0] or k_c[-1] < k_r[0]:
        raise ValueError("curves have no overlapping log-time support")
    lo, hi = min(k_r[0], k_c[0]), max(k_r[-1], k_c[-1])
    a = np.zeros(hi - lo + 1)
    b = np.zeros_like(a)
    a[k_r - lo] = d_r
    b[k_c - lo] = d_c
    corr = correlate(a, b, mode="full", method="direct")
    lags = correlation_lags(len(a), len(b), mode="full")
    i = int(np.argmax(corr))
    if not corr[i] > 0:
        raise ValueError("curves have no overlapping log-time support")
    frac = 0.0
    if 0 < i < len(corr) - 1:
        y0, y1, y2 = corr[i - 1], corr[i], corr[i + 1]
        den = y0 - 2 * y1 + y2
        if den < 0:
            frac = 0.5 * (y0 - y2) / den
    return float((lags[i] + frac) * dz / LN10)
