"""Butterworth band-pass filtering for acceleration records.

The digital design is built here from first principles: analog low-pass
prototype poles, low-pass-to-band-pass transformation, bilinear transform
with frequency pre-warping, and pairing into second-order sections.  Time
domain application is zero-phase (forward-backward), which doubles the
effective order and squares the magnitude response.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import replace

import numpy as np
from scipy.signal import sosfiltfilt

from .waveform import WaveformRecord

__all__ = [
    "butterworth_bandpass_sos",
    "bandpass_filter",
    "sos_pole_moduli",
    "FilterError",
    "BadBandError",
    "UnstableDesignError",
    "SUPPORTED_ORDERS",
]

SUPPORTED_ORDERS = (2, 4, 6, 8)


class FilterError(Exception):
    pass


class BadBandError(FilterError):
    pass


class UnstableDesignError(FilterError):
    pass


def butterworth_bandpass_sos(
    low: float, high: float, order: int, sample_rate: float
) -> np.ndarray:
    """Design a Butterworth band-pass as cascaded biquads.

    ``order`` is the low-pass prototype order (the band-pass has 2*order
    poles, i.e. ``order`` sections).  Returns an (order, 6) array of
    [b0, b1, b2, 1, a1, a2] rows.  Raises UnstableDesignError if any pole
    lands on or outside the unit circle.
    """
    if order not in SUPPORTED_ORDERS:
        raise BadBandError(f"order must be one of {SUPPORTED_ORDERS}, got {order}")
    nyquist = sample_rate / 2.0
    if not 0.0 < low < high < nyquist:
        raise BadBandError(
            f"need 0 < low < high < Nyquist ({nyquist:g} Hz), got [{low}, {high}]"
        )

    # Pre-warped analog band edges (rad/s) for the bilinear transform.
    fs2 = 2.0 * sample_rate
    warped_low = fs2 * math.tan(math.pi * low / sample_rate)
    warped_high = fs2 * math.tan(math.pi * high / sample_rate)
    bandwidth = warped_high - warped_low
    center_sq = warped_low * warped_high

    # Prototype poles on the unit circle, left half-plane, upper half only;
    # conjugates are implied.  Even order => no real prototype pole.
    prototype = [
        cmath.exp(1j * math.pi * (2 * k + order + 1) / (2 * order))
        for k in range(order // 2)
    ]

    # Low-pass -> band-pass: each prototype pole p yields the two roots of
    # s^2 - p*bandwidth*s + center_sq = 0.
    analog_poles = []
    for p in prototype:
        pb = p * bandwidth
        disc = cmath.sqrt(pb * pb - 4.0 * center_sq)
        analog_poles.append((pb + disc) / 2.0)
        analog_poles.append((pb - disc) / 2.0)

    # Bilinear transform of poles; the n analog zeros at s=0 map to z=1 and
    # the n zeros at infinity map to z=-1.
    digital_poles = [(fs2 + s) / (fs2 - s) for s in analog_poles]
    moduli = [abs(z) for z in digital_poles + [zc.conjugate() for zc in digital_poles]]
    if max(moduli) >= 1.0:
        raise UnstableDesignError(
            f"pole modulus {max(moduli):.12f} >= 1 for band [{low}, {high}] Hz "
            f"order {order} at fs={sample_rate:g} Hz"
        )

    # Overall gain: analog numerator bandwidth^order * s^order contributes
    # bandwidth^order; the bilinear change of variables contributes
    # fs2^order / prod(fs2 - s_k) over all 2*order poles.
    denom_prod = 1.0 + 0.0j
    for s in analog_poles:
        denom_prod *= (fs2 - s) * (fs2 - s.conjugate())
    # denom_prod is a product of |fs2 - s|^2 terms, so the gain is positive
    gain = (bandwidth * fs2) ** order / denom_prod.real
    section_gain = gain ** (1.0 / order)

    # One biquad per digital pole + its conjugate; numerator (z-1)(z+1).
    sections = np.empty((order, 6))
    for i, z in enumerate(digital_poles):
        sections[i] = [
            section_gain, 0.0, -section_gain,
            1.0, -2.0 * z.real, abs(z) ** 2,
        ]
    return sections


def sos_pole_moduli(sos: np.ndarray) -> np.ndarray:
    """Pole magnitudes of each section (for stability checks)."""
    moduli = []
    for row in np.atleast_2d(sos):
        moduli.extend(np.abs(np.roots(row[3:])))
    return np.asarray(moduli)


def bandpass_filter(
    w: WaveformRecord, low: float, high: float, order: int = 4
) -> WaveformRecord:
    """Zero-phase Butterworth band-pass of a single-channel record."""
    x = w.data
    sos = butterworth_bandpass_sos(low, high, order, w.sample_rate)
    padlen = min(3 * (2 * len(sos) + 1), x.size - 1)
    y = sosfiltfilt(sos, x, padlen=padlen)
    return replace(w, samples=y[np.newaxis, :])
