"""Radix-2 FFT and one-sided amplitude spectra with peak annotation.

The amplitude scaling is chosen so a bin-aligned pure tone of amplitude A
reads approximately A in the spectrum: magnitudes are divided by the sum of
the window coefficients and doubled, except at the DC and Nyquist bins.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .waveform import WaveformRecord

__all__ = [
    "SpectrumResult",
    "PeakEstimate",
    "fft_radix2",
    "power_spectrum",
    "peak_frequency",
    "SpectrumError",
    "EmptySignalError",
    "EmptyBandError",
    "WINDOWS",
]

WINDOWS = ("rectangular", "hann")


class SpectrumError(Exception):
    pass


class EmptySignalError(SpectrumError):
    pass


class EmptyBandError(SpectrumError):
    pass


@dataclass(frozen=True, eq=False)
class SpectrumResult:
    """One-sided amplitude spectrum (0..Nyquist) with its annotated peak.

    ``resolution`` is the bin spacing sample_rate / n_fft; ``peak_frequency``
    may fall between bins when parabolic interpolation refined it.
    """

    frequencies: np.ndarray
    amplitudes: np.ndarray
    peak_frequency: float
    peak_amplitude: float
    resolution: float


@dataclass(frozen=True)
class PeakEstimate:
    frequency: float
    amplitude: float


def _bit_reversal_indices(n: int) -> np.ndarray:
    idx = np.zeros(1, dtype=np.intp)
    while idx.size < n:
        idx = np.concatenate([2 * idx, 2 * idx + 1])
    return idx


def fft_radix2(x) -> np.ndarray:
    """Iterative decimation-in-time Cooley-Tukey FFT.

    Input length must be a power of two; returns the complex transform.
    """
    a = np.asarray(x, dtype=np.complex128).copy()
    n = a.size
    if n == 0:
        raise EmptySignalError("empty input")
    if n & (n - 1):
        raise ValueError(f"length must be a power of two, got {n}")
    if n == 1:
        return a
    a = a[_bit_reversal_indices(n)]
    m = 2
    while m <= n:
        half = m // 2
        twiddle = np.exp(-2j * np.pi * np.arange(half) / m)
        blocks = a.reshape(n // m, m)
        even = blocks[:, :half].copy()
        odd = blocks[:, half:] * twiddle
        blocks[:, :half] = even + odd
        blocks[:, half:] = even - odd
        m *= 2
    return a


def _next_pow2(n: int) -> int:
    return 1 << max(0, (n - 1)).bit_length()


def _window(kind: str, n: int) -> np.ndarray:
    if kind == "rectangular":
        return np.ones(n)
    if kind == "hann":
        # periodic form, exact coherent gain 0.5
        return 0.5 - 0.5 * np.cos(2.0 * np.pi * np.arange(n) / n)
    raise ValueError(f"window must be one of {WINDOWS}, got {kind!r}")


def _find_peak(
    frequencies: np.ndarray,
    amplitudes: np.ndarray,
    resolution: float,
    band: tuple[float, float],
    interpolate: bool,
) -> PeakEstimate:
    lo, hi = band
    if not lo < hi:
        raise ValueError("band must satisfy low < high")
    mask = (frequencies >= lo) & (frequencies <= hi)
    idx = np.flatnonzero(mask)
    if idx.size == 0:
        raise EmptyBandError(
            f"band [{lo}, {hi}] Hz contains no spectrum bins "
            f"(spectrum spans 0..{frequencies[-1]:g} Hz)"
        )
    k = int(idx[int(np.argmax(amplitudes[idx]))])  # argmax ties -> lowest bin
    freq = float(frequencies[k])
    amp = float(amplitudes[k])
    if interpolate and 0 < k < frequencies.size - 1:
        alpha, beta, gamma = float(amplitudes[k - 1]), amp, float(amplitudes[k + 1])
        denom = alpha - 2.0 * beta + gamma
        if denom < 0:  # strictly concave triple
            delta = 0.5 * (alpha - gamma) / denom
            delta = max(-0.5, min(0.5, delta))
            freq = (k + delta) * resolution
            amp = beta - 0.25 * (alpha - gamma) * delta
    return PeakEstimate(frequency=float(freq), amplitude=float(amp))


def power_spectrum(
    w: WaveformRecord,
    window: str = "hann",
    n_fft: Optional[int] = None,
    *,
    search_band: Optional[tuple[float, float]] = None,
    interpolate: bool = True,
) -> SpectrumResult:
    """Windowed, zero-padded amplitude spectrum of a single-channel record.

    ``n_fft=None`` zero-pads to the next power of two at least 4x the signal
    length (sub-bin resolution for typical captures).  The annotated peak is
    searched inside ``search_band`` when given, otherwise over the whole
    spectrum excluding DC.
    """
    x = w.data
    n = x.size
    if n == 0:
        raise EmptySignalError("empty signal")
    if n_fft is None:
        n_fft = _next_pow2(4 * n)
    elif n_fft & (n_fft - 1) or n_fft < n:
        raise ValueError("n_fft must be a power of two >= the signal length")
    win = _window(window, n)
    padded = np.zeros(n_fft)
    padded[:n] = x * win
    transform = fft_radix2(padded)
    half = n_fft // 2
    scale = float(win.sum())
    amplitudes = np.abs(transform[: half + 1]) / scale
    amplitudes[1:half] *= 2.0  # DC and Nyquist are not doubled
    resolution = w.sample_rate / n_fft
    frequencies = np.arange(half + 1) * resolution

    band = search_band if search_band is not None else (resolution, frequencies[-1])
    peak = _find_peak(frequencies, amplitudes, resolution, band, interpolate)
    return SpectrumResult(
        frequencies=frequencies,
        amplitudes=amplitudes,
        peak_frequency=peak.frequency,
        peak_amplitude=peak.amplitude,
        resolution=resolution,
    )


def peak_frequency(
    spectrum: SpectrumResult,
    band: tuple[float, float],
    *,
    interpolate: bool = True,
) -> PeakEstimate:
    """Locate the largest amplitude within ``band`` (inclusive).

    Ties break toward the lower frequency.  With ``interpolate`` a parabola
    through the three bins around the peak refines frequency and amplitude;
    at spectrum edges or flat peaks the raw bin is returned.
    """
    return _find_peak(
        spectrum.frequencies,
        spectrum.amplitudes,
        spectrum.resolution,
        band,
        interpolate,
    )
