"""Acceleration waveform ingestion, synthesis and basic time-domain ops.

Waveforms are uniformly sampled acceleration records in g, either loaded
from ``t,ax[,ay,az]`` CSV captures or synthesized (steady tones model a
phone actuator, decaying tones a struck tuning fork).
"""

from __future__ import annotations

import csv
import io
import math
import os
from dataclasses import dataclass, replace
from pathlib import Path
from typing import IO, Optional, Union

import numpy as np

__all__ = [
    "WaveformRecord",
    "load_waveform",
    "waveform_to_csv",
    "synthesize",
    "select_channel",
    "detrend",
    "rms_amplitude",
    "WaveformError",
    "MalformedCsvError",
    "NonUniformSamplingError",
    "TooShortError",
    "AliasedFrequencyError",
    "BadChannelError",
    "MIN_SAMPLES",
    "SYNTH_KINDS",
]

MIN_SAMPLES = 16

# Allowed relative deviation of inter-sample spacing from its median.
_UNIFORMITY_TOL = 0.01

SYNTH_KINDS = ("sine", "decaying_sine", "white_noise")


class WaveformError(Exception):
    """Base class for waveform ingestion/processing errors."""


class MalformedCsvError(WaveformError):
    pass


class NonUniformSamplingError(WaveformError):
    def __init__(self, max_deviation: float):
        self.max_deviation = max_deviation
        super().__init__(
            f"inter-sample spacing deviates from median by "
            f"{max_deviation:.2%} (tolerance {_UNIFORMITY_TOL:.0%})"
        )


class TooShortError(WaveformError):
    pass


class AliasedFrequencyError(WaveformError):
    pass


class BadChannelError(WaveformError):
    pass


@dataclass(frozen=True, eq=False)
class WaveformRecord:
    """Uniformly sampled acceleration record.

    ``samples`` has shape (channels, n) with channels 1 (single axis) or
    3 (x/y/z), values in g.
    """

    sample_rate: float
    samples: np.ndarray
    label: str = ""

    def __post_init__(self) -> None:
        if self.sample_rate <= 0:
            raise WaveformError("sample_rate must be > 0")
        samples = np.asarray(self.samples, dtype=float)
        if samples.ndim == 1:
            samples = samples[np.newaxis, :]
        if samples.ndim != 2 or samples.shape[0] not in (1, 3):
            raise WaveformError("samples must have shape (1|3, n)")
        if samples.shape[1] < MIN_SAMPLES:
            raise TooShortError(
                f"need at least {MIN_SAMPLES} samples, got {samples.shape[1]}"
            )
        object.__setattr__(self, "samples", samples)

    @property
    def channel_count(self) -> int:
        return self.samples.shape[0]

    @property
    def n_samples(self) -> int:
        return self.samples.shape[1]

    @property
    def duration(self) -> float:
        return self.n_samples / self.sample_rate

    @property
    def data(self) -> np.ndarray:
        """The single channel as a 1-D array; errors on multi-axis records."""
        if self.channel_count != 1:
            raise BadChannelError(
                "record has multiple channels; use select_channel() first"
            )
        return self.samples[0]


_HEADERS = {("t", "ax"): 1, ("t", "ax", "ay", "az"): 3}


def load_waveform(
    source: Union[str, bytes, os.PathLike, IO], label: Optional[str] = None
) -> WaveformRecord:
    """Parse a ``t,ax[,ay,az]`` CSV capture (t in seconds, accelerations in g).

    Lines starting with ``#`` are ignored.  The sample rate is recovered as
    1/median(dt); spacing deviating from the median by 1% or more is
    rejected as non-uniform.
    """
    if isinstance(source, (str, os.PathLike)) and not (
        isinstance(source, str) and "\n" in source
    ):
        path = Path(source)
        if label is None:
            label = path.stem
        text = path.read_text()
    elif isinstance(source, bytes):
        try:
            text = source.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise MalformedCsvError(f"not valid UTF-8: {exc}") from exc
    elif isinstance(source, str):
        text = source
    else:
        raw = source.read()
        text = raw.decode("utf-8") if isinstance(raw, bytes) else raw

    rows = []
    header_channels: Optional[int] = None
    for lineno, row in enumerate(csv.reader(io.StringIO(text)), start=1):
        if not row or (row[0].lstrip().startswith("#")):
            continue
        cells = [c.strip() for c in row]
        if header_channels is None:
            key = tuple(cells)
            if key not in _HEADERS:
                raise MalformedCsvError(
                    f"line {lineno}: header must be 't,ax' or 't,ax,ay,az', "
                    f"got {','.join(cells)!r}"
                )
            header_channels = _HEADERS[key]
            continue
        if len(cells) != header_channels + 1:
            raise MalformedCsvError(
                f"line {lineno}: expected {header_channels + 1} columns, got {len(cells)}"
            )
        try:
            rows.append([float(c) for c in cells])
        except ValueError as exc:
            raise MalformedCsvError(f"line {lineno}: {exc}") from exc

    if header_channels is None:
        raise MalformedCsvError("no header line found")
    if len(rows) < MIN_SAMPLES:
        raise TooShortError(f"need at least {MIN_SAMPLES} samples, got {len(rows)}")

    data = np.asarray(rows, dtype=float)
    t = data[:, 0]
    dt = np.diff(t)
    median_dt = float(np.median(dt))
    if median_dt <= 0:
        raise NonUniformSamplingError(max_deviation=math.inf)
    max_dev = float(np.max(np.abs(dt - median_dt)) / median_dt)
    if max_dev >= _UNIFORMITY_TOL:
        raise NonUniformSamplingError(max_deviation=max_dev)
    return WaveformRecord(
        sample_rate=1.0 / median_dt,
        samples=data[:, 1:].T.copy(),
        label=label or "",
    )


def waveform_to_csv(w: WaveformRecord, dest: Union[str, os.PathLike, IO, None] = None) -> str:
    """Serialize a record to the ``t,ax[,ay,az]`` CSV format (returns the text;
    also writes it to ``dest`` when given)."""
    names = ["t", "ax"] if w.channel_count == 1 else ["t", "ax", "ay", "az"]
    lines = [",".join(names)]
    for k in range(w.n_samples):
        cells = [repr(k / w.sample_rate)] + [repr(float(v)) for v in w.samples[:, k]]
        lines.append(",".join(cells))
    text = "\n".join(lines) + "\n"
    if dest is not None:
        if isinstance(dest, (str, os.PathLike)):
            Path(dest).write_text(text)
        else:
            dest.write(text)
    return text


def synthesize(
    kind: str,
    *,
    duration: float,
    sample_rate: float,
    freq: float = 0.0,
    amplitude: float = 1.0,
    decay_tau: float = math.inf,
    noise_sd: float = 0.0,
    seed: int = 0,
    label: str = "",
) -> WaveformRecord:
    """Generate a single-channel test waveform.

    Kinds: ``sine`` A*sin(2*pi*f*t), ``decaying_sine``
    A*exp(-t/tau)*sin(2*pi*f*t), ``white_noise`` (zero deterministic part).
    Gaussian noise with SD ``noise_sd`` is added to every kind.
    """
    if kind not in SYNTH_KINDS:
        raise ValueError(f"kind must be one of {SYNTH_KINDS}, got {kind!r}")
    if sample_rate <= 0:
        raise ValueError("sample_rate must be > 0")
    if duration <= 0:
        raise ValueError("duration must be > 0")
    n = int(round(duration * sample_rate))
    if n < MIN_SAMPLES:
        raise TooShortError(f"duration*sample_rate gives {n} samples, need >= {MIN_SAMPLES}")
    t = np.arange(n) / sample_rate
    if kind == "white_noise":
        x = np.zeros(n)
    else:
        if freq <= 0:
            raise ValueError("freq must be > 0 for tonal kinds")
        if freq >= sample_rate / 2:
            raise AliasedFrequencyError(
                f"freq {freq} Hz is at/above Nyquist ({sample_rate / 2} Hz)"
            )
        x = amplitude * np.sin(2.0 * np.pi * freq * t)
        if kind == "decaying_sine":
            if decay_tau <= 0:
                raise ValueError("decay_tau must be > 0")
            x = x * np.exp(-t / decay_tau)
    if noise_sd > 0 or kind == "white_noise":
        rng = np.random.default_rng(seed)
        x = x + rng.normal(0.0, noise_sd, size=n)
    return WaveformRecord(sample_rate=sample_rate, samples=x[np.newaxis, :], label=label)


def select_channel(w: WaveformRecord, selector: Union[int, str]) -> WaveformRecord:
    """Reduce to a single channel: an axis index or ``"magnitude"`` for the
    per-sample Euclidean norm across axes."""
    if selector == "magnitude":
        mag = np.sqrt(np.sum(w.samples**2, axis=0))
        return replace(w, samples=mag[np.newaxis, :])
    if not isinstance(selector, int) or isinstance(selector, bool):
        raise BadChannelError(f"selector must be an axis index or 'magnitude', got {selector!r}")
    if not 0 <= selector < w.channel_count:
        raise BadChannelError(
            f"axis {selector} out of range for {w.channel_count}-channel record"
        )
    return replace(w, samples=w.samples[selector][np.newaxis, :])


def detrend(w: WaveformRecord) -> WaveformRecord:
    """Remove the mean (gravity/DC offset) from a single-channel record."""
    x = w.data
    return replace(w, samples=(x - x.mean())[np.newaxis, :])


def rms_amplitude(w: WaveformRecord) -> float:
    """Root-mean-square of a single-channel record."""
    x = w.data
    return float(np.sqrt(np.mean(x**2)))
