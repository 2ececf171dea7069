"""Simulated participants for validating the staircase engine.

An observer is a cumulative-Gaussian psychometric function with guess and
lapse floors plus a uniform response-latency model.  Driving the staircase
with observers of known threshold lets the convergence and precision of the
procedure be measured without humans.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, replace
from typing import Optional

from .staircase import (
    TIMEOUT,
    Press,
    SessionResult,
    StaircaseConfig,
    StaircaseSession,
    StimulusCommand,
)

__all__ = [
    "ObserverModel",
    "BatchStats",
    "detection_probability",
    "simulate_response",
    "run_simulated_session",
    "batch_precision",
    "default_observer",
]

# Salt decorrelating the observer's RNG stream from the engine's ISI stream
# when both derive from the same session seed.
_OBSERVER_STREAM_SALT = 0x6F627376


@dataclass(frozen=True)
class ObserverModel:
    """Psychometric observer: p(detect | I) = guess + (1-guess-lapse) * Phi((I-mu)/sigma).

    ``sigma == 0`` is the deterministic shortcut: detection becomes the
    indicator [I >= mu] with no guessing or lapsing.  Latency on detected
    trials is uniform in ``latency_mean +/- latency_jitter``.
    """

    mu: float
    sigma: float = 0.0
    guess_rate: float = 0.0
    lapse_rate: float = 0.0
    latency_mean: float = 0.5
    latency_jitter: float = 0.2

    def __post_init__(self) -> None:
        if not 0.0 <= self.mu <= 1.0:
            raise ValueError("mu must lie in [0, 1]")
        if self.sigma < 0.0:
            raise ValueError("sigma must be >= 0")
        if not 0.0 <= self.guess_rate < 0.5:
            raise ValueError("guess_rate must lie in [0, 0.5)")
        if not 0.0 <= self.lapse_rate < 0.5:
            raise ValueError("lapse_rate must lie in [0, 0.5)")
        if self.latency_jitter < 0.0:
            raise ValueError("latency_jitter must be >= 0")
        if self.latency_mean - self.latency_jitter <= 0.0:
            raise ValueError("latency_mean - latency_jitter must be > 0")

    @property
    def deterministic(self) -> bool:
        return self.sigma == 0.0


@dataclass(frozen=True)
class BatchStats:
    """Threshold estimates across repeated sessions with one observer."""

    per_session_estimates: tuple[float, ...]
    mean: float
    sample_sd: float


def default_observer() -> ObserverModel:
    """Observer used by the bundled precision experiment: threshold 0.348,
    narrow spread, 2% guess/lapse floors, ~0.5 s responses."""
    return ObserverModel(
        mu=0.348, sigma=0.02, guess_rate=0.02, lapse_rate=0.02,
        latency_mean=0.5, latency_jitter=0.2,
    )


def _standard_normal_cdf(z: float) -> float:
    return 0.5 * (1.0 + math.erf(z / math.sqrt(2.0)))


def detection_probability(observer: ObserverModel, intensity: float) -> float:
    """Probability that the observer reports the stimulus.

    Monotone non-decreasing in intensity and bounded in
    [guess_rate, 1 - lapse_rate]; exactly 0 or 1 for deterministic observers.
    """
    if not 0.0 <= intensity <= 1.0:
        raise ValueError("intensity must lie in [0, 1]")
    if observer.deterministic:
        return 1.0 if intensity >= observer.mu else 0.0
    z = (intensity - observer.mu) / observer.sigma
    span = 1.0 - observer.guess_rate - observer.lapse_rate
    return observer.guess_rate + span * _standard_normal_cdf(z)


def simulate_response(
    observer: ObserverModel, stimulus: StimulusCommand, rng: random.Random
):
    """Draw the observer's response to one stimulus.

    Returns a :class:`Press` at onset + drawn latency on detection, else
    :data:`TIMEOUT`.
    """
    p = detection_probability(observer, stimulus.intensity)
    if rng.random() < p:
        latency = rng.uniform(
            observer.latency_mean - observer.latency_jitter,
            observer.latency_mean + observer.latency_jitter,
        )
        return Press(stimulus.scheduled_onset + latency)
    return TIMEOUT


def run_simulated_session(
    config: StaircaseConfig,
    observer: ObserverModel,
    rng_seed: Optional[int] = None,
    recorder=None,
) -> SessionResult:
    """Run one full staircase session against a simulated observer.

    ``rng_seed`` (default: the config's seed) drives both the session's ISI
    stream and, salted, the observer's response draws, so a seed pins the
    entire session.
    """
    seed = config.rng_seed if rng_seed is None else rng_seed
    cfg = replace(config, rng_seed=seed)
    observer_rng = random.Random(seed ^ _OBSERVER_STREAM_SALT)
    session = StaircaseSession(cfg)
    if recorder is not None:
        recorder.session_created(cfg)
    while not session.complete:
        cmd = session.next_stimulus()
        if recorder is not None:
            recorder.stimulus_scheduled(cmd)
            recorder.stimulus_onset(cmd)
        response = simulate_response(observer, cmd, observer_rng)
        if recorder is not None and isinstance(response, Press):
            recorder.response_received(response.time, attributed=True)
        record = session.resolve_trial(response)
        if recorder is not None:
            recorder.trial_resolved(record)
    result = session.threshold_estimate()
    if recorder is not None:
        recorder.session_completed(result)
    return result


def batch_precision(
    config: StaircaseConfig,
    observer: ObserverModel,
    n_sessions: int,
    rng_seed: int = 0,
) -> BatchStats:
    """Run independent sessions and summarize the spread of their estimates.

    Session i runs with seed ``rng_seed ^ i``; the returned SD is the sample
    (n-1) standard deviation across sessions.
    """
    if n_sessions < 2:
        raise ValueError("n_sessions must be >= 2")
    estimates = [
        run_simulated_session(config, observer, rng_seed=rng_seed ^ i).threshold_mean
        for i in range(n_sessions)
    ]
    mean = math.fsum(estimates) / n_sessions
    sd = math.sqrt(
        math.fsum((x - mean) ** 2 for x in estimates) / (n_sessions - 1)
    )
    return BatchStats(
        per_session_estimates=tuple(estimates), mean=mean, sample_sd=sd
    )
