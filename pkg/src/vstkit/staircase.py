"""Adaptive 1-up/1-down staircase engine for absolute detection thresholds.

The engine is a deterministic state machine: all times are seconds since
session start and are supplied by the caller (simulated drivers, a scripted
replay, or a wall-clock service), so the same config, seed and response
script always reproduce the same session bit for bit.

Protocol: each trial presents a vibration stimulus at some intensity in
[0, 1].  A detected stimulus lowers the next intensity by one step, a missed
one raises it.  A button press later than the response deadline is treated
as a miss for staircase movement but counted as a false positive, as is any
press that arrives outside a response window.  The session ends once the
target number of direction reversals has been observed (or at a trial cap),
and the threshold estimate is the mean intensity over the reversal trials.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass
from enum import Enum
from typing import Optional, Sequence, Union

__all__ = [
    "StaircaseConfig",
    "StimulusCommand",
    "TrialRecord",
    "SessionResult",
    "StaircaseSession",
    "Press",
    "Timeout",
    "TIMEOUT",
    "Outcome",
    "Direction",
    "Termination",
    "StaircaseError",
    "InvalidConfigError",
    "SessionCompleteError",
    "SessionNotCompleteError",
    "NoPendingStimulusError",
    "StaircaseStateError",
    "run_scripted_session",
    "LATE_PRESS_GRACE_S",
]

# Presses up to this long after the deadline are still attributed to the
# pending trial (as late responses) by the bundled drivers.  Must stay below
# isi_min so a late press cannot collide with the next scheduled stimulus.
LATE_PRESS_GRACE_S = 1.0

# Guard so that float noise in (onset + latency) - onset cannot flip the
# "latency <= deadline" boundary either way.
_LATENCY_EPS = 1e-9


class StaircaseError(Exception):
    """Base class for staircase engine errors."""


class InvalidConfigError(StaircaseError, ValueError):
    """A StaircaseConfig invariant is violated; ``field`` names the culprit."""

    def __init__(self, message: str, field: Optional[str] = None):
        self.field = field
        super().__init__(message)


class SessionCompleteError(StaircaseError):
    """Operation requires a running session but the session has ended."""


class SessionNotCompleteError(StaircaseError):
    """Result requested before the session has terminated."""


class NoPendingStimulusError(StaircaseError):
    """A press arrived with no open response window.

    The press has already been counted as a spontaneous false positive by
    the time this is raised; no trial record is produced for it.
    """


class StaircaseStateError(StaircaseError):
    """Driver misuse: operations called out of order."""


class Outcome(str, Enum):
    DETECTED = "detected"
    MISSED = "missed"
    LATE_RESPONSE = "late_response"


class Direction(str, Enum):
    UP = "up"
    DOWN = "down"


class Termination(str, Enum):
    REVERSALS_REACHED = "reversals_reached"
    TRIAL_CAP_HIT = "trial_cap_hit"


@dataclass(frozen=True)
class StaircaseConfig:
    """Tunable parameters of one threshold test session.

    Intensities are dimensionless in [0, 1]; durations and intervals are in
    seconds.  ``rng_seed`` seeds the inter-stimulus-interval sampler, making
    the stimulus schedule reproducible.
    """

    start_intensity: float = 0.5
    step_size: float = 0.05
    target_reversals: int = 8
    intensity_min: float = 0.0
    intensity_max: float = 1.0
    stimulus_duration: float = 0.1
    stimulus_sharpness: float = 1.0
    response_deadline: float = 1.5
    isi_min: float = 2.0
    isi_max: float = 4.0
    max_trials: int = 100
    rng_seed: int = 0

    def __post_init__(self) -> None:
        def bad(name: str, why: str) -> InvalidConfigError:
            return InvalidConfigError(f"{name}: {why}", field=name)

        if not (0.0 <= self.intensity_min < self.intensity_max <= 1.0):
            raise bad("intensity_min/intensity_max",
                      "need 0 <= intensity_min < intensity_max <= 1")
        if not (self.intensity_min <= self.start_intensity <= self.intensity_max):
            raise bad("start_intensity", "must lie within [intensity_min, intensity_max]")
        if not (0.0 < self.step_size <= self.intensity_max - self.intensity_min):
            raise bad("step_size", "need 0 < step_size <= intensity_max - intensity_min")
        if not (0.0 < self.isi_min <= self.isi_max):
            raise bad("isi_min/isi_max", "need 0 < isi_min <= isi_max")
        if not self.response_deadline > 0.0:
            raise bad("response_deadline", "must be > 0")
        if self.target_reversals < 2:
            raise bad("target_reversals", "must be >= 2")
        if self.max_trials < self.target_reversals:
            raise bad("max_trials", "must be >= target_reversals")


@dataclass(frozen=True)
class StimulusCommand:
    """One scheduled stimulus presentation."""

    trial_index: int
    intensity: float
    duration: float
    sharpness: float
    scheduled_onset: float


@dataclass(frozen=True)
class TrialRecord:
    """Outcome of one resolved trial.

    ``intended_direction_after`` is implied by the response alone (detected
    -> down, otherwise up), so clamping at an intensity bound can neither
    create nor hide a reversal.
    """

    trial_index: int
    intensity: float
    onset_time: float
    response_latency: Optional[float]
    outcome: Outcome
    intended_direction_after: Direction
    is_reversal: bool


@dataclass(frozen=True)
class SessionResult:
    """Final session document: trial log plus reversal-mean threshold.

    ``threshold_mean``/``threshold_sd`` are NaN when too few reversals were
    observed to compute them (possible only under trial-cap termination).
    The SD uses the sample (n-1) convention.
    """

    config: StaircaseConfig
    trials: tuple[TrialRecord, ...]
    reversal_indices: tuple[int, ...]
    threshold_mean: float
    threshold_sd: float
    false_positive_count: int
    termination: Termination


@dataclass(frozen=True)
class Press:
    """A button press at an absolute session time (seconds since start)."""

    time: float


class Timeout:
    """Marker: the driver stopped waiting for a press on the pending trial."""

    _instance: Optional["Timeout"] = None

    def __new__(cls) -> "Timeout":
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self) -> str:  # pragma: no cover
        return "TIMEOUT"


TIMEOUT = Timeout()

ResponseEvent = Union[Press, Timeout]


class StaircaseSession:
    """Single-owner staircase state machine.

    Usage per trial: ``next_stimulus()`` to draw the pending stimulus, then
    ``resolve_trial()`` with either a :class:`Press` or :data:`TIMEOUT`.
    After completion, ``threshold_estimate()`` builds the result.  Safe to
    move between threads, not to share mutably.
    """

    def __init__(self, config: StaircaseConfig) -> None:
        self.config = config
        self._rng = random.Random(config.rng_seed)
        self._trials: list[TrialRecord] = []
        self._reversal_indices: list[int] = []
        self._pending: Optional[StimulusCommand] = None
        self._next_intensity = config.start_intensity
        # Movement direction is established by the first response; until then
        # no trial can be flagged as a reversal.  The staircase nominally
        # starts in its descending phase (a first detection just continues
        # down).
        self._prev_direction: Optional[Direction] = None
        self._last_event_time = 0.0
        self._spontaneous_presses = 0
        self._late_responses = 0
        self._termination: Optional[Termination] = None

    # -- introspection ----------------------------------------------------

    @property
    def complete(self) -> bool:
        return self._termination is not None

    @property
    def termination(self) -> Optional[Termination]:
        return self._termination

    @property
    def trials(self) -> tuple[TrialRecord, ...]:
        return tuple(self._trials)

    @property
    def reversal_indices(self) -> tuple[int, ...]:
        return tuple(self._reversal_indices)

    @property
    def pending_stimulus(self) -> Optional[StimulusCommand]:
        return self._pending

    @property
    def false_positive_count(self) -> int:
        return self._late_responses + self._spontaneous_presses

    @property
    def last_event_time(self) -> float:
        return self._last_event_time

    # -- state transitions -------------------------------------------------

    def next_stimulus(self) -> StimulusCommand:
        """Draw the next stimulus: previous intensity stepped per the last
        response, onset a uniform ISI after the last resolved event."""
        if self.complete:
            raise SessionCompleteError("session is complete")
        if self._pending is not None:
            raise StaircaseStateError("a stimulus is already pending")
        isi = self._rng.uniform(self.config.isi_min, self.config.isi_max)
        cmd = StimulusCommand(
            trial_index=len(self._trials),
            intensity=self._next_intensity,
            duration=self.config.stimulus_duration,
            sharpness=self.config.stimulus_sharpness,
            scheduled_onset=self._last_event_time + isi,
        )
        self._pending = cmd
        return cmd

    def resolve_trial(self, response: ResponseEvent) -> TrialRecord:
        """Resolve the pending trial with a press or a timeout.

        A press is attributed to the pending stimulus whenever its window has
        opened (press time >= onset); how long to keep waiting past the
        deadline is the driver's policy.  An unattributable press is counted
        as a spontaneous false positive and NoPendingStimulusError is raised
        instead of producing a trial record.
        """
        if self.complete:
            raise SessionCompleteError("session is complete")
        if isinstance(response, Press):
            if self._pending is None or response.time < self._pending.scheduled_onset:
                self._spontaneous_presses += 1
                raise NoPendingStimulusError(
                    f"press at t={response.time:.3f}s has no open response window"
                )
            cmd = self._pending
            latency = response.time - cmd.scheduled_onset
            if latency <= self.config.response_deadline + _LATENCY_EPS:
                outcome = Outcome.DETECTED
            else:
                outcome = Outcome.LATE_RESPONSE
                self._late_responses += 1
            resolution_time = response.time
        elif isinstance(response, Timeout):
            if self._pending is None:
                raise StaircaseStateError("timeout with no pending stimulus")
            cmd = self._pending
            latency = None
            outcome = Outcome.MISSED
            # A timed-out trial resolves at deadline expiry regardless of
            # when the driver noticed.
            resolution_time = cmd.scheduled_onset + self.config.response_deadline
        else:
            raise TypeError(f"expected Press or TIMEOUT, got {response!r}")

        direction = Direction.DOWN if outcome is Outcome.DETECTED else Direction.UP
        is_reversal = self._prev_direction is not None and direction != self._prev_direction
        record = TrialRecord(
            trial_index=cmd.trial_index,
            intensity=cmd.intensity,
            onset_time=cmd.scheduled_onset,
            response_latency=latency,
            outcome=outcome,
            intended_direction_after=direction,
            is_reversal=is_reversal,
        )
        self._trials.append(record)
        if is_reversal:
            self._reversal_indices.append(record.trial_index)
        self._prev_direction = direction

        lo, hi = self.config.intensity_min, self.config.intensity_max
        step = self.config.step_size
        nxt = cmd.intensity - step if direction is Direction.DOWN else cmd.intensity + step
        # snap float dust onto the bounds so accumulated step error cannot
        # manufacture sub-step moves next to a clamp
        snap = step * 1e-9
        if nxt <= lo + snap:
            nxt = lo
        elif nxt >= hi - snap:
            nxt = hi
        self._next_intensity = nxt

        self._pending = None
        self._last_event_time = resolution_time
        if len(self._reversal_indices) >= self.config.target_reversals:
            self._termination = Termination.REVERSALS_REACHED
        elif len(self._trials) >= self.config.max_trials:
            self._termination = Termination.TRIAL_CAP_HIT
        return record

    def threshold_estimate(self) -> SessionResult:
        """Build the final result; requires a terminated session."""
        if not self.complete:
            raise SessionNotCompleteError("session still running")
        assert self._termination is not None
        reversal_intensities = [self._trials[i].intensity for i in self._reversal_indices]
        n = len(reversal_intensities)
        if n == 0:
            mean = math.nan
        else:
            mean = math.fsum(reversal_intensities) / n
        if n < 2:
            sd = math.nan
        else:
            sd = math.sqrt(math.fsum((x - mean) ** 2 for x in reversal_intensities) / (n - 1))
        return SessionResult(
            config=self.config,
            trials=tuple(self._trials),
            reversal_indices=tuple(self._reversal_indices),
            threshold_mean=mean,
            threshold_sd=sd,
            false_positive_count=self.false_positive_count,
            termination=self._termination,
        )


def run_scripted_session(
    config: StaircaseConfig,
    latencies: Sequence[Optional[float]],
    *,
    late_grace: float = LATE_PRESS_GRACE_S,
    recorder=None,
) -> SessionResult:
    """Drive a full session from a per-trial latency script.

    ``latencies[k]`` is the press latency for trial k: ``None`` means no
    press (timeout); values above ``response_deadline + late_grace`` mean the
    driver resolves the trial as missed and the press lands afterwards as a
    spontaneous false positive.  A script shorter than the session is padded
    with timeouts.  ``recorder`` (see :mod:`vstkit.store`) receives the event
    stream when given.
    """
    session = StaircaseSession(config)
    if recorder is not None:
        recorder.session_created(config)
    pending = session.next_stimulus()
    if recorder is not None:
        recorder.stimulus_scheduled(pending)
    trial = 0
    while True:
        if recorder is not None:
            recorder.stimulus_onset(pending)
        latency = latencies[trial] if trial < len(latencies) else None
        trial += 1
        spontaneous_at: Optional[float] = None
        if latency is None:
            resolved = session.resolve_trial(TIMEOUT)
        elif latency <= config.response_deadline + late_grace:
            t = pending.scheduled_onset + latency
            if recorder is not None:
                recorder.response_received(t, attributed=True)
            resolved = session.resolve_trial(Press(t))
        else:
            spontaneous_at = pending.scheduled_onset + latency
            resolved = session.resolve_trial(TIMEOUT)
        if recorder is not None:
            recorder.trial_resolved(resolved)
        if session.complete:
            break
        pending = session.next_stimulus()
        if recorder is not None:
            recorder.stimulus_scheduled(pending)
        if spontaneous_at is not None:
            if spontaneous_at >= pending.scheduled_onset:
                raise ValueError(
                    "script latency collides with the next stimulus window; "
                    "keep press latencies below response_deadline + isi_min"
                )
            if recorder is not None:
                recorder.response_received(spontaneous_at, attributed=False)
            try:
                session.resolve_trial(Press(spontaneous_at))
            except NoPendingStimulusError:
                pass
    result = session.threshold_estimate()
    if recorder is not None:
        recorder.session_completed(result)
    return result
