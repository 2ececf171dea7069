"""Session persistence: append-only event logs, result documents, CSV export.

Every session is recorded as a line-delimited JSON event log
(``sessions/<id>.jsonl``) plus a final result document
(``sessions/<id>.result.json``).  Because the staircase engine is
deterministic, replaying the logged responses re-derives the stored result
exactly; replay therefore doubles as a tamper/corruption check.
"""

from __future__ import annotations

import json
import logging
import math
import os
from dataclasses import asdict, dataclass
from enum import Enum
from pathlib import Path
from typing import IO, Optional, Sequence, Union

from .staircase import (
    TIMEOUT,
    Direction,
    NoPendingStimulusError,
    Outcome,
    Press,
    SessionResult,
    StaircaseConfig,
    StaircaseError,
    StaircaseSession,
    StimulusCommand,
    Termination,
    TrialRecord,
)

__all__ = [
    "EventKind",
    "SessionEvent",
    "EventLogWriter",
    "SessionRecorder",
    "SessionStore",
    "read_events",
    "replay_log",
    "export_trials_csv",
    "config_to_doc",
    "config_from_doc",
    "trial_to_doc",
    "result_to_doc",
    "result_from_doc",
    "doc_diffs",
    "StoreError",
    "SequenceGapError",
    "SessionClosedError",
    "CorruptLogError",
    "TRIALS_CSV_HEADER",
]

logger = logging.getLogger(__name__)

TRIALS_CSV_HEADER = "trial,intensity,onset_s,latency_s,outcome,is_reversal"


class StoreError(Exception):
    pass


class SequenceGapError(StoreError):
    pass


class SessionClosedError(StoreError):
    pass


class CorruptLogError(StoreError):
    """Structural damage or value mismatch in an event log.

    ``details`` lists the offending fields when the failure is a mismatch
    between replayed and logged values.
    """

    def __init__(self, message: str, details: Optional[list[str]] = None):
        self.details = details or []
        if self.details:
            message = message + "\n  " + "\n  ".join(self.details)
        super().__init__(message)


class EventKind(str, Enum):
    SESSION_CREATED = "session_created"
    STIMULUS_SCHEDULED = "stimulus_scheduled"
    STIMULUS_ONSET = "stimulus_onset"
    RESPONSE_RECEIVED = "response_received"
    TRIAL_RESOLVED = "trial_resolved"
    SESSION_COMPLETED = "session_completed"


@dataclass(frozen=True)
class SessionEvent:
    session_id: str
    seq: int
    timestamp: float  # seconds since session start
    kind: EventKind
    payload: dict


# -- document (de)serialization ------------------------------------------


def _float_or_none(x: float) -> Optional[float]:
    return None if math.isnan(x) else x


def config_to_doc(config: StaircaseConfig) -> dict:
    return asdict(config)


def config_from_doc(doc: dict) -> StaircaseConfig:
    return StaircaseConfig(**doc)


def stimulus_to_doc(cmd: StimulusCommand) -> dict:
    return asdict(cmd)


def trial_to_doc(t: TrialRecord) -> dict:
    return {
        "trial_index": t.trial_index,
        "intensity": t.intensity,
        "onset_time": t.onset_time,
        "response_latency": t.response_latency,
        "outcome": t.outcome.value,
        "intended_direction_after": t.intended_direction_after.value,
        "is_reversal": t.is_reversal,
    }


def trial_from_doc(doc: dict) -> TrialRecord:
    return TrialRecord(
        trial_index=doc["trial_index"],
        intensity=doc["intensity"],
        onset_time=doc["onset_time"],
        response_latency=doc["response_latency"],
        outcome=Outcome(doc["outcome"]),
        intended_direction_after=Direction(doc["intended_direction_after"]),
        is_reversal=doc["is_reversal"],
    )


def result_to_doc(result: SessionResult) -> dict:
    """JSON-shaped result document (NaN statistics become null)."""
    return {
        "config": config_to_doc(result.config),
        "trials": [trial_to_doc(t) for t in result.trials],
        "reversal_indices": list(result.reversal_indices),
        "threshold_mean": _float_or_none(result.threshold_mean),
        "threshold_sd": _float_or_none(result.threshold_sd),
        "false_positive_count": result.false_positive_count,
        "termination": result.termination.value,
    }


def result_from_doc(doc: dict) -> SessionResult:
    def back(x: Optional[float]) -> float:
        return math.nan if x is None else x

    return SessionResult(
        config=config_from_doc(doc["config"]),
        trials=tuple(trial_from_doc(t) for t in doc["trials"]),
        reversal_indices=tuple(doc["reversal_indices"]),
        threshold_mean=back(doc["threshold_mean"]),
        threshold_sd=back(doc["threshold_sd"]),
        false_positive_count=doc["false_positive_count"],
        termination=Termination(doc["termination"]),
    )


def doc_diffs(expected, actual, prefix: str = "") -> list[str]:
    """Recursive field-by-field diff of two JSON-shaped documents."""
    diffs: list[str] = []
    if isinstance(expected, dict) and isinstance(actual, dict):
        for key in sorted(set(expected) | set(actual)):
            path = f"{prefix}.{key}" if prefix else key
            if key not in expected:
                diffs.append(f"{path}: unexpected field (= {actual[key]!r})")
            elif key not in actual:
                diffs.append(f"{path}: missing (expected {expected[key]!r})")
            else:
                diffs.extend(doc_diffs(expected[key], actual[key], path))
    elif isinstance(expected, list) and isinstance(actual, list):
        if len(expected) != len(actual):
            diffs.append(f"{prefix}: length {len(actual)} != expected {len(expected)}")
        for i, (e, a) in enumerate(zip(expected, actual)):
            diffs.extend(doc_diffs(e, a, f"{prefix}[{i}]"))
    elif expected != actual:
        diffs.append(f"{prefix}: {actual!r} != expected {expected!r}")
    return diffs


# -- append-only event log -----------------------------------------------


def _event_to_line(event: SessionEvent) -> str:
    return json.dumps(
        {
            "session_id": event.session_id,
            "seq": event.seq,
            "timestamp": event.timestamp,
            "kind": event.kind.value,
            "payload": event.payload,
        }
    )


def _event_from_obj(obj: dict) -> SessionEvent:
    return SessionEvent(
        session_id=obj["session_id"],
        seq=obj["seq"],
        timestamp=obj["timestamp"],
        kind=EventKind(obj["kind"]),
        payload=obj["payload"],
    )


class EventLogWriter:
    """Single-writer append-only JSONL log for one session.

    Appends validate seq density and refuse writes after the terminal
    session_completed event; each line is flushed so a crash tears at most
    the final line.
    """

    def __init__(self, path: Union[str, os.PathLike]):
        self.path = Path(path)
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self._fh: Optional[IO[str]] = open(self.path, "x", encoding="utf-8")
        self._last_seq = -1
        self._completed = False

    def append(self, event: SessionEvent) -> None:
        if self._fh is None:
            raise SessionClosedError("log writer is closed")
        if self._completed:
            raise SessionClosedError("session already completed; log is closed")
        if event.seq != self._last_seq + 1:
            raise SequenceGapError(
                f"expected seq {self._last_seq + 1}, got {event.seq}"
            )
        self._fh.write(_event_to_line(event) + "\n")
        self._fh.flush()
        self._last_seq = event.seq
        if event.kind is EventKind.SESSION_COMPLETED:
            self._completed = True

    def close(self) -> None:
        if self._fh is not None:
            self._fh.close()
            self._fh = None

    def __enter__(self) -> "EventLogWriter":
        return self

    def __exit__(self, *exc) -> None:
        self.close()


def read_events(path: Union[str, os.PathLike]) -> list[SessionEvent]:
    """Parse a JSONL event log.

    A torn (unparseable) final line is dropped with a warning; damage
    anywhere else raises CorruptLogError naming the line.
    """
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    while lines and not lines[-1].strip():
        lines.pop()
    events: list[SessionEvent] = []
    for i, line in enumerate(lines):
        try:
            obj = json.loads(line)
            event = _event_from_obj(obj)
        except (json.JSONDecodeError, KeyError, ValueError) as exc:
            if i == len(lines) - 1:
                logger.warning("dropping torn final line of %s: %s", path, exc)
                break
            raise CorruptLogError(f"line {i + 1}: {exc}") from exc
        events.append(event)
    return events


# -- recording a live or simulated session --------------------------------


class SessionRecorder:
    """Builds the canonical event stream while a driver runs the engine.

    Timestamps are session-relative and canonical (onsets at their scheduled
    times, timeouts at deadline expiry), so identical runs produce identical
    logs byte for byte.  Events are kept in memory and mirrored to ``writer``
    when one is attached.
    """

    def __init__(self, session_id: str, writer: Optional[EventLogWriter] = None):
        self.session_id = session_id
        self.events: list[SessionEvent] = []
        self._writer = writer
        self._seq = 0
        self._last_time = 0.0
        self._deadline: Optional[float] = None

    def _emit(self, kind: EventKind, timestamp: float, payload: dict) -> SessionEvent:
        event = SessionEvent(
            session_id=self.session_id,
            seq=self._seq,
            timestamp=timestamp,
            kind=kind,
            payload=payload,
        )
        self._seq += 1
        self.events.append(event)
        if self._writer is not None:
            self._writer.append(event)
        return event

    def session_created(self, config: StaircaseConfig) -> None:
        self._deadline = config.response_deadline
        self._emit(EventKind.SESSION_CREATED, 0.0, {"config": config_to_doc(config)})

    def stimulus_scheduled(self, cmd: StimulusCommand) -> None:
        self._emit(EventKind.STIMULUS_SCHEDULED, self._last_time, stimulus_to_doc(cmd))

    def stimulus_onset(self, cmd: StimulusCommand) -> None:
        self._emit(EventKind.STIMULUS_ONSET, cmd.scheduled_onset, stimulus_to_doc(cmd))

    def response_received(self, time: float, attributed: bool) -> None:
        self._emit(
            EventKind.RESPONSE_RECEIVED, time, {"time": time, "attributed": attributed}
        )

    def trial_resolved(self, record: TrialRecord) -> None:
        if record.response_latency is not None:
            resolution_time = record.onset_time + record.response_latency
        else:
            assert self._deadline is not None
            resolution_time = record.onset_time + self._deadline
        self._last_time = resolution_time
        self._emit(EventKind.TRIAL_RESOLVED, resolution_time, trial_to_doc(record))

    def session_completed(self, result: SessionResult) -> None:
        self._emit(
            EventKind.SESSION_COMPLETED, self._last_time, {"result": result_to_doc(result)}
        )
        self.close()

    def close(self) -> None:
        """Close the backing log file, if any (aborted or finished sessions)."""
        if self._writer is not None:
            self._writer.close()


# -- replay ----------------------------------------------------------------


def replay_log(events: Sequence[SessionEvent]) -> SessionResult:
    """Re-drive the engine from a logged event stream.

    Every logged stimulus, trial record and the final result are checked
    against the freshly computed values; any divergence raises
    CorruptLogError listing the differing fields.  Returns the reconstructed
    result.
    """
    if not events:
        raise CorruptLogError("empty log")
    engine: Optional[StaircaseSession] = None
    session_id = events[0].session_id
    last_record: Optional[TrialRecord] = None
    result: Optional[SessionResult] = None
    for i, ev in enumerate(events):
        if ev.seq != i:
            raise CorruptLogError(f"seq {ev.seq} at position {i}: log must be dense from 0")
        if ev.session_id != session_id:
            raise CorruptLogError(f"seq {ev.seq}: session_id changed mid-log")
        if result is not None:
            raise CorruptLogError(f"seq {ev.seq}: event after session_completed")
        if ev.kind is EventKind.SESSION_CREATED:
            if i != 0:
                raise CorruptLogError(f"seq {ev.seq}: duplicate session_created")
            try:
                engine = StaircaseSession(config_from_doc(ev.payload["config"]))
            except (KeyError, TypeError, ValueError) as exc:
                raise CorruptLogError(f"seq 0: bad config payload: {exc}") from exc
            continue
        if engine is None:
            raise CorruptLogError("log must start with session_created")
        try:
            if ev.kind is EventKind.STIMULUS_SCHEDULED:
                cmd = engine.next_stimulus()
                diffs = doc_diffs(stimulus_to_doc(cmd), ev.payload)
                if diffs:
                    raise CorruptLogError(f"seq {ev.seq}: scheduled stimulus diverges", diffs)
            elif ev.kind is EventKind.STIMULUS_ONSET:
                pending = engine.pending_stimulus
                if pending is None:
                    raise CorruptLogError(f"seq {ev.seq}: onset with no scheduled stimulus")
                diffs = doc_diffs(stimulus_to_doc(pending), ev.payload)
                if diffs:
                    raise CorruptLogError(f"seq {ev.seq}: onset diverges", diffs)
            elif ev.kind is EventKind.RESPONSE_RECEIVED:
                attributed = True
                try:
                    last_record = engine.resolve_trial(Press(ev.payload["time"]))
                except NoPendingStimulusError:
                    attributed = False
                if attributed != ev.payload.get("attributed"):
                    raise CorruptLogError(
                        f"seq {ev.seq}: press attribution diverges "
                        f"(replayed {attributed}, logged {ev.payload.get('attributed')})"
                    )
            elif ev.kind is EventKind.TRIAL_RESOLVED:
                if engine.pending_stimulus is not None:
                    last_record = engine.resolve_trial(TIMEOUT)
                if last_record is None:
                    raise CorruptLogError(f"seq {ev.seq}: trial_resolved with no trial")
                diffs = doc_diffs(trial_to_doc(last_record), ev.payload)
                if diffs:
                    raise CorruptLogError(f"seq {ev.seq}: trial record diverges", diffs)
            elif ev.kind is EventKind.SESSION_COMPLETED:
                if not engine.complete:
                    raise CorruptLogError(
                        f"seq {ev.seq}: session_completed but replayed session still running"
                    )
                result = engine.threshold_estimate()
                diffs = doc_diffs(result_to_doc(result), ev.payload.get("result", {}))
                if diffs:
                    raise CorruptLogError(f"seq {ev.seq}: result diverges", diffs)
        except StaircaseError as exc:
            raise CorruptLogError(f"seq {ev.seq}: {exc}") from exc
    if result is None:
        raise CorruptLogError("truncated log: no session_completed event")
    return result


# -- tabular export ---------------------------------------------------------


def export_trials_csv(result: SessionResult) -> str:
    """One row per trial; empty latency cell for misses; floats keep full
    round-trip precision."""
    lines = [TRIALS_CSV_HEADER]
    for t in result.trials:
        latency = "" if t.response_latency is None else repr(t.response_latency)
        lines.append(
            f"{t.trial_index},{t.intensity!r},{t.onset_time!r},{latency},"
            f"{t.outcome.value},{'true' if t.is_reversal else 'false'}"
        )
    return "\n".join(lines) + "\n"


# -- on-disk layout ----------------------------------------------------------


class SessionStore:
    """Directory layout manager: ``<data_dir>/sessions/<id>.jsonl`` and
    ``<data_dir>/sessions/<id>.result.json``."""

    def __init__(self, data_dir: Union[str, os.PathLike]):
        self.data_dir = Path(data_dir)
        self.sessions_dir = self.data_dir / "sessions"
        self.sessions_dir.mkdir(parents=True, exist_ok=True)

    def log_path(self, session_id: str) -> Path:
        return self.sessions_dir / f"{session_id}.jsonl"

    def result_path(self, session_id: str) -> Path:
        return self.sessions_dir / f"{session_id}.result.json"

    def create_log(self, session_id: str) -> EventLogWriter:
        return EventLogWriter(self.log_path(session_id))

    def read_events(self, session_id: str) -> list[SessionEvent]:
        return read_events(self.log_path(session_id))

    def write_result(self, session_id: str, result: SessionResult) -> Path:
        path = self.result_path(session_id)
        doc = {"session_id": session_id, "result": result_to_doc(result)}
        path.write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")
        return path

    def read_result_doc(self, session_id: str) -> dict:
        return json.loads(self.result_path(session_id).read_text(encoding="utf-8"))

    def replay(self, session_id: str) -> SessionResult:
        return replay_log(self.read_events(session_id))
