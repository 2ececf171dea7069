"""HTTP session orchestration for live (or simulated-time) threshold tests.

The server owns all timing: stimulus onsets are emitted at their scheduled
times, response latency is receipt time minus onset time on the server
clock, and a timer resolves unanswered trials.  Clients are thin renderers
that subscribe to the session event stream and post button presses.

With ``test_clock=True`` the server runs on a manually advanced clock
(exposed at ``POST /v1/test/clock``), so full sessions can be driven
deterministically with no real-time waits.
"""

from __future__ import annotations

import asyncio
import json
import logging
import time
import uuid
from contextlib import asynccontextmanager
from pathlib import Path
from typing import Optional, Union

from fastapi import FastAPI, HTTPException, Query, Request
from fastapi.responses import StreamingResponse
from pydantic import BaseModel, ConfigDict

from .consistency import AnalysisPipeline, analyze_waveform
from .filters import FilterError
from .fourier import SpectrumError
from .staircase import (
    LATE_PRESS_GRACE_S,
    TIMEOUT,
    InvalidConfigError,
    NoPendingStimulusError,
    Press,
    StaircaseConfig,
    StaircaseSession,
    StimulusCommand,
)
from .store import SessionRecorder, SessionStore, config_to_doc
from .waveform import WaveformError, load_waveform, select_channel

__all__ = ["create_app", "ManualClock", "WallClock", "SessionRunner"]

logger = logging.getLogger(__name__)

_STREAM_POLL_S = 0.02


class ManualClock:
    """Test clock: time moves only when told to."""

    def __init__(self, start: float = 0.0):
        self._t = start

    def now(self) -> float:
        return self._t

    def advance(self, dt: float) -> float:
        if dt < 0:
            raise ValueError("cannot advance backwards")
        self._t += dt
        return self._t

    def set(self, t: float) -> float:
        if t < self._t:
            raise ValueError(f"cannot move clock backwards ({t} < {self._t})")
        self._t = t
        return self._t


class WallClock:
    """Monotonic wall clock, zeroed at construction."""

    def __init__(self):
        self._t0 = time.monotonic()

    def now(self) -> float:
        return time.monotonic() - self._t0


class SessionRunner:
    """Event-driven driver of one engine under a shared clock.

    All mutation happens through ``advance_to`` (emit due onsets, resolve
    overdue trials) and ``handle_press``; the service serializes calls with
    a per-session lock.
    """

    def __init__(
        self,
        session_id: str,
        config: StaircaseConfig,
        store: SessionStore,
        clock: Union[ManualClock, WallClock],
        late_grace: float = LATE_PRESS_GRACE_S,
    ):
        if late_grace >= config.isi_min:
            raise InvalidConfigError(
                "late-press grace must stay below isi_min", field="isi_min"
            )
        self.session_id = session_id
        self.engine = StaircaseSession(config)
        self.store = store
        self.recorder = SessionRecorder(session_id, store.create_log(session_id))
        self.clock = clock
        self.t0 = clock.now()
        self.late_grace = late_grace
        self.state = "running"  # -> completed | aborted
        self.created_at = time.time()
        self.onset_emitted = False
        self.onset_lags: list[float] = []
        self.lock = asyncio.Lock()
        self.recorder.session_created(config)
        self._pending: StimulusCommand = self.engine.next_stimulus()
        self.recorder.stimulus_scheduled(self._pending)

    def session_time(self) -> float:
        return self.clock.now() - self.t0

    def next_action_time(self) -> Optional[float]:
        """Session time of the next scheduled action, or None when idle."""
        if self.state != "running":
            return None
        if not self.onset_emitted:
            return self._pending.scheduled_onset
        return (
            self._pending.scheduled_onset
            + self.engine.config.response_deadline
            + self.late_grace
        )

    def advance_to(self, now: float) -> None:
        """Process every action due at or before session time ``now``."""
        while self.state == "running":
            due = self.next_action_time()
            if due is None or due > now:
                break
            if not self.onset_emitted:
                self.onset_emitted = True
                lag = now - self._pending.scheduled_onset
                self.onset_lags.append(lag)
                logger.debug(
                    "session %s trial %d onset lag %.1f ms",
                    self.session_id, self._pending.trial_index, lag * 1e3,
                )
                self.recorder.stimulus_onset(self._pending)
            else:
                record = self.engine.resolve_trial(TIMEOUT)
                self.recorder.trial_resolved(record)
                self._after_resolution()

    def _after_resolution(self) -> None:
        if self.engine.complete:
            result = self.engine.threshold_estimate()
            self.store.write_result(self.session_id, result)
            self.recorder.session_completed(result)  # closes the log
            self.state = "completed"
        else:
            self._pending = self.engine.next_stimulus()
            self.onset_emitted = False
            self.recorder.stimulus_scheduled(self._pending)

    def handle_press(self, now: float, note: Optional[str] = None) -> dict:
        """Resolve or count a button press at session time ``now``."""
        attributed = self.onset_emitted
        self.recorder.response_received(now, attributed=attributed)
        if attributed:
            record = self.engine.resolve_trial(Press(now))
            self.recorder.trial_resolved(record)
            self._after_resolution()
            return {
                "outcome": record.outcome.value,
                "trial_index": record.trial_index,
                "latency_s": record.response_latency,
            }
        try:
            self.engine.resolve_trial(Press(now))
        except NoPendingStimulusError:
            pass
        return {"outcome": "false_positive", "trial_index": None, "latency_s": None}

    def abort(self) -> None:
        self.state = "aborted"
        self.recorder.close()

    def summary(self) -> dict:
        pending = None
        if self.state == "running":
            cmd = self._pending
            pending = {
                "trial_index": cmd.trial_index,
                "intensity": cmd.intensity,
                "duration": cmd.duration,
                "scheduled_onset": cmd.scheduled_onset,
                "onset_emitted": self.onset_emitted,
            }
        return {
            "session_id": self.session_id,
            "state": self.state,
            "created_at": self.created_at,
            "config": config_to_doc(self.engine.config),
            "trial_count": len(self.engine.trials),
            "reversal_count": len(self.engine.reversal_indices),
            "false_positive_count": self.engine.false_positive_count,
            "pending_stimulus": pending,
        }


class _ConfigBody(BaseModel):
    model_config = ConfigDict(extra="forbid")

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


class _ResponseBody(BaseModel):
    model_config = ConfigDict(extra="forbid")

    client_note: Optional[str] = None


class _ClockBody(BaseModel):
    model_config = ConfigDict(extra="forbid")

    advance: Optional[float] = None
    set: Optional[float] = None


def _sse_frame(event) -> str:
    data = json.dumps(
        {
            "session_id": event.session_id,
            "seq": event.seq,
            "timestamp": event.timestamp,
            "kind": event.kind.value,
            "payload": event.payload,
        }
    )
    return f"id: {event.seq}\nevent: {event.kind.value}\ndata: {data}\n\n"


def create_app(
    data_dir: Union[str, Path],
    test_clock: bool = False,
    late_grace: float = LATE_PRESS_GRACE_S,
    ui_dir: Optional[Union[str, Path]] = None,
) -> FastAPI:
    """Build the session service.

    ``test_clock`` swaps the wall clock for a manually driven one and adds
    ``POST /v1/test/clock``.  ``ui_dir`` (when given and existing) is served
    at ``/ui`` for the browser client.
    """
    store = SessionStore(data_dir)
    clock: Union[ManualClock, WallClock] = ManualClock() if test_clock else WallClock()
    runners: dict[str, SessionRunner] = {}
    tasks: dict[str, asyncio.Task] = {}

    @asynccontextmanager
    async def lifespan(_: FastAPI):
        yield
        for task in tasks.values():
            task.cancel()

    app = FastAPI(title="vstkit session service", version="0.1.0", lifespan=lifespan)
    app.state.runners = runners
    app.state.clock = clock

    def _get_runner(session_id: str) -> SessionRunner:
        runner = runners.get(session_id)
        if runner is None:
            raise HTTPException(status_code=404, detail="unknown session")
        return runner

    async def _live_scheduler(runner: SessionRunner) -> None:
        while runner.state == "running":
            async with runner.lock:
                due = runner.next_action_time()
            if due is None:
                break
            delay = due - runner.session_time()
            if delay > 0:
                # short naps keep aborts responsive
                await asyncio.sleep(min(delay, 0.2))
                if runner.session_time() < due:
                    continue
            async with runner.lock:
                runner.advance_to(runner.session_time())

    @app.post("/v1/sessions", status_code=201)
    async def create_session(body: _ConfigBody):
        try:
            config = StaircaseConfig(**body.model_dump())
            session_id = str(uuid.uuid4())
            runner = SessionRunner(session_id, config, store, clock, late_grace)
        except InvalidConfigError as exc:
            raise HTTPException(
                status_code=422,
                detail=[{"loc": ["body", exc.field or "config"], "msg": str(exc)}],
            ) from exc
        runners[session_id] = runner
        if not test_clock:
            tasks[session_id] = asyncio.create_task(_live_scheduler(runner))
        return {"session_id": session_id}

    @app.get("/v1/sessions/{session_id}")
    async def get_session(session_id: str):
        runner = _get_runner(session_id)
        async with runner.lock:
            return runner.summary()

    @app.post("/v1/sessions/{session_id}/response")
    async def post_response(session_id: str, body: Optional[_ResponseBody] = None):
        runner = _get_runner(session_id)
        async with runner.lock:
            runner.advance_to(runner.session_time())
            if runner.state != "running":
                raise HTTPException(status_code=409, detail="session is not running")
            note = body.client_note if body else None
            return runner.handle_press(runner.session_time(), note)

    @app.post("/v1/sessions/{session_id}/abort")
    async def abort_session(session_id: str):
        runner = _get_runner(session_id)
        async with runner.lock:
            runner.advance_to(runner.session_time())
            if runner.state != "running":
                raise HTTPException(status_code=409, detail="session is not running")
            runner.abort()
        return {"session_id": session_id, "state": "aborted"}

    @app.get("/v1/sessions/{session_id}/result")
    async def get_result(session_id: str):
        runner = _get_runner(session_id)
        async with runner.lock:
            runner.advance_to(runner.session_time())
            if runner.state != "completed":
                raise HTTPException(status_code=409, detail="session is not completed")
        return store.read_result_doc(session_id)

    @app.get("/v1/sessions/{session_id}/events")
    async def stream_events(request: Request, session_id: str,
                            last_seq: Optional[int] = Query(default=None)):
        runner = _get_runner(session_id)
        header_seq = request.headers.get("last-event-seq") or request.headers.get(
            "last-event-id"
        )
        if last_seq is None and header_seq is not None:
            last_seq = int(header_seq)
        async with runner.lock:
            if last_seq is not None:
                start = last_seq + 1  # reconnect: recover the gap, no seq holes
            elif runner.state == "completed":
                start = len(runner.recorder.events) - 1  # replay the terminal event
            elif runner.state == "aborted":
                start = len(runner.recorder.events)
            else:
                start = len(runner.recorder.events)  # fresh connect tails live events

        async def gen():
            i = start
            while True:
                async with runner.lock:
                    if not test_clock:
                        runner.advance_to(runner.session_time())
                    pending = list(runner.recorder.events[i:])
                    done = runner.state != "running"
                for event in pending:
                    yield _sse_frame(event)
                i += len(pending)
                if done and i >= len(runner.recorder.events):
                    return
                if await request.is_disconnected():
                    return
                await asyncio.sleep(_STREAM_POLL_S)

        return StreamingResponse(gen(), media_type="text/event-stream")

    @app.post("/v1/analysis/spectrum")
    async def analyze_upload(
        request: Request,
        band_low: float = Query(default=50.0),
        band_high: float = Query(default=500.0),
        order: int = Query(default=4),
        window: str = Query(default="hann"),
        channel: Optional[str] = Query(default=None),
    ):
        body = await request.body()
        try:
            record = load_waveform(body)
            if record.channel_count > 1:
                selector: Union[int, str] = "magnitude" if channel is None else (
                    channel if channel == "magnitude" else int(channel)
                )
                record = select_channel(record, selector)
            pipeline = AnalysisPipeline(band=(band_low, band_high), order=order, window=window)
            analysis = analyze_waveform(record, pipeline)
        except (WaveformError, FilterError, SpectrumError, ValueError) as exc:
            raise HTTPException(status_code=400, detail=str(exc)) from exc
        spectrum = analysis.spectrum
        return {
            "sample_rate": record.sample_rate,
            "n_samples": record.n_samples,
            "frequencies": spectrum.frequencies.tolist(),
            "amplitudes": spectrum.amplitudes.tolist(),
            "peak_frequency": spectrum.peak_frequency,
            "peak_amplitude": spectrum.peak_amplitude,
            "resolution": spectrum.resolution,
            "rms": analysis.rms,
        }

    if test_clock:

        @app.post("/v1/test/clock")
        async def advance_clock(body: _ClockBody):
            assert isinstance(clock, ManualClock)
            try:
                if body.set is not None:
                    now = clock.set(body.set)
                elif body.advance is not None:
                    now = clock.advance(body.advance)
                else:
                    raise ValueError("provide 'advance' or 'set'")
            except ValueError as exc:
                raise HTTPException(status_code=422, detail=str(exc)) from exc
            for runner in runners.values():
                async with runner.lock:
                    if runner.state == "running":
                        runner.advance_to(runner.session_time())
            return {"now": now}

    if ui_dir is not None and Path(ui_dir).is_dir():
        from fastapi.staticfiles import StaticFiles

        app.mount("/ui", StaticFiles(directory=str(ui_dir), html=True), name="ui")

    return app
