import json
import random

import pytest
from util import random_script

from vstkit.observer import ObserverModel, run_simulated_session
from vstkit.staircase import StaircaseConfig, run_scripted_session
from vstkit.store import (
    CorruptLogError,
    EventKind,
    EventLogWriter,
    SequenceGapError,
    SessionClosedError,
    SessionEvent,
    SessionRecorder,
    SessionStore,
    TRIALS_CSV_HEADER,
    export_trials_csv,
    read_events,
    replay_log,
    result_from_doc,
    result_to_doc,
)


def record_scripted(tmp_path, script, seed=0, session_id="s-1"):
    writer = EventLogWriter(tmp_path / f"{session_id}.jsonl")
    recorder = SessionRecorder(session_id, writer)
    result = run_scripted_session(
        StaircaseConfig(rng_seed=seed), script, recorder=recorder
    )
    return result, tmp_path / f"{session_id}.jsonl"


class TestEventLogWriter:
    def _event(self, seq, kind=EventKind.STIMULUS_SCHEDULED, session="s"):
        payload = {"config": {}} if kind is EventKind.SESSION_CREATED else {}
        return SessionEvent(session_id=session, seq=seq, timestamp=0.0, kind=kind, payload=payload)

    def test_dense_appends_ack(self, tmp_path):
        writer = EventLogWriter(tmp_path / "a.jsonl")
        writer.append(self._event(0, EventKind.SESSION_CREATED))
        writer.append(self._event(1))
        writer.close()
        assert len(read_events(tmp_path / "a.jsonl")) == 2

    def test_sequence_gap_rejected(self, tmp_path):
        writer = EventLogWriter(tmp_path / "a.jsonl")
        writer.append(self._event(0, EventKind.SESSION_CREATED))
        with pytest.raises(SequenceGapError):
            writer.append(self._event(2))

    def test_append_after_completion_rejected(self, tmp_path):
        writer = EventLogWriter(tmp_path / "a.jsonl")
        writer.append(self._event(0, EventKind.SESSION_CREATED))
        writer.append(self._event(1, EventKind.SESSION_COMPLETED))
        with pytest.raises(SessionClosedError):
            writer.append(self._event(2))

    def test_existing_log_not_clobbered(self, tmp_path):
        (tmp_path / "a.jsonl").write_text("{}\n")
        with pytest.raises(FileExistsError):
            EventLogWriter(tmp_path / "a.jsonl")


class TestReadEvents:
    def test_torn_final_line_dropped_with_warning(self, tmp_path, caplog):
        _, path = record_scripted(tmp_path, [0.3, None, 0.3])
        text = path.read_text()
        path.write_text(text + '{"session_id": "s-1", "seq"')  # torn write
        with caplog.at_level("WARNING"):
            events = read_events(path)
        assert "torn" in caplog.text
        assert events[-1].kind is EventKind.SESSION_COMPLETED

    def test_mid_file_damage_is_corrupt(self, tmp_path):
        _, path = record_scripted(tmp_path, [0.3, None, 0.3])
        lines = path.read_text().splitlines()
        lines[3] = "not json at all"
        path.write_text("\n".join(lines) + "\n")
        with pytest.raises(CorruptLogError):
            read_events(path)

    def test_every_line_parses_independently(self, tmp_path):
        _, path = record_scripted(tmp_path, [0.3, None, 1.7, 0.4])
        for line in path.read_text().splitlines():
            obj = json.loads(line)
            assert {"session_id", "seq", "timestamp", "kind", "payload"} <= set(obj)


class TestReplay:
    @pytest.mark.parametrize("seed", range(6))
    def test_replay_reconstructs_scripted_session(self, tmp_path, seed):
        rng = random.Random(seed)
        script = random_script(rng)
        result, path = record_scripted(tmp_path, script, seed=seed)
        replayed = replay_log(read_events(path))
        assert result_to_doc(replayed) == result_to_doc(result)

    def test_replay_matches_simulated_session(self, tmp_path):
        store = SessionStore(tmp_path)
        recorder = SessionRecorder("sim-1", store.create_log("sim-1"))
        observer = ObserverModel(mu=0.35, sigma=0.03, guess_rate=0.02, lapse_rate=0.02)
        result = run_simulated_session(
            StaircaseConfig(), observer, rng_seed=3, recorder=recorder
        )
        store.write_result("sim-1", result)
        assert result_to_doc(store.replay("sim-1")) == result_to_doc(result)

    def test_deadline_straddling_press_replays_false_positive(self, tmp_path):
        # latency 1.6 s: attributed late response, one false positive
        result, path = record_scripted(tmp_path, [0.3, 1.6, 0.3, None, 0.3])
        assert result.false_positive_count == 1
        replayed = replay_log(read_events(path))
        assert replayed.false_positive_count == 1

    def test_spontaneous_press_replays_identically(self, tmp_path):
        result, path = record_scripted(tmp_path, [0.3, 2.8, None, 0.3])
        assert result.false_positive_count == 1
        replayed = replay_log(read_events(path))
        assert result_to_doc(replayed) == result_to_doc(result)

    def test_truncated_log_is_corrupt(self, tmp_path):
        _, path = record_scripted(tmp_path, [0.3, None, 0.3])
        lines = path.read_text().splitlines()
        path.write_text("\n".join(lines[:-3]) + "\n")
        with pytest.raises(CorruptLogError):
            replay_log(read_events(path))

    def test_tampered_intensity_detected_with_field_diff(self, tmp_path):
        _, path = record_scripted(tmp_path, [0.3, None, 0.3])
        lines = path.read_text().splitlines()
        for i, line in enumerate(lines):
            obj = json.loads(line)
            if obj["kind"] == "trial_resolved":
                obj["payload"]["intensity"] = 0.77
                lines[i] = json.dumps(obj)
                break
        path.write_text("\n".join(lines) + "\n")
        with pytest.raises(CorruptLogError) as info:
            replay_log(read_events(path))
        assert any("intensity" in d for d in info.value.details)

    def test_gap_in_seq_is_corrupt(self, tmp_path):
        _, path = record_scripted(tmp_path, [0.3, None, 0.3])
        lines = path.read_text().splitlines()
        del lines[2]
        path.write_text("\n".join(lines) + "\n")
        with pytest.raises(CorruptLogError):
            replay_log(read_events(path))

    def test_write_then_replay_identity_many_seeds(self, tmp_path):
        # engine determinism contract over a wide seed sweep
        for seed in range(500):
            rng = random.Random(seed)
            script = [
                None if rng.random() < 0.35 else rng.uniform(0.05, 2.3)
                for _ in range(150)
            ]
            recorder = SessionRecorder(f"p{seed}")
            result = run_scripted_session(
                StaircaseConfig(rng_seed=seed), script, recorder=recorder
            )
            replayed = replay_log(recorder.events)
            assert result_to_doc(replayed) == result_to_doc(result)


class TestResultDocuments:
    def test_round_trip(self):
        result = run_scripted_session(StaircaseConfig(rng_seed=1), [0.3, None] * 30)
        doc = result_to_doc(result)
        again = result_to_doc(result_from_doc(doc))
        assert doc == again

    def test_nan_statistics_become_null(self):
        result = run_scripted_session(
            StaircaseConfig(rng_seed=1, max_trials=8), [None] * 8
        )
        doc = result_to_doc(result)
        assert doc["threshold_mean"] is None
        assert doc["threshold_sd"] is None
        text = json.dumps(doc)
        assert "NaN" not in text


class TestTrialsCsv:
    def test_header_and_row_count(self):
        result = run_scripted_session(StaircaseConfig(rng_seed=2), [0.3, None] * 30)
        lines = export_trials_csv(result).splitlines()
        assert lines[0] == TRIALS_CSV_HEADER
        assert len(lines) == 1 + len(result.trials)

    def test_missed_trial_has_empty_latency_cell(self):
        result = run_scripted_session(StaircaseConfig(rng_seed=2), [0.3, None] * 30)
        lines = export_trials_csv(result).splitlines()
        missed = next(
            line for line, t in zip(lines[1:], result.trials)
            if t.response_latency is None
        )
        cells = missed.split(",")
        assert cells[3] == ""
        assert cells[4] == "missed"

    def test_round_trip_recomputes_threshold(self):
        result = run_scripted_session(StaircaseConfig(rng_seed=7), [0.4, None] * 40)
        intensities = []
        for line in export_trials_csv(result).splitlines()[1:]:
            cells = line.split(",")
            if cells[5] == "true":
                intensities.append(float(cells[1]))
        recomputed = sum(intensities) / len(intensities)
        assert abs(recomputed - result.threshold_mean) < 1e-9
