import math
import random

import pytest

from vstkit.staircase import (
    TIMEOUT,
    Direction,
    InvalidConfigError,
    NoPendingStimulusError,
    Outcome,
    Press,
    SessionCompleteError,
    SessionNotCompleteError,
    StaircaseConfig,
    StaircaseSession,
    StaircaseStateError,
    Termination,
    run_scripted_session,
)
from vstkit.store import result_to_doc


def drive(session, responses):
    """Resolve a D/M string against fresh stimuli; returns the trial records."""
    records = []
    for ch in responses:
        cmd = session.pending_stimulus or session.next_stimulus()
        if ch == "D":
            records.append(session.resolve_trial(Press(cmd.scheduled_onset + 0.4)))
        else:
            records.append(session.resolve_trial(TIMEOUT))
    return records


class TestConfigValidation:
    def test_defaults_are_valid(self):
        cfg = StaircaseConfig()
        assert cfg.start_intensity == 0.5
        assert cfg.step_size == 0.05
        assert cfg.target_reversals == 8
        assert cfg.response_deadline == 1.5

    @pytest.mark.parametrize(
        "overrides",
        [
            {"step_size": 0.0},
            {"step_size": -0.05},
            {"step_size": 1.5},
            {"intensity_min": 0.6, "intensity_max": 0.5},
            {"intensity_max": 1.2},
            {"start_intensity": 1.5},
            {"isi_min": 0.0},
            {"isi_min": 5.0, "isi_max": 4.0},
            {"response_deadline": 0.0},
            {"target_reversals": 1},
            {"max_trials": 3},
        ],
    )
    def test_invariant_violations(self, overrides):
        with pytest.raises(InvalidConfigError):
            StaircaseConfig(**overrides)

    def test_seed_gives_identical_isi_sequences(self):
        onsets = []
        for _ in range(2):
            s = StaircaseSession(StaircaseConfig(rng_seed=42))
            seq = []
            for _ in range(10):
                cmd = s.next_stimulus()
                seq.append(cmd.scheduled_onset)
                s.resolve_trial(TIMEOUT)
            onsets.append(seq)
        assert onsets[0] == onsets[1]


class TestStimulusSequence:
    def test_first_stimulus_echoes_start_intensity(self):
        s = StaircaseSession(StaircaseConfig())
        cmd = s.next_stimulus()
        assert cmd.trial_index == 0
        assert cmd.intensity == 0.5
        assert cmd.duration == 0.1
        assert cmd.sharpness == 1.0

    def test_step_down_after_detection(self):
        s = StaircaseSession(StaircaseConfig())
        cmd = s.next_stimulus()
        s.resolve_trial(Press(cmd.scheduled_onset + 0.3))
        assert s.next_stimulus().intensity == pytest.approx(0.45, abs=1e-12)

    def test_hand_simulated_up_down_rule(self):
        # D,D,M from 0.50 -> 0.50, 0.45, 0.40, then 0.45
        s = StaircaseSession(StaircaseConfig())
        seen = [s.next_stimulus().intensity]
        drive(s, "DDM")
        seen.extend(t.intensity for t in s.trials[1:])
        seen.append(s.next_stimulus().intensity)
        assert seen == pytest.approx([0.50, 0.45, 0.40, 0.45], abs=1e-12)

    def test_clamped_at_lower_bound(self):
        cfg = StaircaseConfig(start_intensity=0.0, intensity_min=0.0)
        s = StaircaseSession(cfg)
        cmd = s.next_stimulus()
        assert cmd.intensity == 0.0
        s.resolve_trial(Press(cmd.scheduled_onset + 0.2))
        assert s.next_stimulus().intensity == 0.0

    def test_onsets_strictly_increase(self):
        s = StaircaseSession(StaircaseConfig(rng_seed=3))
        last = 0.0
        for _ in range(30):
            if s.complete:
                break
            cmd = s.next_stimulus()
            assert cmd.scheduled_onset > last
            last = cmd.scheduled_onset
            s.resolve_trial(TIMEOUT)

    def test_double_next_stimulus_rejected(self):
        s = StaircaseSession(StaircaseConfig())
        s.next_stimulus()
        with pytest.raises(StaircaseStateError):
            s.next_stimulus()


class TestTrialResolution:
    def test_press_within_deadline_is_detected(self):
        s = StaircaseSession(StaircaseConfig())
        cmd = s.next_stimulus()
        rec = s.resolve_trial(Press(cmd.scheduled_onset + 0.4))
        assert rec.outcome is Outcome.DETECTED
        assert rec.intended_direction_after is Direction.DOWN
        assert rec.response_latency == pytest.approx(0.4, abs=1e-9)

    def test_press_after_deadline_is_late_and_counted(self):
        s = StaircaseSession(StaircaseConfig())
        cmd = s.next_stimulus()
        rec = s.resolve_trial(Press(cmd.scheduled_onset + 1.6))
        assert rec.outcome is Outcome.LATE_RESPONSE
        assert rec.intended_direction_after is Direction.UP
        assert s.false_positive_count == 1
        # late response advances the staircase exactly like a miss
        assert s.next_stimulus().intensity == pytest.approx(0.55, abs=1e-12)

    def test_timeout_is_missed(self):
        s = StaircaseSession(StaircaseConfig())
        s.next_stimulus()
        rec = s.resolve_trial(TIMEOUT)
        assert rec.outcome is Outcome.MISSED
        assert rec.response_latency is None
        assert rec.intended_direction_after is Direction.UP

    def test_reversal_flags_for_ddmd(self):
        # responses D,D,M,D -> reversals at trials 2 and 3 (0-based)
        s = StaircaseSession(StaircaseConfig())
        records = drive(s, "DDMD")
        assert [r.is_reversal for r in records] == [False, False, True, True]
        assert list(s.reversal_indices) == [2, 3]

    def test_press_before_onset_is_spontaneous(self):
        s = StaircaseSession(StaircaseConfig())
        cmd = s.next_stimulus()
        with pytest.raises(NoPendingStimulusError):
            s.resolve_trial(Press(cmd.scheduled_onset - 0.5))
        assert s.false_positive_count == 1
        assert s.pending_stimulus is cmd  # trial still pending

    def test_press_with_no_stimulus_is_spontaneous(self):
        s = StaircaseSession(StaircaseConfig())
        with pytest.raises(NoPendingStimulusError):
            s.resolve_trial(Press(1.0))
        assert s.false_positive_count == 1
        assert s.trials == ()

    def test_false_positive_latency_boundary(self):
        # latencies 1.49, 1.50, 1.51 -> detected, detected, late_response
        s = StaircaseSession(StaircaseConfig())
        outcomes = []
        for latency in (1.49, 1.50, 1.51):
            cmd = s.next_stimulus()
            outcomes.append(s.resolve_trial(Press(cmd.scheduled_onset + latency)).outcome)
        assert outcomes == [Outcome.DETECTED, Outcome.DETECTED, Outcome.LATE_RESPONSE]
        assert s.false_positive_count == 1


class TestCompletionAndEstimate:
    def test_estimate_requires_completion(self):
        s = StaircaseSession(StaircaseConfig())
        with pytest.raises(SessionNotCompleteError):
            s.threshold_estimate()

    def test_resolve_after_completion_rejected(self):
        s = StaircaseSession(StaircaseConfig(target_reversals=2, max_trials=2))
        drive(s, "DM")
        assert s.complete
        with pytest.raises(SessionCompleteError):
            s.next_stimulus()
        with pytest.raises(SessionCompleteError):
            s.resolve_trial(TIMEOUT)

    def test_reversal_mean_and_sample_sd(self):
        # alternating 0.40/0.45 reversals -> mean 0.425, sd = 0.025*sqrt(8/7)
        s = StaircaseSession(StaircaseConfig(start_intensity=0.45))
        # M,D,M,D,... produces reversals from trial 1 onwards alternating
        drive(s, "DMDMDMDMD")
        result = s.threshold_estimate()
        assert result.termination is Termination.REVERSALS_REACHED
        intensities = sorted({result.trials[i].intensity for i in result.reversal_indices})
        assert intensities == pytest.approx([0.40, 0.45], abs=1e-12)
        assert result.threshold_mean == pytest.approx(0.425, abs=1e-12)
        assert result.threshold_sd == pytest.approx(0.025 * math.sqrt(8 / 7), abs=1e-9)

    def test_reversals_at_clamp_are_not_masked(self):
        # two detections pin the intensity at the floor; the following miss is
        # still a reversal even though the realized intensity never moved
        cfg = StaircaseConfig(start_intensity=0.0, intensity_min=0.0)
        s = StaircaseSession(cfg)
        records = drive(s, "DDMDMDMDMD")
        assert [t.intensity for t in records[:4]] == [0.0, 0.0, 0.0, 0.05]
        assert records[1].is_reversal is False
        assert records[2].is_reversal is True  # flip at the clamp, delta-I = 0
        result = s.threshold_estimate()
        assert result.termination is Termination.REVERSALS_REACHED
        reversal_vals = {result.trials[i].intensity for i in result.reversal_indices}
        assert reversal_vals == {0.0, 0.05}
        assert result.threshold_mean == pytest.approx(0.025, abs=1e-12)

    def test_never_responding_observer_hits_trial_cap(self):
        cfg = StaircaseConfig(max_trials=30)
        s = StaircaseSession(cfg)
        while not s.complete:
            s.next_stimulus()
            s.resolve_trial(TIMEOUT)
        result = s.threshold_estimate()
        assert result.termination is Termination.TRIAL_CAP_HIT
        assert len(result.trials) == 30
        assert result.reversal_indices == ()
        assert math.isnan(result.threshold_mean)
        assert math.isnan(result.threshold_sd)
        # monotone ascent to the clamp
        tail = [t.intensity for t in result.trials[-10:]]
        assert tail == [1.0] * 10


class TestInvariants:
    @pytest.mark.parametrize("seed", range(25))
    def test_step_and_bound_invariants(self, seed):
        rng = random.Random(seed)
        cfg = StaircaseConfig(rng_seed=seed)
        s = StaircaseSession(cfg)
        while not s.complete:
            cmd = s.next_stimulus()
            assert cfg.intensity_min <= cmd.intensity <= cfg.intensity_max
            if rng.random() < 0.5:
                s.resolve_trial(Press(cmd.scheduled_onset + rng.uniform(0.1, 1.4)))
            else:
                s.resolve_trial(TIMEOUT)
        trials = s.trials
        for a, b in zip(trials, trials[1:]):
            delta = abs(b.intensity - a.intensity)
            if delta == 0.0:
                assert a.intensity in (cfg.intensity_min, cfg.intensity_max)
            else:
                assert delta == pytest.approx(cfg.step_size, abs=1e-12)
        result = s.threshold_estimate()
        if result.termination is Termination.REVERSALS_REACHED:
            assert len(result.reversal_indices) == cfg.target_reversals
        assert sum(t.is_reversal for t in trials) == len(result.reversal_indices)

    @pytest.mark.parametrize("seed", range(10))
    def test_replay_same_script_is_bitwise_identical(self, seed):
        rng = random.Random(1000 + seed)
        script = [
            None if rng.random() < 0.4 else rng.uniform(0.1, 2.3) for _ in range(150)
        ]
        cfg = StaircaseConfig(rng_seed=seed)
        doc_a = result_to_doc(run_scripted_session(cfg, script))
        doc_b = result_to_doc(run_scripted_session(cfg, script))
        assert doc_a == doc_b

    @pytest.mark.parametrize("seed", range(10))
    def test_threshold_mean_recomputable_from_log(self, seed):
        rng = random.Random(seed)
        script = [
            None if rng.random() < 0.4 else rng.uniform(0.1, 1.4) for _ in range(150)
        ]
        result = run_scripted_session(StaircaseConfig(rng_seed=seed), script)
        recomputed = sum(result.trials[i].intensity for i in result.reversal_indices) / len(
            result.reversal_indices
        )
        assert abs(recomputed - result.threshold_mean) < 1e-12


class TestScriptedDriver:
    def test_script_shorter_than_session_pads_with_timeouts(self):
        result = run_scripted_session(StaircaseConfig(max_trials=10), [0.3, 0.3])
        assert result.termination is Termination.TRIAL_CAP_HIT
        assert [t.outcome for t in result.trials[:2]] == [Outcome.DETECTED] * 2
        assert all(t.outcome is Outcome.MISSED for t in result.trials[2:])

    def test_spontaneous_script_entry_counts_false_positive(self):
        # latency far beyond deadline+grace: trial resolves as missed, press
        # lands in the following ISI
        result = run_scripted_session(
            StaircaseConfig(max_trials=8), [0.3, 2.8, 0.3] + [None] * 8
        )
        assert result.trials[1].outcome is Outcome.MISSED
        assert result.false_positive_count == 1

    def test_collision_with_next_window_rejected(self):
        with pytest.raises(ValueError):
            run_scripted_session(StaircaseConfig(), [0.3, 9.0, 0.3])
