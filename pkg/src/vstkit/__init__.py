"""vstkit: vibration sensitivity testing toolkit.

Building blocks for smartphone-style vibrotactile threshold testing: an
adaptive staircase engine with false-positive gating, simulated observers
for validating its precision, and a waveform-analysis pipeline for
quantifying how consistently an instrument vibrates.
"""

from .staircase import (
    StaircaseConfig,
    StaircaseSession,
    StimulusCommand,
    TrialRecord,
    SessionResult,
    Press,
    TIMEOUT,
    Outcome,
    Direction,
    Termination,
    run_scripted_session,
)
from .observer import (
    ObserverModel,
    BatchStats,
    detection_probability,
    simulate_response,
    run_simulated_session,
    batch_precision,
    default_observer,
)
from .waveform import (
    WaveformRecord,
    load_waveform,
    waveform_to_csv,
    synthesize,
    select_channel,
    detrend,
    rms_amplitude,
)
from .fourier import SpectrumResult, PeakEstimate, fft_radix2, power_spectrum, peak_frequency
from .filters import butterworth_bandpass_sos, bandpass_filter
from .consistency import (
    AnalysisPipeline,
    WaveformAnalysis,
    ConsistencyReport,
    ComparisonSummary,
    analyze_waveform,
    consistency_report,
    compare_instruments,
    fork_like_trials,
    phone_like_trials,
)
from .store import (
    SessionStore,
    SessionRecorder,
    EventLogWriter,
    SessionEvent,
    EventKind,
    read_events,
    replay_log,
    export_trials_csv,
    result_to_doc,
    result_from_doc,
)

__version__ = "0.1.0"
