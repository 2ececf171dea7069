"""Command-line entry points: simulate, batch, analyze, compare, serve,
export, replay.

Exit codes: 0 success, 1 usage error, 2 runtime error.  Outputs are
deterministic: the same flags and seeds always produce byte-identical
artifacts.  ``VSTKIT_DATA_DIR`` sets the default output location.
"""

from __future__ import annotations

import argparse
import glob
import json
import math
import os
import sys
import uuid
from pathlib import Path
from typing import Optional

import numpy as np

from .consistency import (
    AnalysisPipeline,
    ZeroMeanAmplitudeError,
    analyze_waveform,
    compare_instruments,
    consistency_report,
)
from .filters import SUPPORTED_ORDERS, FilterError
from .fourier import WINDOWS, SpectrumError
from .observer import ObserverModel, batch_precision, run_simulated_session
from .staircase import StaircaseConfig, StaircaseError
from .store import (
    EventLogWriter,
    SessionRecorder,
    StoreError,
    doc_diffs,
    export_trials_csv,
    read_events,
    replay_log,
    result_to_doc,
)
from .waveform import (
    SYNTH_KINDS,
    WaveformError,
    load_waveform,
    select_channel,
    synthesize,
    waveform_to_csv,
)

__all__ = ["main"]

_RUNTIME_ERRORS = (
    StaircaseError,
    WaveformError,
    FilterError,
    SpectrumError,
    StoreError,
    ZeroMeanAmplitudeError,
    OSError,
    ValueError,
)

# Namespace for deriving stable session ids from seeds in offline runs.
_SESSION_ID_NS = uuid.uuid5(uuid.NAMESPACE_URL, "vstkit:session")


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # route usage problems to exit code 1
        raise _UsageError(message)


def _fmt(x: float) -> str:
    return "nan" if math.isnan(x) else f"{x:.6g}"


def _parse_kv(text: str, what: str) -> dict[str, str]:
    out: dict[str, str] = {}
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        if "=" not in part:
            raise _UsageError(f"bad {what} entry {part!r}: expected key=value")
        key, value = part.split("=", 1)
        out[key.strip()] = value.strip()
    return out


_OBSERVER_KEYS = {
    "mu": "mu",
    "sigma": "sigma",
    "guess": "guess_rate",
    "lapse": "lapse_rate",
    "latency_mean": "latency_mean",
    "latency_jitter": "latency_jitter",
}


def _observer_from_spec(spec: str) -> ObserverModel:
    kv = _parse_kv(spec, "--observer")
    kwargs = {}
    for key, value in kv.items():
        if key not in _OBSERVER_KEYS:
            raise _UsageError(
                f"unknown observer key {key!r}; valid: {', '.join(_OBSERVER_KEYS)}"
            )
        kwargs[_OBSERVER_KEYS[key]] = float(value)
    if "mu" not in kwargs:
        raise _UsageError("--observer needs at least mu=<threshold>")
    try:
        return ObserverModel(**kwargs)
    except ValueError as exc:
        raise _UsageError(f"bad observer: {exc}") from exc


_CONFIG_ALIASES = {
    "start": "start_intensity",
    "step": "step_size",
    "reversals": "target_reversals",
    "deadline": "response_deadline",
}
_CONFIG_INT_FIELDS = {"target_reversals", "max_trials", "rng_seed"}


def _config_from_spec(spec: Optional[str]) -> StaircaseConfig:
    kwargs: dict = {}
    if spec:
        valid = {f.name for f in StaircaseConfig.__dataclass_fields__.values()}  # type: ignore[attr-defined]
        for key, value in _parse_kv(spec, "--config").items():
            field = _CONFIG_ALIASES.get(key, key)
            if field not in valid:
                raise _UsageError(f"unknown config key {key!r}")
            kwargs[field] = int(value) if field in _CONFIG_INT_FIELDS else float(value)
    return StaircaseConfig(**kwargs)


def _parse_band(text: str) -> tuple[float, float]:
    parts = text.split(",")
    if len(parts) != 2:
        raise _UsageError("--band expects low,high in Hz")
    return float(parts[0]), float(parts[1])


def _data_dir() -> Path:
    return Path(os.environ.get("VSTKIT_DATA_DIR", "vstkit-data"))


def _threshold_line(result) -> str:
    return (
        f"threshold={_fmt(result.threshold_mean)} sd={_fmt(result.threshold_sd)} "
        f"reversals={len(result.reversal_indices)} fp={result.false_positive_count}"
    )


# -- subcommands -------------------------------------------------------------


def _cmd_simulate(args) -> int:
    observer = _observer_from_spec(args.observer)
    config = _config_from_spec(args.config)
    session_id = str(uuid.uuid5(_SESSION_ID_NS, f"simulate:{args.seed}"))
    if args.out:
        prefix = Path(args.out)
    else:
        prefix = _data_dir() / f"sim-{args.seed}"
    prefix.parent.mkdir(parents=True, exist_ok=True)
    log_path = prefix.with_suffix(".jsonl")
    log_path.unlink(missing_ok=True)
    recorder = SessionRecorder(session_id, EventLogWriter(log_path))
    result = run_simulated_session(config, observer, rng_seed=args.seed, recorder=recorder)
    doc = {"session_id": session_id, "result": result_to_doc(result)}
    prefix.with_suffix(".result.json").write_text(json.dumps(doc, indent=2) + "\n")
    prefix.with_suffix(".trials.csv").write_text(export_trials_csv(result))
    print(_threshold_line(result))
    return 0


def _cmd_batch(args) -> int:
    if args.n < 2:
        raise _UsageError("--n must be >= 2")
    observer = _observer_from_spec(args.observer)
    config = _config_from_spec(args.config)
    stats = batch_precision(config, observer, args.n, rng_seed=args.seed)
    for i, estimate in enumerate(stats.per_session_estimates):
        print(f"session={i} threshold={_fmt(estimate)}")
    print(f"mean={_fmt(stats.mean)} sd={_fmt(stats.sample_sd)}")
    return 0


def _synth_from_spec(kv: dict[str, str]):
    kind = kv.pop("kind", None)
    if kind not in SYNTH_KINDS:
        raise _UsageError(f"--synth needs kind=<{'|'.join(SYNTH_KINDS)}>")
    keymap = {
        "freq": ("freq", float),
        "amplitude": ("amplitude", float),
        "amp": ("amplitude", float),
        "tau": ("decay_tau", float),
        "duration": ("duration", float),
        "fs": ("sample_rate", float),
        "noise": ("noise_sd", float),
        "noise_sd": ("noise_sd", float),
        "seed": ("seed", int),
        "n": (None, int),
        "amp_lo": (None, float),
        "amp_hi": (None, float),
    }
    kwargs = {"duration": 2.0, "sample_rate": 2000.0}
    extra = {"n": 1, "amp_lo": None, "amp_hi": None}
    for key, value in kv.items():
        if key not in keymap:
            raise _UsageError(f"unknown synth key {key!r}")
        field, cast = keymap[key]
        if field is None:
            extra[key] = cast(value)
        else:
            kwargs[field] = cast(value)
    return kind, kwargs, extra


def _cmd_analyze(args) -> int:
    pipeline = AnalysisPipeline(
        band=_parse_band(args.band), order=args.order, window=args.window
    )
    if args.synth and args.input:
        raise _UsageError("give either --input or --synth, not both")
    if args.synth:
        kind, kwargs, extra = _synth_from_spec(_parse_kv(args.synth, "--synth"))
        if extra["n"] > 1:
            # corpus generation mode: one CSV per trial, amplitudes drawn
            # uniformly from [amp_lo, amp_hi]
            if not args.out_dir:
                raise _UsageError("--synth with n>1 needs --out-dir")
            out_dir = Path(args.out_dir)
            out_dir.mkdir(parents=True, exist_ok=True)
            rng = np.random.default_rng(kwargs.get("seed", 0))
            base_amp = kwargs.get("amplitude", 1.0)
            lo = extra["amp_lo"] if extra["amp_lo"] is not None else base_amp
            hi = extra["amp_hi"] if extra["amp_hi"] is not None else base_amp
            for i in range(extra["n"]):
                trial_kwargs = dict(kwargs)
                trial_kwargs["amplitude"] = float(rng.uniform(lo, hi))
                trial_kwargs["seed"] = int(rng.integers(0, 2**31))
                record = synthesize(kind, **trial_kwargs)
                path = out_dir / f"{kind}-{i:02d}.csv"
                waveform_to_csv(record, path)
                print(path)
            return 0
        record = synthesize(kind, **kwargs)
        if args.save_input:
            waveform_to_csv(record, args.save_input)
    else:
        if not args.input:
            raise _UsageError("--input is required (or --synth)")
        record = load_waveform(args.input)
    if record.channel_count > 1 or args.channel is not None:
        selector = args.channel if args.channel is not None else "magnitude"
        if selector != "magnitude":
            selector = int(selector)
        record = select_channel(record, selector)
    analysis = analyze_waveform(record, pipeline)
    spectrum = analysis.spectrum
    if args.out:
        lines = ["freq_hz,amplitude_g"]
        lines += [
            f"{f!r},{a!r}"
            for f, a in zip(spectrum.frequencies.tolist(), spectrum.amplitudes.tolist())
        ]
        Path(args.out).write_text("\n".join(lines) + "\n")
    print(
        f"peak_hz={_fmt(spectrum.peak_frequency)} "
        f"peak_amp={_fmt(spectrum.peak_amplitude)} rms={_fmt(analysis.rms)}"
    )
    return 0


def _load_group(pattern: str, name: str):
    paths = sorted(glob.glob(pattern))
    if len(paths) < 2:
        raise _UsageError(f"{name} matched {len(paths)} file(s); need at least 2")
    return [load_waveform(p) for p in paths]


def _report_line(report) -> str:
    return (
        f"{report.label}: n={report.n_trials} "
        f"cv_peak_amplitude={_fmt(report.cv_peak_amplitude)} "
        f"cv_rms={_fmt(report.cv_rms)} "
        f"peak_freq_spread_hz={_fmt(report.peak_frequency_spread)}"
    )


def _cmd_compare(args) -> int:
    pipeline = AnalysisPipeline(
        band=_parse_band(args.band), order=args.order, window=args.window
    )
    report_a = consistency_report(
        _load_group(args.group_a, "--group-a"), pipeline, label=args.label_a
    )
    report_b = consistency_report(
        _load_group(args.group_b, "--group-b"), pipeline, label=args.label_b
    )
    summary = compare_instruments(report_a, report_b)
    print(_report_line(report_a))
    print(_report_line(report_b))
    print(f"verdict={summary.verdict} cv_ratio={_fmt(summary.cv_peak_amplitude_ratio)}")
    return 0


def _cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app

    ui_dir = args.ui_dir
    if ui_dir is None:
        candidate = Path("frontend") / "dist"
        if candidate.is_dir():
            ui_dir = candidate
    app = create_app(
        data_dir=args.data_dir or _data_dir(),
        test_clock=args.test_clock,
        ui_dir=ui_dir,
    )
    uvicorn.run(app, host=args.host, port=args.port, log_level="info")
    return 0


def _cmd_export(args) -> int:
    doc = json.loads(Path(args.result).read_text())
    from .store import result_from_doc

    csv_text = export_trials_csv(result_from_doc(doc["result"]))
    if args.out:
        Path(args.out).write_text(csv_text)
    else:
        sys.stdout.write(csv_text)
    return 0


def _cmd_replay(args) -> int:
    events = read_events(args.log)
    result = replay_log(events)
    print(_threshold_line(result))
    stored_path = Path(args.log).with_suffix("").with_suffix(".result.json")
    if stored_path.exists():
        stored = json.loads(stored_path.read_text())["result"]
        diffs = doc_diffs(stored, result_to_doc(result))
        if diffs:
            print("replayed result diverges from stored document:", file=sys.stderr)
            for diff in diffs:
                print(f"  {diff}", file=sys.stderr)
            return 2
        print(f"replay=ok stored={stored_path}")
    else:
        print("replay=ok")
    return 0


# -- parser ------------------------------------------------------------------


def _build_parser() -> _Parser:
    parser = _Parser(
        prog="vstkit",
        description="Vibration sensitivity testing toolkit: staircase "
        "simulation, waveform analysis and a live session service.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="run one simulated staircase session")
    sim.add_argument(
        "--observer",
        required=True,
        help="observer spec, e.g. mu=0.348,sigma=0.02,guess=0.02,lapse=0.02 "
        "(keys: mu, sigma, guess, lapse, latency_mean, latency_jitter)",
    )
    sim.add_argument(
        "--config",
        help="staircase overrides, e.g. start=0.5,step=0.05,reversals=8 "
        "(any StaircaseConfig field name; aliases start/step/reversals/deadline)",
    )
    sim.add_argument("--seed", type=int, default=0, help="session seed (default 0)")
    sim.add_argument(
        "--out",
        help="output prefix; writes <out>.result.json, <out>.trials.csv and "
        "<out>.jsonl (default <data-dir>/sim-<seed>)",
    )
    sim.set_defaults(func=_cmd_simulate)

    batch = sub.add_parser("batch", help="run repeated sessions and report spread")
    batch.add_argument("--n", type=int, default=10, help="number of sessions, >= 2 (default 10)")
    batch.add_argument("--observer", required=True, help="observer spec (see simulate)")
    batch.add_argument("--config", help="staircase overrides (see simulate)")
    batch.add_argument("--seed", type=int, default=0, help="base seed; session i uses seed^i (default 0)")
    batch.set_defaults(func=_cmd_batch)

    analyze = sub.add_parser("analyze", help="spectral analysis of one waveform CSV")
    analyze.add_argument("--input", help="t,ax[,ay,az] CSV file")
    analyze.add_argument("--band", default="50,500", help="analysis band low,high Hz (default 50,500)")
    analyze.add_argument(
        "--order", type=int, default=4, choices=SUPPORTED_ORDERS,
        help="band-pass prototype order (default 4)",
    )
    analyze.add_argument("--window", default="hann", choices=WINDOWS, help="FFT window (default hann)")
    analyze.add_argument("--channel", help="axis index or 'magnitude' (default: magnitude for 3-axis input)")
    analyze.add_argument("--out", help="write the spectrum as freq_hz,amplitude_g CSV")
    analyze.add_argument("--synth", help=argparse.SUPPRESS)  # developer: synthesize input
    analyze.add_argument("--save-input", help=argparse.SUPPRESS)
    analyze.add_argument("--out-dir", help=argparse.SUPPRESS)  # developer: corpus target
    analyze.set_defaults(func=_cmd_analyze)

    compare = sub.add_parser("compare", help="compare vibration consistency of two instruments")
    compare.add_argument("--group-a", required=True, help="glob of >=2 waveform CSVs")
    compare.add_argument("--group-b", required=True, help="glob of >=2 waveform CSVs")
    compare.add_argument("--band", default="50,500", help="analysis band low,high Hz (default 50,500)")
    compare.add_argument(
        "--order", type=int, default=4, choices=SUPPORTED_ORDERS,
        help="band-pass prototype order (default 4)",
    )
    compare.add_argument("--window", default="hann", choices=WINDOWS, help="FFT window (default hann)")
    compare.add_argument("--label-a", default="group-a", help="label for group A (default group-a)")
    compare.add_argument("--label-b", default="group-b", help="label for group B (default group-b)")
    compare.set_defaults(func=_cmd_compare)

    serve = sub.add_parser("serve", help="run the live session HTTP service")
    serve.add_argument("--host", default="127.0.0.1", help="bind address (default 127.0.0.1)")
    serve.add_argument("--port", type=int, default=8000, help="port (default 8000)")
    serve.add_argument("--data-dir", help="session storage directory (default $VSTKIT_DATA_DIR or ./vstkit-data)")
    serve.add_argument(
        "--test-clock", action="store_true",
        help="simulated time driven via POST /v1/test/clock (for scripted tests)",
    )
    serve.add_argument("--ui-dir", help="static browser client directory to serve at /ui (default frontend/dist if present)")
    serve.set_defaults(func=_cmd_serve)

    export = sub.add_parser("export", help="export a result document as a trials CSV")
    export.add_argument("--result", required=True, help="path to a .result.json document")
    export.add_argument("--out", help="CSV output path (default stdout)")
    export.set_defaults(func=_cmd_export)

    replay = sub.add_parser("replay", help="re-derive a session result from its event log")
    replay.add_argument("--log", required=True, help="path to a sessions/<id>.jsonl event log")
    replay.set_defaults(func=_cmd_replay)

    return parser


def main(argv: Optional[list[str]] = None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    try:
        return args.func(args)
    except _UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except _RUNTIME_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
