"""Command-line surface composing the library into complete workflows:
generate scene -> filter -> windowed RMS -> detect, plus WAV/frame ingest,
spectrum export and the capture-link budget.

Exit codes: 0 success, 1 I/O or format error, 2 argument error, 4 when
``detect --fail-on-leak`` finds an event.
"""

from __future__ import annotations

import argparse
import contextlib
import sys

import numpy as np

from . import detector, dsp, stream_io, synth

DEFAULT_FS = 62500.0
DEFAULT_CUTOFF = 20000.0
DEFAULT_WINDOW_MS = 200.0


def _positive(text: str) -> float:
    value = float(text)
    if value <= 0:
        raise argparse.ArgumentTypeError(f"must be positive, got {text}")
    return value


def _positive_int(text: str) -> int:
    value = int(text)
    if value <= 0:
        raise argparse.ArgumentTypeError(f"must be positive, got {text}")
    return value


@contextlib.contextmanager
def _open_in(path: str, binary: bool = True):
    if path == "-":
        yield sys.stdin.buffer if binary else sys.stdin
    else:
        with open(path, "rb" if binary else "r") as handle:
            yield handle


@contextlib.contextmanager
def _open_out(path: str, binary: bool = True):
    if path == "-":
        stream = sys.stdout.buffer if binary else sys.stdout
        yield stream
        stream.flush()
    else:
        with open(path, "wb" if binary else "w", newline="" if not binary else None) as handle:
            yield handle


def _parse_phases(text: str, args) -> list:
    phases = []
    for item in text.split(","):
        label, _, dur = item.partition(":")
        duration = float(dur)
        if label == "silence":
            phases.append(synth.ScenePhase("silence", duration))
        elif label == "noise":
            phases.append(synth.ScenePhase("noise", duration, noise_amplitude=args.noise_amp))
        elif label == "leak":
            phases.append(
                synth.ScenePhase(
                    "noise_plus_leak",
                    duration,
                    noise_amplitude=args.noise_amp,
                    leak_amplitude=args.leak_amp,
                    leak_freq_hz=args.leak_freq,
                )
            )
        else:
            raise ValueError(f"unknown phase {label!r}, expected silence/noise/leak")
    return phases


def _cmd_synth(args) -> int:
    scene = synth.Scene(
        phases=_parse_phases(args.phases, args),
        sample_rate_hz=args.fs,
        seed=args.seed,
        floor_amplitude=args.floor_amp,
        noise_cutoff_hz=args.noise_cutoff,
        noise_poles=args.poles,
    )
    buffer, annotations = synth.compose_scene(scene)
    with _open_out(args.output) as sink:
        stream_io.wav_write(buffer, sink)
    for label, t0, t1 in annotations:
        print(f"{label}\t{t0:.6f}\t{t1:.6f}", file=sys.stderr)
    return 0


def _cmd_filter(args) -> int:
    with _open_in(args.input) as source:
        buffer = stream_io.wav_read(source)
    design = dsp.design_highpass(args.cutoff, buffer.sample_rate_hz)
    _, filtered = dsp.highpass_buffer(design, dsp.FilterState(), buffer)
    with _open_out(args.output) as sink:
        stream_io.wav_write(filtered, sink)
    return 0


def _cmd_rms(args) -> int:
    with _open_in(args.input) as source:
        buffer = stream_io.wav_read(source)
    design = None if args.unfiltered else dsp.design_highpass(args.cutoff, buffer.sample_rate_hz)
    reports = dsp.windowed_rms(design, buffer, args.window_ms)
    with _open_out(args.output, binary=False) as sink:
        stream_io.csv_export(reports, sink)
    return 0


def _cmd_detect(args) -> int:
    with _open_in(args.input, binary=False) as source:
        reports = stream_io.csv_import(source)
    config = detector.DetectorConfig(
        baseline_windows=args.baseline_windows,
        trigger_factor=args.trigger,
        release_factor=args.release,
        min_trigger_windows=args.min_windows,
    )
    events = detector.detect(reports, config)
    with _open_out(args.output, binary=False) as sink:
        sink.write("t_start_s,t_end_s,peak_rms,mean_rms\n")
        for e in events:
            sink.write(f"{e.t_start_s:.6f},{e.t_end_s:.6f},{e.peak_rms:.6f},{e.mean_rms:.6f}\n")
    if args.fail_on_leak and events:
        return 4
    return 0


def _cmd_spectrum(args) -> int:
    with _open_in(args.input) as source:
        buffer = stream_io.wav_read(source)
    n = args.n if args.n is not None else len(buffer)
    rows = dsp.spectrum(buffer, n)
    with _open_out(args.output, binary=False) as sink:
        sink.write("freq_hz,magnitude\n")
        for freq, mag in rows:
            sink.write(f"{freq:.6f},{mag:.6f}\n")
    return 0


def _cmd_budget(args) -> int:
    framing = stream_io.SerialFraming.parse(args.framing)
    budget = stream_io.link_budget(args.fs, args.bits, args.baud, framing)
    print(f"capture_rate_Bps={budget.capture_rate_Bps:.3f}")
    print(f"link_rate_Bps={budget.link_rate_Bps:.3f}")
    print(f"duty_cycle={budget.duty_cycle:.5f}")
    print(f"lossless_continuous={str(budget.lossless_continuous).lower()}")
    return 0


def _cmd_ingest(args) -> int:
    with _open_in(args.input) as source:
        data = source.read()
    if args.raw:
        samples = np.frombuffer(data[: len(data) - (len(data) % 2)], dtype="<i2")
    else:
        chunks = []
        for event in stream_io.frame_decode_stream(data):
            if isinstance(event, stream_io.GapReport):
                print(
                    f"gap: {event.missing} frame(s) missing between seq "
                    f"{event.after_seq} and {event.next_seq}",
                    file=sys.stderr,
                )
            else:
                chunks.append(event.samples)
        samples = np.concatenate(chunks) if chunks else np.empty(0, dtype=np.int16)
    buffer = dsp.SampleBuffer(samples.astype(np.float64), args.fs)
    with _open_out(args.output) as sink:
        stream_io.wav_write(buffer, sink)
    return 0


def _cmd_wav2csv(args) -> int:
    with _open_in(args.input) as source:
        buffer = stream_io.wav_read(source)
    fs = buffer.sample_rate_hz
    with _open_out(args.output, binary=False) as sink:
        sink.write("t_s,sample\n")
        for i, value in enumerate(buffer.samples):
            sink.write(f"{i / fs:.6f},{value:.0f}\n")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ultraleak", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic scene WAV")
    p.add_argument("--phases", default="silence:2,noise:3,leak:3",
                   help="comma list of label:duration_s (silence/noise/leak)")
    p.add_argument("--fs", type=_positive, default=DEFAULT_FS)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--noise-amp", type=float, default=2000.0)
    p.add_argument("--leak-amp", type=float, default=400.0)
    p.add_argument("--leak-freq", type=_positive, default=26000.0)
    p.add_argument("--noise-cutoff", type=_positive, default=1000.0)
    p.add_argument("--poles", type=_positive_int, default=6)
    p.add_argument("--floor-amp", type=float, default=40.0)
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=_cmd_synth)

    p = sub.add_parser("filter", help="high-pass filter a WAV")
    p.add_argument("-i", "--input", required=True)
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--cutoff", type=_positive, default=DEFAULT_CUTOFF)
    p.set_defaults(func=_cmd_filter)

    p = sub.add_parser("rms", help="windowed RMS of a WAV to CSV")
    p.add_argument("-i", "--input", required=True)
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--cutoff", type=_positive, default=DEFAULT_CUTOFF)
    p.add_argument("--window-ms", type=_positive, default=DEFAULT_WINDOW_MS)
    p.add_argument("--unfiltered", action="store_true", help="skip the high-pass filter")
    p.set_defaults(func=_cmd_rms)

    p = sub.add_parser("detect", help="extract leak events from an RMS CSV")
    p.add_argument("-i", "--input", required=True)
    p.add_argument("-o", "--output", default="-")
    p.add_argument("--baseline-windows", type=_positive_int, default=10)
    p.add_argument("--trigger", type=_positive, default=3.0)
    p.add_argument("--release", type=_positive, default=2.0)
    p.add_argument("--min-windows", type=_positive_int, default=2)
    p.add_argument("--fail-on-leak", action="store_true",
                   help="exit with code 4 when any event is found")
    p.set_defaults(func=_cmd_detect)

    p = sub.add_parser("spectrum", help="DFT magnitude spectrum of a WAV to CSV")
    p.add_argument("-i", "--input", required=True)
    p.add_argument("-o", "--output", required=True)
    p.add_argument("-n", type=_positive_int, default=None,
                   help="transform length (default: whole buffer)")
    p.set_defaults(func=_cmd_spectrum)

    p = sub.add_parser("budget", help="capture vs. serial link budget")
    p.add_argument("--fs", type=_positive, default=DEFAULT_FS)
    p.add_argument("--bits", type=_positive_int, default=16)
    p.add_argument("--baud", type=_positive, default=921600.0)
    p.add_argument("--framing", default="8N1")
    p.set_defaults(func=_cmd_budget)

    p = sub.add_parser("ingest", help="framed (or raw LE i16) byte stream to WAV")
    p.add_argument("-i", "--input", required=True)
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--fs", type=_positive, default=DEFAULT_FS)
    p.add_argument("--raw", action="store_true", help="headerless little-endian i16 stream")
    p.set_defaults(func=_cmd_ingest)

    p = sub.add_parser("wav2csv", help="WAV samples to t_s,sample CSV")
    p.add_argument("-i", "--input", required=True)
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=_cmd_wav2csv)

    return parser


def run(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (OSError, ValueError) as exc:
        print(f"ultraleak: error: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
