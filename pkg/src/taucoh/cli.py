"""Command-line interface.

Subcommands:

* ``generate``: synthesize a dataset (preset or custom) plus its metadata
  sidecar with the model ground truth.
* ``analyze``: run the engine over a dataset file as a simulated stream and
  print the result report. Exit status 0 when the window converged, 2 when
  it aborted (bound reached or data exhausted), 1 on usage or data errors.
* ``stream``: consume line-delimited JSON frames from stdin or one TCP
  connection, print a status line per frame to stderr, and emit the report
  on stdout when the window settles or the stream ends.
* ``bench``: compare per-frame throughput of the kernel backends.

Exit codes are shared by all subcommands: 1 for usage and data problems so
scripts can distinguish an unusable invocation from a non-converged run.
"""

from __future__ import annotations

import argparse
import json
import logging
import socket
import sys

import numpy as np

from . import __version__, _backend, io as tio
from .engine import (
    STATUS_ABORTED,
    STATUS_CONVERGED,
    ConvergenceConfig,
    CoherencyEngine,
)
from .errors import (
    DataFormatError,
    InputQualityError,
    InsufficientDataError,
    StreamShapeError,
    TaucohError,
)
from .preprocess import PreprocessConfig
from .siggen import PRESETS, ModeSpec, ScenarioConfig, generate
from .tda import MeasurementFrame

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_NOT_CONVERGED = 2


def _engine_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--nominal-freq", type=float, default=None,
                        help="nominal system frequency in Hz (default 60, or "
                             "the dataset sidecar value when one exists)")
    parser.add_argument("--lambda", dest="lambda_s", type=float, default=0.5,
                        help="stability assertion horizon in seconds (default 0.5)")
    parser.add_argument("--var-tol", type=float, default=1e-2,
                        help="relative typicality-variance tolerance (default 0.01)")
    parser.add_argument("--median-window", type=int, default=5,
                        help="moving-median length in samples, odd (default 5)")
    parser.add_argument("--detrend-window", type=float, default=1.0,
                        help="half-width of the detrending average in seconds "
                             "(default 1.0)")
    parser.add_argument("--event-time", type=float, default=None,
                        help="disturbance time on the stream clock, for "
                             "window-from-event reporting")
    parser.add_argument("--max-window", type=float, default=30.0,
                        help="abort bound on the window length in seconds "
                             "(default 30)")
    parser.add_argument("--backend", choices=["compiled", "python"], default=None,
                        help="kernel backend override")
    parser.add_argument("-o", "--output", default=None,
                        help="write the report here instead of stdout")


def _build_engine(args) -> CoherencyEngine:
    pre = PreprocessConfig(
        nominal_hz=args.nominal_freq,
        median_window=args.median_window,
        detrend_window=args.detrend_window,
    )
    conv = ConvergenceConfig(
        lambda_s=args.lambda_s,
        var_rel_tol=args.var_tol,
        max_window_s=args.max_window,
    )
    return CoherencyEngine(
        preprocess=pre,
        convergence=conv,
        disturbance_offset_s=args.event_time,
        backend=_backend.load(args.backend),
    )


def _config_echo(args) -> dict:
    return {
        "nominal_hz": args.nominal_freq,
        "lambda_s": args.lambda_s,
        "var_rel_tol": args.var_tol,
        "median_window": args.median_window,
        "detrend_window_s": args.detrend_window,
        "event_time_s": args.event_time,
        "max_window_s": args.max_window,
        "backend": _backend.load(args.backend).BACKEND_NAME,
    }


def _emit_report(args, doc: dict) -> None:
    text = tio.dump_report(doc)
    if args.output:
        with open(args.output, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _exit_for(result) -> int:
    return EXIT_OK if result.converged else EXIT_NOT_CONVERGED


# -- generate ----------------------------------------------------------------

def _add_generate(sub) -> None:
    p = sub.add_parser("generate", help="synthesize a dataset with ground truth")
    p.add_argument("--preset", choices=sorted(PRESETS), default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--n-buses", type=int, default=4)
    p.add_argument("--duration", type=float, default=10.0)
    p.add_argument("--sample-rate", type=float, default=60.0)
    p.add_argument("--nominal-freq", type=float, default=60.0)
    p.add_argument("--event-time", type=float, default=1.0)
    p.add_argument("--noise-std", type=float, default=1e-3)
    p.add_argument("--modes", type=int, default=1,
                   help="number of seeded random modes for custom scenarios")
    p.add_argument("-o", "--output", required=True, help="dataset CSV path")
    p.set_defaults(func=cmd_generate)


def _random_scenario(args) -> ScenarioConfig:
    rng = np.random.default_rng(args.seed)
    modes = []
    for i in range(args.modes):
        freq = 0.3 + 1.2 * (i / max(1, args.modes - 1)) if args.modes > 1 else 0.545
        shape = rng.uniform(0.02, 0.08, args.n_buses)
        shape *= rng.choice([-1.0, 1.0], args.n_buses)
        modes.append(ModeSpec(freq_hz=freq, damping_ratio=0.05, shape=shape,
                              phase=float(rng.uniform(0, 2 * np.pi))))
    return ScenarioConfig(
        n_buses=args.n_buses,
        nominal_hz=args.nominal_freq,
        duration_s=args.duration,
        event_time_s=args.event_time,
        sample_rate_hz=args.sample_rate,
        modes=tuple(modes),
        noise_std_hz=args.noise_std,
        seed=args.seed,
    )


def cmd_generate(args) -> int:
    if args.preset is not None:
        config = PRESETS[args.preset](seed=args.seed)
    else:
        config = _random_scenario(args)
    times, values, truth = generate(config)
    tio.write_dataset_csv(args.output, times, values)
    tio.write_sidecar(args.output, config, truth)
    print(
        f"wrote {values.shape[0]} frames x {values.shape[1]} buses to "
        f"{args.output} (+ sidecar)",
        file=sys.stderr,
    )
    return EXIT_OK


# -- analyze -----------------------------------------------------------------

def _add_analyze(sub) -> None:
    p = sub.add_parser("analyze", help="find the minimal stable window in a file")
    p.add_argument("dataset", help="dataset CSV path")
    _engine_flags(p)
    p.set_defaults(func=cmd_analyze)


def cmd_analyze(args) -> int:
    sidecar = tio.read_sidecar(args.dataset)
    if sidecar is not None:
        if args.nominal_freq is None and sidecar.get("nominal_hz") is not None:
            args.nominal_freq = float(sidecar["nominal_hz"])
        if args.event_time is None and sidecar.get("event_time_s") is not None:
            args.event_time = float(sidecar["event_time_s"])
    if args.nominal_freq is None:
        args.nominal_freq = 60.0
    times, values, labels = tio.read_dataset_csv(args.dataset)
    engine = _build_engine(args)
    for frame in tio.frames_from_arrays(times, values, args.nominal_freq):
        engine.step(frame)
        if engine.status in (STATUS_CONVERGED, STATUS_ABORTED):
            break
    result = engine.result()
    payload = tio.report_payload(result, labels, _config_echo(args))
    ingestion = {
        "source": str(args.dataset),
        "transport": "file",
        "frames_read": engine.frames_in,
        "frames_skipped": 0,
    }
    _emit_report(args, tio.full_report(payload, ingestion))
    return _exit_for(result)


# -- stream ------------------------------------------------------------------

def _add_stream(sub) -> None:
    p = sub.add_parser("stream", help="analyze a live frame stream")
    p.add_argument("--listen", type=int, default=None, metavar="PORT",
                   help="accept one TCP connection instead of reading stdin")
    _engine_flags(p)
    p.set_defaults(func=cmd_stream)


def _stream_lines(args):
    if args.listen is None:
        yield from sys.stdin
        return
    with socket.create_server(("127.0.0.1", args.listen)) as server:
        print(f"listening on 127.0.0.1:{args.listen}", file=sys.stderr)
        conn, peer = server.accept()
        print(f"connection from {peer[0]}:{peer[1]}", file=sys.stderr)
        with conn, conn.makefile("r", encoding="utf-8") as fh:
            yield from fh


def cmd_stream(args) -> int:
    if args.nominal_freq is None:
        args.nominal_freq = 60.0
    engine = _build_engine(args)
    skipped = 0
    for lineno, line in enumerate(_stream_lines(args), start=1):
        if not line.strip():
            continue
        try:
            t, values = tio.parse_json_frame(line)
            frame = MeasurementFrame(
                timestamp=t, values=values, nominal=args.nominal_freq
            )
        except (DataFormatError, StreamShapeError) as exc:
            skipped += 1
            print(f"skipping line {lineno}: {exc}", file=sys.stderr)
            continue
        try:
            engine.step(frame)
        except (InputQualityError, DataFormatError) as exc:
            skipped += 1
            engine.frames_rejected += 1
            print(f"rejecting frame at line {lineno}: {exc}", file=sys.stderr)
            continue
        drift = "n/a" if engine.last_drift is None else f"{engine.last_drift:.3e}"
        n_clusters = len(engine._latest.clusters) if engine._latest else 0
        print(
            f"K={engine.K} t={t:.3f} clusters={n_clusters} var_drift={drift}",
            file=sys.stderr,
        )
        if engine.status in (STATUS_CONVERGED, STATUS_ABORTED):
            break
    result = engine.result()
    labels = [str(i + 1) for i in range(engine.n_buses)]
    payload = tio.report_payload(result, labels, _config_echo(args))
    ingestion = {
        "source": "tcp" if args.listen is not None else "stdin",
        "transport": "stream",
        "frames_read": engine.frames_in,
        "frames_skipped": skipped,
    }
    _emit_report(args, tio.full_report(payload, ingestion))
    return _exit_for(result)


# -- bench -------------------------------------------------------------------

def _add_bench(sub) -> None:
    p = sub.add_parser("bench", help="compare kernel backend throughput")
    p.add_argument("--n-buses", type=int, default=120)
    p.add_argument("--frames", type=int, default=1500)
    p.add_argument("--repeat", type=int, default=3)
    p.set_defaults(func=cmd_bench)


def cmd_bench(args) -> int:
    from .bench import run_benchmark

    rows = run_benchmark(
        n_buses=args.n_buses, n_frames=args.frames, repeat=args.repeat
    )
    width = max(len(r["backend"]) for r in rows)
    print(f"{'backend':<{width}}  frames/s   speedup")
    base = rows[-1]["frames_per_s"]
    for row in rows:
        print(
            f"{row['backend']:<{width}}  {row['frames_per_s']:>8.0f}   "
            f"{row['frames_per_s'] / base:>6.2f}x"
        )
    return EXIT_OK


# -- entry -------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="taucoh",
        description="Streaming coherency identification from bus frequency "
                    "measurements",
    )
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    _add_generate(sub)
    _add_analyze(sub)
    _add_stream(sub)
    _add_bench(sub)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.WARNING,
        format="%(asctime)s %(name)s %(levelname)s %(message)s",
    )
    try:
        return args.func(args)
    except InsufficientDataError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except TaucohError as exc:
        line = getattr(exc, "line", None)
        where = f" (line {line})" if line else ""
        print(f"error{where}: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
