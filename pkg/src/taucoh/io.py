"""Dataset files, stream framing, and the result report.

Formats:

* Dataset CSV: UTF-8, comma-separated, header ``t,bus_1,...,bus_N``, one
  row per frame, seconds and Hz as decimal literals. Floats are written
  with shortest round-trip formatting, so write-then-read is lossless.
* Metadata sidecar ``<dataset>.meta.json``: nominal and sample rate, the
  event time when known, the generator scenario echo, and the model ground
  truth for generated data.
* Line-delimited JSON stream framing: one object per line with keys ``t``
  (seconds) and ``f`` (array of per-bus Hz).
* Result report: a single JSON document; ``report_payload`` is the
  deterministic part (byte-identical across reruns on identical input),
  metadata like the wall-clock timestamp and ingestion counters live next
  to it and are excluded from equivalence comparisons.
"""

from __future__ import annotations

import io as _io
import json
import math
from dataclasses import asdict
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .engine import CoherencyResult
from .errors import DataFormatError
from .siggen import GroundTruth, ScenarioConfig
from .tda import MeasurementFrame


def _fmt(x: float) -> str:
    return repr(float(x))


# -- dataset CSV -----------------------------------------------------------

def write_dataset_csv(path, times, values, labels=None) -> None:
    """Write frames to CSV. ``labels`` defaults to 1-based bus numbers."""
    values = np.asarray(values)
    n = values.shape[1]
    if labels is None:
        labels = [str(i + 1) for i in range(n)]
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("t," + ",".join(f"bus_{lab}" for lab in labels) + "\n")
        for t, row in zip(times, values):
            fh.write(_fmt(t) + "," + ",".join(_fmt(v) for v in row) + "\n")


def read_dataset_csv(path):
    """Parse a dataset CSV strictly.

    Returns (times, values, labels). Raises DataFormatError with a 1-based
    line number on a malformed header, ragged row, unparseable or
    non-finite value, or non-increasing timestamp.
    """
    with open(path, "r", encoding="utf-8") as fh:
        return _read_dataset(fh, str(path))


def _read_dataset(fh, source):
    header = fh.readline()
    if not header:
        raise DataFormatError(f"{source}: empty file", line=1)
    cols = header.rstrip("\n").split(",")
    if cols[0] != "t" or len(cols) < 3 or not all(
        c.startswith("bus_") for c in cols[1:]
    ):
        raise DataFormatError(
            f"{source}: header must be t,bus_<id>,... with at least 2 buses",
            line=1,
        )
    labels = [c[len("bus_"):] for c in cols[1:]]
    times, rows = [], []
    prev_t = None
    for lineno, line in enumerate(fh, start=2):
        line = line.strip()
        if not line:
            continue
        parts = line.split(",")
        if len(parts) != len(cols):
            raise DataFormatError(
                f"{source}: expected {len(cols)} fields, got {len(parts)}",
                line=lineno,
            )
        try:
            vals = [float(p) for p in parts]
        except ValueError as exc:
            raise DataFormatError(f"{source}: {exc}", line=lineno) from None
        if not all(math.isfinite(v) for v in vals):
            raise DataFormatError(f"{source}: non-finite value", line=lineno)
        if prev_t is not None and vals[0] <= prev_t:
            raise DataFormatError(
                f"{source}: timestamp {vals[0]!r} does not increase past {prev_t!r}",
                line=lineno,
            )
        prev_t = vals[0]
        times.append(vals[0])
        rows.append(vals[1:])
    if not rows:
        raise DataFormatError(f"{source}: no data rows", line=2)
    return np.array(times), np.array(rows), labels


# -- metadata sidecar --------------------------------------------------------

def sidecar_path(dataset_path) -> Path:
    return Path(str(dataset_path) + ".meta.json")


def write_sidecar(dataset_path, config: ScenarioConfig, truth: GroundTruth) -> None:
    doc = {
        "nominal_hz": config.nominal_hz,
        "sample_rate_hz": config.sample_rate_hz,
        "event_time_s": config.event_time_s,
        "seed": config.seed,
        "scenario": _scenario_doc(config),
        "ground_truth": {
            # 1-based labels, matching the CSV header
            "groups": [[b + 1 for b in g] for g in truth.groups],
            "center_buses": [b + 1 for b in truth.centers],
            "slow_mode_freq_hz": truth.slow_mode_freq_hz,
        },
    }
    with open(sidecar_path(dataset_path), "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _scenario_doc(config: ScenarioConfig) -> dict:
    doc = asdict(config)
    doc["trend"] = [float(v) for v in config.trend]
    doc["modes"] = [
        {
            "freq_hz": m.freq_hz,
            "damping_ratio": m.damping_ratio,
            "phase": m.phase,
            "shape": [float(v) for v in m.shape],
        }
        for m in config.modes
    ]
    return doc


def read_sidecar(dataset_path) -> dict | None:
    path = sidecar_path(dataset_path)
    if not path.exists():
        return None
    with open(path, "r", encoding="utf-8") as fh:
        return json.load(fh)


# -- stream framing ----------------------------------------------------------

def frame_to_json_line(t: float, values) -> str:
    return json.dumps(
        {"t": float(t), "f": [float(v) for v in values]},
        separators=(",", ":"),
    )


def parse_json_frame(line: str):
    """Parse one stream line into (t, values). Raises DataFormatError."""
    try:
        doc = json.loads(line)
    except json.JSONDecodeError as exc:
        raise DataFormatError(f"bad JSON: {exc}") from None
    if not isinstance(doc, dict) or "t" not in doc or "f" not in doc:
        raise DataFormatError("frame object needs keys 't' and 'f'")
    t = doc["t"]
    f = doc["f"]
    if not isinstance(t, (int, float)) or isinstance(t, bool):
        raise DataFormatError("'t' must be a number")
    if not isinstance(f, list) or len(f) < 2 or not all(
        isinstance(v, (int, float)) and not isinstance(v, bool) for v in f
    ):
        raise DataFormatError("'f' must be a list of at least 2 numbers")
    return float(t), np.array(f, dtype=np.float64)


def frames_from_arrays(times, values, nominal: float):
    for t, row in zip(times, values):
        yield MeasurementFrame(timestamp=float(t), values=row, nominal=nominal)


# -- result report -----------------------------------------------------------

def report_payload(
    result: CoherencyResult,
    labels: list[str],
    config_echo: dict,
) -> dict:
    """Deterministic part of the report.

    ``labels`` maps channel index to the external bus label. Reruns on the
    same data and configuration serialize byte-identically.
    """
    def lab(idx: int) -> str:
        return labels[idx]

    return {
        "tool": {"name": "taucoh", "version": __version__},
        "converged": result.converged,
        "status": result.status,
        "degenerate": result.degenerate,
        "groups": [
            [lab(b) for b in c.members] for c in result.groups.clusters
        ],
        "center_buses": [lab(b) for b in result.center_buses],
        "window_length_s": result.window_length_s,
        "window_samples": result.window_samples,
        "window_from_event_s": result.window_from_event_s,
        "event_time_s": result.disturbance_offset_s,
        "sample_rate_hz": result.sample_rate_hz,
        "group_delay_s": result.group_delay_s,
        "clusters": [
            {
                "seed_bus": lab(c.seed_bus),
                "members": [lab(b) for b in c.members],
                "peak_tau": c.peak_tau,
                "spread_sigma": c.spread_sigma,
                "tau_variance": c.tau_variance,
            }
            for c in result.groups.clusters
        ],
        "trace": {
            "k": list(result.trace.k),
            "t_s": list(result.trace.t_s),
            "tau": [[float(v) for v in row] for row in result.trace.tau],
            "n_clusters": list(result.trace.n_clusters),
            "cluster_variances": [
                [[lab(seed), float(var)] for seed, var in row]
                for row in result.trace.cluster_variances
            ],
        },
        "config": config_echo,
    }


def full_report(payload: dict, ingestion: dict) -> dict:
    doc = dict(payload)
    doc["ingestion"] = ingestion
    doc["generated_at"] = datetime.now(timezone.utc).isoformat()
    return doc


def dump_report(doc: dict) -> str:
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def load_report(text: str) -> dict:
    return json.loads(text)


def dataset_to_json_lines(path) -> str:
    """Convert a dataset CSV to stream framing (for piping into a socket)."""
    times, values, _ = read_dataset_csv(path)
    buf = _io.StringIO()
    for t, row in zip(times, values):
        buf.write(frame_to_json_line(t, row) + "\n")
    return buf.getvalue()
