"""Growing-window engine: minimal-window detection over a live stream.

The engine consumes raw measurement frames, conditions them through the
streaming preprocessor, folds each finalized deviation row into the
recursive analytics state, regroups the buses, and tracks per-cluster
typicality variance. The window is anchored at the stream start and grows
one sample per frame; analysis stops at the first window length where the
grouping is demonstrably stable:

* the membership partition is identical at every examined length within
  the trailing assertion horizon (lambda_s seconds, both ends included),
* and every cluster's typicality variance stays within var_rel_tol
  relative to its value at the horizon start.

That first stable length is the reported minimal measurement window. If
the window reaches max_window_s, or the stream ends, without satisfying
the test, the run is flagged non-converged and the last grouping is
reported best-effort.

Single-writer contract: an engine instance is driven by one producer;
everything it hands outward (cluster sets, traces, results) is immutable
or copied.
"""

from __future__ import annotations

import logging
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from . import _backend
from .clustering import ClusterSet, attach_centroids, cluster_snapshot
from .errors import (
    ConfigError,
    DataFormatError,
    InputQualityError,
    InsufficientDataError,
    StreamShapeError,
)
from .preprocess import PreprocessConfig, StreamingPreprocessor
from .tda import MeasurementFrame, StreamingTda, TdaProperties

logger = logging.getLogger(__name__)

# Frame spacing may wobble by this relative amount before being rejected.
SPACING_RTOL = 1e-6
# Relative variance floor: keeps the stability ratio defined at zero variance.
VAR_FLOOR = 1e-12

STATUS_WARMING_UP = "warming-up"
STATUS_RUNNING = "running"
STATUS_CONVERGED = "converged"
STATUS_ABORTED = "aborted"


@dataclass(frozen=True)
class ConvergenceConfig:
    """Stability test knobs.

    lambda_s: trailing assertion horizon in seconds.
    var_rel_tol: allowed relative excursion of each cluster's typicality
        variance across the horizon.
    require_stable_membership: when true (default) the partition must be
        identical across the horizon; when false, clusters are matched
        across window lengths by seed bus and only the variance test runs.
    max_window_s: abort bound on the window length.
    """

    lambda_s: float = 0.5
    var_rel_tol: float = 1e-2
    require_stable_membership: bool = True
    max_window_s: float = 30.0

    def __post_init__(self):
        if not self.lambda_s > 0:
            raise ConfigError("lambda_s must be positive")
        if not self.var_rel_tol > 0:
            raise ConfigError("var_rel_tol must be positive")
        if self.max_window_s <= self.lambda_s:
            raise ConfigError("max_window_s must exceed lambda_s")


@dataclass
class EngineTrace:
    """Per-window-length series kept for reporting and plotting."""

    k: list[int] = field(default_factory=list)
    t_s: list[float] = field(default_factory=list)
    tau: list[np.ndarray] = field(default_factory=list)
    n_clusters: list[int] = field(default_factory=list)
    cluster_variances: list[list[tuple[int, float]]] = field(default_factory=list)


@dataclass(frozen=True, eq=False)
class CoherencyResult:
    """Outcome of a run: the grouping and how it was reached."""

    converged: bool
    status: str
    groups: ClusterSet
    center_buses: tuple[int, ...]
    window_length_s: float
    window_samples: int
    sample_rate_hz: float
    group_delay_s: float
    degenerate: bool
    trace: EngineTrace
    properties: TdaProperties
    frames_in: int
    frames_rejected: int
    backend: str
    disturbance_offset_s: float | None = None

    @property
    def window_from_event_s(self) -> float | None:
        if self.disturbance_offset_s is None:
            return None
        return self.window_length_s - self.disturbance_offset_s


class _History:
    """Ring buffer of (partition, per-cluster variance) snapshots."""

    def __init__(self, span_entries: int):
        self.entries = deque(maxlen=span_entries)

    def append(self, key, variances):
        self.entries.append((key, variances))

    def full(self) -> bool:
        return len(self.entries) == self.entries.maxlen


class CoherencyEngine:
    """Streaming coherency identification over one measurement stream."""

    def __init__(
        self,
        preprocess: PreprocessConfig,
        convergence: ConvergenceConfig = ConvergenceConfig(),
        disturbance_offset_s: float | None = None,
        backend=None,
    ):
        self.preprocess_config = preprocess
        self.convergence_config = convergence
        self.disturbance_offset_s = disturbance_offset_s
        self.kernels = backend if backend is not None else _backend.load()
        self.status = STATUS_WARMING_UP
        self.n_buses: int | None = None
        self.dt: float | None = None
        self.frames_in = 0
        self.frames_rejected = 0
        self.last_drift: float | None = None
        self._first_frame: MeasurementFrame | None = None
        self._last_t: float | None = None
        self._t0: float | None = None
        self._pre: StreamingPreprocessor | None = None
        self._tda: StreamingTda | None = None
        self._history: _History | None = None
        self._latest: ClusterSet | None = None
        self._latest_props: TdaProperties | None = None
        self.trace = EngineTrace()

    # -- frame intake -----------------------------------------------------

    @property
    def K(self) -> int:
        return self._tda.K if self._tda is not None else 0

    @property
    def sample_rate_hz(self) -> float:
        if self.dt is None:
            raise InsufficientDataError("sample spacing not established yet")
        return 1.0 / self.dt

    def step(self, frame: MeasurementFrame) -> ClusterSet | None:
        """Ingest one frame; returns the new grouping if one was emitted.

        Raises without touching any state when the frame is malformed:
        StreamShapeError on a channel-count change, InputQualityError on
        non-finite samples (via the analytics layer), DataFormatError on a
        non-increasing timestamp or spacing drift. A converged or aborted
        engine refuses further frames.
        """
        if self.status in (STATUS_CONVERGED, STATUS_ABORTED):
            raise ConfigError(f"engine is {self.status}; no further frames accepted")
        self._validate(frame)
        if self.dt is None:
            if self._first_frame is None:
                self._first_frame = frame
                self._register(frame)
                return None
            self.dt = frame.timestamp - self._first_frame.timestamp
            self._start_pipeline()
            emitted = self._feed(self._first_frame)
            self._first_frame = None
        else:
            emitted = []
        emitted += self._feed(frame)
        self._register(frame)
        latest = None
        for dev_row in emitted:
            latest = self._advance(dev_row) or latest
            if self.status in (STATUS_CONVERGED, STATUS_ABORTED):
                break
        return latest

    def _validate(self, frame: MeasurementFrame) -> None:
        if self.n_buses is None:
            self.n_buses = frame.values.size
        elif frame.values.size != self.n_buses:
            raise StreamShapeError(
                f"stream width changed from {self.n_buses} to {frame.values.size}"
            )
        if not np.all(np.isfinite(frame.values)):
            bad = int(np.flatnonzero(~np.isfinite(frame.values))[0])
            raise InputQualityError(
                f"non-finite value on channel {bad} at t={frame.timestamp!r}",
                bus=bad,
                k=self.K,
            )
        if self._last_t is not None:
            gap = frame.timestamp - self._last_t
            if gap <= 0:
                raise DataFormatError(
                    f"timestamp not increasing: {frame.timestamp!r} after {self._last_t!r}"
                )
            if self.dt is not None and abs(gap - self.dt) > SPACING_RTOL * self.dt:
                raise DataFormatError(
                    f"frame spacing {gap!r} deviates from established {self.dt!r}"
                )

    def _register(self, frame: MeasurementFrame) -> None:
        if self._t0 is None:
            self._t0 = frame.timestamp
        self._last_t = frame.timestamp
        self.frames_in += 1

    def _start_pipeline(self) -> None:
        fs = 1.0 / self.dt
        self._pre = StreamingPreprocessor(self.n_buses, self.preprocess_config, fs)
        self._tda = StreamingTda(self.n_buses, backend=self.kernels)
        horizon = int(np.ceil(self.convergence_config.lambda_s * fs - 1e-9))
        self._history = _History(span_entries=horizon + 1)

    def _feed(self, frame: MeasurementFrame) -> list[np.ndarray]:
        return self._pre.push(frame.values)

    # -- per-window-length analysis ---------------------------------------

    def _advance(self, dev_row) -> ClusterSet | None:
        self._tda.push(dev_row)
        k = self._tda.K
        if k < self.preprocess_config.warmup_min_samples:
            return None
        if self.status == STATUS_WARMING_UP:
            self.status = STATUS_RUNNING
        props = self._tda.properties()
        snapshot = cluster_snapshot(props.tau, self._tda.d2, k, backend=self.kernels)
        self._latest = snapshot
        self._latest_props = props
        variances = {
            c.members: (c.seed_bus, c.tau_variance) for c in snapshot.clusters
        }
        self._history.append(snapshot.membership_key(), variances)
        self.trace.k.append(k)
        self.trace.t_s.append(self._window_end_s())
        self.trace.tau.append(props.tau.copy())
        self.trace.n_clusters.append(len(snapshot.clusters))
        self.trace.cluster_variances.append(
            [(c.seed_bus, c.tau_variance) for c in snapshot.clusters]
        )
        if self.check_convergence():
            self.status = STATUS_CONVERGED
        elif self.window_length_s() > self.convergence_config.max_window_s:
            logger.warning(
                "window reached %.3f s without stabilizing; aborting",
                self.window_length_s(),
            )
            self.status = STATUS_ABORTED
        return snapshot

    def window_length_s(self) -> float:
        return self.K * self.dt if self.dt is not None else 0.0

    def _window_end_s(self) -> float:
        return self._t0 + self.window_length_s()

    def check_convergence(self) -> bool:
        """Stability of the trailing horizon, per the module docstring."""
        history = self._history
        if history is None or not history.full():
            return False
        entries = list(history.entries)
        by_members = self.convergence_config.require_stable_membership
        ref_key, ref_raw = entries[0]
        if by_members and any(key != ref_key for key, _ in entries[1:]):
            self.last_drift = None
            return False
        ref_vars = self._var_series(ref_raw, by_members)
        worst = 0.0
        for _, raw in entries[1:]:
            variances = self._var_series(raw, by_members)
            for ident, ref in ref_vars.items():
                if ident not in variances:
                    self.last_drift = None
                    return False
                drift = abs(variances[ident] - ref) / max(ref, VAR_FLOOR)
                worst = max(worst, drift)
        self.last_drift = worst
        return worst <= self.convergence_config.var_rel_tol

    @staticmethod
    def _var_series(raw, by_members):
        # raw maps member-tuple -> (seed, variance); clusters are matched
        # across window lengths by member set when membership is pinned,
        # otherwise by their typicality-peak bus
        if by_members:
            return {members: var for members, (_, var) in raw.items()}
        return {seed: var for _, (seed, var) in raw.items()}

    # -- results -----------------------------------------------------------

    def result(self) -> CoherencyResult:
        """Best-effort outcome at the current state.

        Raises InsufficientDataError when warm-up never completed.
        """
        if self._latest is None or self._latest_props is None:
            raise InsufficientDataError(
                "stream ended before the warm-up requirement was met"
            )
        converged = self.status == STATUS_CONVERGED
        status = self.status if converged else STATUS_ABORTED
        groups = attach_centroids(self._latest, self._tda.trajectories)
        centers = tuple(c.seed_bus for c in groups.clusters)
        return CoherencyResult(
            converged=converged,
            status=status,
            groups=groups,
            center_buses=centers,
            window_length_s=self.window_length_s(),
            window_samples=self.K,
            sample_rate_hz=self.sample_rate_hz,
            group_delay_s=self._pre.group_delay_samples * self.dt,
            degenerate=self._latest_props.degenerate,
            trace=self.trace,
            properties=self._latest_props,
            frames_in=self.frames_in,
            frames_rejected=self.frames_rejected,
            backend=self.kernels.BACKEND_NAME,
            disturbance_offset_s=self._relative_event_offset(),
        )

    def _relative_event_offset(self) -> float | None:
        if self.disturbance_offset_s is None:
            return None
        base = self._t0 if self._t0 is not None else 0.0
        return self.disturbance_offset_s - base


def run(
    frames,
    preprocess: PreprocessConfig,
    convergence: ConvergenceConfig = ConvergenceConfig(),
    disturbance_offset_s: float | None = None,
    backend=None,
) -> CoherencyResult:
    """Drive an engine over an iterable of frames until it settles.

    Stops at convergence or abort; a stream that ends first yields a
    non-converged result (or InsufficientDataError if warm-up never
    completed). Frames are trusted: malformed ones raise, they are not
    skipped. Transports that need skip-and-continue semantics implement
    their own loop around ``CoherencyEngine.step``.
    """
    engine = CoherencyEngine(
        preprocess=preprocess,
        convergence=convergence,
        disturbance_offset_s=disturbance_offset_s,
        backend=backend,
    )
    for frame in frames:
        engine.step(frame)
        if engine.status in (STATUS_CONVERGED, STATUS_ABORTED):
            break
    return engine.result()
