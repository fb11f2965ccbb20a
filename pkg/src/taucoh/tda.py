"""Typicality analytics over a growing set of bus deviation trajectories.

The data points are the N buses. Each point is that bus's preprocessed
frequency-deviation trajectory, one entry per accepted frame, so the point
dimension grows with the measurement window. Everything here reduces to two
interchangeable computation routes:

* batch: accumulate the full pairwise squared-distance matrix and sum rows
  to get each bus's cumulative proximity;
* recursive: maintain the per-sample cross-bus mean trajectory and the
  running mean of squared trajectory norms, from which the same proximity
  follows in closed form without touching the pairwise matrix.

Both routes agree to floating-point accumulation error (the test suite pins
relative 1e-9) because every statistic involved is additive over samples:
appending a frame never revises an earlier entry of the mean trajectory.

Derived per-bus quantities:

* eccentricity ``eps``: twice the cumulative proximity over the mean
  cumulative proximity; always >= 1, sums to 2N.
* density ``dens``: reciprocal eccentricity.
* typicality ``tau``: density normalized to sum to one; the discrete
  distribution whose local maxima identify cluster centers.

The all-coincident point set is well defined rather than an error: every
eccentricity is 2, typicality is uniform, and the result is flagged
degenerate.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from . import _backend
from .errors import ConfigError, InputQualityError, StreamShapeError

# Relative slack used when clamping a variance that cancellation pushed
# slightly negative. Anything more negative than this is a real bug.
VARIANCE_CLAMP_RTOL = 1e-12


def _as_vector(values, name="values"):
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim != 1:
        raise StreamShapeError(f"{name} must be one-dimensional, got shape {arr.shape}")
    return arr


def _check_finite(dev, k):
    if not np.all(np.isfinite(dev)):
        bad = int(np.flatnonzero(~np.isfinite(dev))[0])
        raise InputQualityError(
            f"non-finite sample for bus index {bad} at window length {k}",
            bus=bad,
            k=k,
        )


@dataclass(frozen=True, eq=False)
class MeasurementFrame:
    """One synchronized reading: per-bus frequency in Hz at one timestamp."""

    timestamp: float
    values: np.ndarray
    nominal: float

    def __post_init__(self):
        object.__setattr__(self, "values", _as_vector(self.values, "frame values"))
        if self.values.size < 2:
            raise StreamShapeError("a frame needs at least 2 channels")


@dataclass(frozen=True, eq=False)
class BusPoint:
    """One bus's deviation trajectory, identified by channel index."""

    bus_id: int
    trajectory: np.ndarray

    def __post_init__(self):
        object.__setattr__(
            self, "trajectory", _as_vector(self.trajectory, "trajectory")
        )


@dataclass(frozen=True, eq=False)
class DistanceState:
    """Pairwise squared trajectory distances after K accepted frames.

    ``d2`` is symmetric with a zero diagonal and is additive over frames:
    each frame contributes the squared pairwise differences of its deviation
    vector alone.
    """

    K: int
    d2: np.ndarray

    def __post_init__(self):
        d2 = np.asarray(self.d2, dtype=np.float64)
        if d2.ndim != 2 or d2.shape[0] != d2.shape[1]:
            raise StreamShapeError(f"d2 must be square, got shape {d2.shape}")
        object.__setattr__(self, "d2", d2)

    @property
    def n_points(self) -> int:
        return self.d2.shape[0]


def new_distance_state(n_buses: int) -> DistanceState:
    if n_buses < 1:
        raise ConfigError("need at least one bus")
    return DistanceState(K=0, d2=np.zeros((n_buses, n_buses)))


def update_distance_state(state: DistanceState, deviations) -> DistanceState:
    """Fold one frame of deviations into the distance matrix.

    Pure: returns a new state, the input is untouched. Rejects shape
    mismatches and non-finite samples without modifying anything.
    """
    dev = _as_vector(deviations, "deviations")
    if dev.size != state.n_points:
        raise StreamShapeError(
            f"frame has {dev.size} channels, distance state tracks {state.n_points}"
        )
    _check_finite(dev, state.K + 1)
    d2 = state.d2.copy()
    _backend.load().update_distance_matrix(d2, np.ascontiguousarray(dev))
    return DistanceState(K=state.K + 1, d2=d2)


def cumulative_proximity_batch(state: DistanceState) -> np.ndarray:
    """Per-bus sum of squared distances to every other bus."""
    return state.d2.sum(axis=1)


@dataclass(frozen=True, eq=False)
class RunningMoments:
    """Streaming moments of the bus-point set after K frames.

    ``mu`` is the cross-bus mean trajectory (one entry per sample; entries
    never change once appended). ``X`` is the mean over buses of squared
    trajectory norms. The spread ``sigma2 = X - ||mu||**2`` is clamped to
    zero when cancellation leaves it within 1e-12 of scale below zero.
    """

    K: int
    n_points: int
    mu: np.ndarray
    X: float
    _musq: float = field(default=0.0, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "mu", _as_vector(self.mu, "mu"))

    @property
    def sigma2(self) -> float:
        raw = self.X - self._musq
        if raw < 0.0:
            scale = max(self.X, self._musq, 1.0)
            if raw < -VARIANCE_CLAMP_RTOL * scale:
                raise ArithmeticError(
                    f"spread went negative beyond numerical slack: {raw!r}"
                )
            return 0.0
        return raw


def new_running_moments(n_buses: int) -> RunningMoments:
    if n_buses < 1:
        raise ConfigError("need at least one bus")
    return RunningMoments(K=0, n_points=n_buses, mu=np.empty(0), X=0.0)


def update_running_moments(moments: RunningMoments, deviations) -> RunningMoments:
    """Fold one frame into the running moments (pure, returns a new value)."""
    dev = _as_vector(deviations, "deviations")
    if dev.size != moments.n_points:
        raise StreamShapeError(
            f"frame has {dev.size} channels, moments track {moments.n_points}"
        )
    _check_finite(dev, moments.K + 1)
    m = float(dev.mean())
    mu = np.append(moments.mu, m)
    mu.flags.writeable = False
    return RunningMoments(
        K=moments.K + 1,
        n_points=moments.n_points,
        mu=mu,
        X=moments.X + float((dev * dev).mean()),
        _musq=moments._musq + m * m,
    )


def cumulative_proximity_recursive(moments: RunningMoments, point: BusPoint) -> float:
    """Closed-form cumulative proximity of one bus from the running moments.

    Equals N * (||trajectory - mu||**2 + sigma2), which matches the batch
    row sum of squared distances exactly in real arithmetic.
    """
    if point.trajectory.size != moments.K:
        raise StreamShapeError(
            f"trajectory has {point.trajectory.size} samples, moments have {moments.K}"
        )
    centered = point.trajectory - moments.mu
    return moments.n_points * (float(centered @ centered) + moments.sigma2)


class EccentricityResult(NamedTuple):
    eps: np.ndarray
    degenerate: bool


def eccentricity(q) -> EccentricityResult:
    """Normalized eccentricity from per-bus cumulative proximity.

    eps[i] = 2 q[i] / mean(q). A point set where every trajectory coincides
    has q identically zero; that case returns the uniform value 2 and the
    degenerate flag instead of dividing by zero.
    """
    q = _as_vector(q, "q")
    total = float(q.sum())
    if total <= 0.0:
        return EccentricityResult(np.full(q.size, 2.0), True)
    return EccentricityResult(q * (2.0 * q.size / total), False)


def eccentricity_from_moments(moments: RunningMoments, trajectories) -> EccentricityResult:
    """Closed-form eccentricity: 1 + ||b_i - mu||**2 / sigma2.

    ``trajectories`` is (K, N): one row per sample, one column per bus.
    Bypasses the pairwise matrix entirely; agrees with the proximity route
    to floating-point accumulation error.
    """
    traj = np.asarray(trajectories, dtype=np.float64)
    if traj.shape != (moments.K, moments.n_points):
        raise StreamShapeError(
            f"trajectories shape {traj.shape} does not match moments "
            f"({moments.K}, {moments.n_points})"
        )
    sigma2 = moments.sigma2
    if sigma2 <= 0.0:
        return EccentricityResult(np.full(moments.n_points, 2.0), True)
    centered = traj - moments.mu[:, None]
    s = (centered * centered).sum(axis=0)
    return EccentricityResult(1.0 + s / sigma2, False)


def density(eps) -> np.ndarray:
    """Reciprocal eccentricity."""
    eps = _as_vector(eps, "eps")
    return 1.0 / eps


def typicality(dens) -> np.ndarray:
    """Density normalized to a discrete distribution (sums to one)."""
    dens = _as_vector(dens, "dens")
    return dens / float(dens.sum())


@dataclass(frozen=True, eq=False)
class TdaProperties:
    """Per-bus analytics at one window length."""

    K: int
    q: np.ndarray
    eps: np.ndarray
    dens: np.ndarray
    tau: np.ndarray
    degenerate: bool = False


def tda_properties(q, k: int | None = None) -> TdaProperties:
    """Bundle proximity into the derived per-bus quantities."""
    q = _as_vector(q, "q")
    eps, degenerate = eccentricity(q)
    dens = density(eps)
    tau = typicality(dens)
    return TdaProperties(
        K=int(k) if k is not None else 0,
        q=q,
        eps=eps,
        dens=dens,
        tau=tau,
        degenerate=degenerate,
    )


@dataclass(frozen=True)
class ChebyshevParams:
    """Distribution-free anomaly rule: eccentric beyond n standard spreads.

    The fraction of points with eps > n**2 + 1 is below 1/n**2 on any data;
    for the default n=3 the threshold is 10 and a Gaussian population lands
    near 0.3 percent.
    """

    n: float = 3.0

    def __post_init__(self):
        if not self.n > 0:
            raise ConfigError("anomaly multiplier n must be positive")

    @property
    def threshold(self) -> float:
        return self.n * self.n + 1.0


def chebyshev_is_anomalous(eps, params: ChebyshevParams = ChebyshevParams()):
    """Elementwise anomaly test on eccentricity values."""
    return np.asarray(eps, dtype=np.float64) > params.threshold


class _Growable:
    """Append-only float64 buffer with amortized doubling.

    rows=None gives a 1-D buffer, otherwise rows are vectors of that width.
    """

    def __init__(self, width=None, capacity=256):
        self.width = width
        shape = (capacity,) if width is None else (capacity, width)
        self._buf = np.empty(shape)
        self.size = 0

    def append(self, row):
        if self.size == self._buf.shape[0]:
            grown_shape = list(self._buf.shape)
            grown_shape[0] *= 2
            grown = np.empty(tuple(grown_shape))
            grown[: self.size] = self._buf
            self._buf = grown
        self._buf[self.size] = row
        self.size += 1

    @property
    def data(self):
        """View of the filled prefix. Do not keep across appends."""
        return self._buf[: self.size]


class StreamingTda:
    """Single-writer recursive analytics state for the engine hot path.

    Wraps the same mathematics as the pure operations above but updates
    in-place buffers through the kernel backend, one deviation frame at a
    time. Snapshots handed outward (``distance_state``, ``running_moments``)
    are read-only copies; the internal buffers are never shared, so the
    value-semantics contract of the pure operations is preserved at the API
    boundary.

    Every ``refresh_every`` frames the accumulated distance matrix, centered
    sums and spread are recomputed from the retained trajectories, bounding
    floating-point drift of the recursive route.
    """

    def __init__(self, n_buses: int, backend=None, refresh_every: int = 256):
        if n_buses < 2:
            raise ConfigError("streaming analytics needs at least 2 buses")
        if refresh_every < 1:
            raise ConfigError("refresh_every must be positive")
        self.n = n_buses
        self.kernels = backend if backend is not None else _backend.load()
        self.refresh_every = refresh_every
        self.K = 0
        self.d2 = np.zeros((n_buses, n_buses))
        self.s = np.zeros(n_buses)  # per-bus ||b_i - mu||^2
        self.sigma2 = 0.0  # accumulated cross-bus variance
        self.X = 0.0
        self._musq = 0.0
        self._mu = _Growable()
        self._traj = _Growable(width=n_buses)

    def push(self, deviations) -> None:
        dev = np.ascontiguousarray(deviations, dtype=np.float64)
        if dev.ndim != 1 or dev.size != self.n:
            raise StreamShapeError(
                f"expected a frame of {self.n} deviations, got shape {dev.shape}"
            )
        _check_finite(dev, self.K + 1)
        self.kernels.update_distance_matrix(self.d2, dev)
        m, var = self.kernels.update_centered_accumulators(self.s, dev)
        self.sigma2 += var
        self.X += float((dev * dev).mean())
        self._musq += m * m
        self._mu.append(m)
        self._traj.append(dev)
        self.K += 1
        if self.K % self.refresh_every == 0:
            self.refresh()

    def refresh(self) -> None:
        """Recompute the accumulated state from the retained trajectories."""
        traj = self._traj.data
        mu = traj.mean(axis=1)
        self._mu.data[:] = mu
        centered = traj - mu[:, None]
        self.s[:] = (centered * centered).sum(axis=0)
        self.sigma2 = float(self.s.mean())
        self.X = float((traj * traj).sum(axis=0).mean())
        self._musq = float(mu @ mu)
        diff = traj[:, :, None] - traj[:, None, :]
        self.d2[:, :] = (diff * diff).sum(axis=0)

    def properties(self) -> TdaProperties:
        """Current per-bus analytics via the closed-form route."""
        if self.sigma2 <= 0.0:
            n = self.n
            return TdaProperties(
                K=self.K,
                q=np.zeros(n),
                eps=np.full(n, 2.0),
                dens=np.full(n, 0.5),
                tau=np.full(n, 1.0 / n),
                degenerate=True,
            )
        q = self.n * (self.s + self.sigma2)
        eps = 1.0 + self.s / self.sigma2
        dens = 1.0 / eps
        tau = dens / float(dens.sum())
        return TdaProperties(K=self.K, q=q, eps=eps, dens=dens, tau=tau)

    @property
    def trajectories(self) -> np.ndarray:
        """(K, N) view of accepted deviation frames. Do not mutate."""
        return self._traj.data

    def distance_state(self) -> DistanceState:
        d2 = self.d2.copy()
        d2.flags.writeable = False
        return DistanceState(K=self.K, d2=d2)

    def running_moments(self) -> RunningMoments:
        mu = self._mu.data.copy()
        mu.flags.writeable = False
        return RunningMoments(
            K=self.K, n_points=self.n, mu=mu, X=self.X, _musq=self._musq
        )
