"""Parameter-free grouping of buses from typicality and pairwise distances.

The pipeline at one window length:

1. ``proximity_chain``: order all buses greedily, starting at the
   typicality peak and always hopping to the nearest unvisited bus. Along
   this ordering, coherent groups appear as contiguous runs.
2. ``detect_seeds``: buses where typicality attains a local maximum along
   the chain (strict or plateau; a plateau counts once at its first
   element). The chain start is always a seed, so at least one group exists.
3. ``assign_members``: every remaining bus joins the seed nearest in
   trajectory distance. When two seeds are equally near (relative 1e-9) the
   bus joins the cluster in which it looks least eccentric, evaluated over
   that cluster's current members plus the candidate; a residual tie goes
   to the lower seed index.
4. ``merge_clusters``: repeatedly merge the closest pair of clusters whose
   centroid gap is within twice the larger spread, absorbing the lower
   typicality peak into the higher.

All centroid gaps, spreads, and within-subset eccentricities are evaluated
from the pairwise squared-distance matrix through the standard mean-point
identities, so no trajectory storage is needed on the hot path. Ties break
on channel index everywhere, making the output deterministic.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from . import _backend
from .errors import ConfigError, StreamShapeError

# Two seed distances within this relative tolerance are treated as equal.
SEED_TIE_RTOL = 1e-9


@dataclass(frozen=True, eq=False)
class Cluster:
    """One coherent group.

    seed_bus is the member with the highest typicality (lowest index on
    ties), members are sorted channel indices, spread_sigma is the RMS
    distance of member trajectories to the cluster centroid, and
    tau_variance is the population variance of member typicality.
    ``centroid`` is the mean member trajectory; it is filled on demand by
    ``attach_centroids`` because the grouping math never needs it.
    """

    seed_bus: int
    members: tuple[int, ...]
    peak_tau: float
    spread_sigma: float
    tau_variance: float
    centroid: np.ndarray | None = None

    @property
    def size(self) -> int:
        return len(self.members)


@dataclass(frozen=True, eq=False)
class ClusterSet:
    """All clusters at one window length.

    Clusters are ordered by descending peak typicality, ties by ascending
    seed index. Members partition the full bus set.
    """

    clusters: tuple[Cluster, ...]
    iteration_K: int

    def membership_key(self) -> tuple[tuple[int, ...], ...]:
        """Canonical partition identity, independent of cluster order."""
        return tuple(sorted(c.members for c in self.clusters))

    def labels(self, n_buses: int) -> np.ndarray:
        out = np.full(n_buses, -1, dtype=np.intp)
        for idx, cluster in enumerate(self.clusters):
            out[list(cluster.members)] = idx
        if (out < 0).any():
            raise StreamShapeError("clusters do not cover every bus")
        return out

    def validate_partition(self, n_buses: int) -> None:
        seen = [b for c in self.clusters for b in c.members]
        if sorted(seen) != list(range(n_buses)):
            raise StreamShapeError(
                f"clusters are not a partition of {n_buses} buses: {seen}"
            )


def cluster_tau_variance(cluster: Cluster, tau) -> float:
    """Population variance of member typicality."""
    vals = np.asarray(tau, dtype=np.float64)[list(cluster.members)]
    return float(vals.var())


def proximity_chain(tau, d2, backend=None) -> np.ndarray:
    """Greedy nearest-neighbour ordering starting at the typicality peak."""
    tau = np.ascontiguousarray(tau, dtype=np.float64)
    d2 = np.ascontiguousarray(d2, dtype=np.float64)
    if d2.shape != (tau.size, tau.size):
        raise StreamShapeError(
            f"distance matrix {d2.shape} does not match {tau.size} buses"
        )
    kernels = backend if backend is not None else _backend.load()
    return np.asarray(kernels.chain_walk(d2, tau))


def detect_seeds(chain, tau) -> list[int]:
    """Chain positions where typicality peaks, reported as bus indices.

    A run of equal values counts once, at its first element. The first
    chain element is always a seed. At least one seed is returned.
    """
    chain = np.asarray(chain, dtype=np.intp)
    n = chain.size
    if n == 0:
        raise ConfigError("cannot detect seeds on an empty chain")
    values = np.asarray(tau, dtype=np.float64)[chain]
    seeds = []
    i = 0
    while i < n:
        j = i
        while j + 1 < n and values[j + 1] == values[i]:
            j += 1
        left_ok = i == 0 or values[i - 1] < values[i]
        right_ok = j == n - 1 or values[j + 1] < values[i]
        if (left_ok and right_ok) or i == 0:
            seeds.append(int(chain[i]))
        i = j + 1
    return seeds


def _subset_eccentricity(candidate: int, members: list[int], d2) -> float:
    """Candidate's eccentricity evaluated within members + candidate.

    Uses the mean-point identities on the distance matrix. A subset whose
    points all coincide has zero spread; the uniform value 2 is returned
    for that degenerate case.
    """
    subset = members + [candidate]
    m = len(subset)
    block = d2[np.ix_(subset, subset)]
    w = float(block.sum())  # ordered-pair sum
    sigma2 = w / (2.0 * m * m)
    if sigma2 <= 0.0:
        return 2.0
    to_centroid = float(d2[candidate, subset].sum()) / m - sigma2
    return 1.0 + max(0.0, to_centroid) / sigma2


def assign_members(seeds, d2, tau, backend=None) -> ClusterSet:
    """Grow clusters around the seeds by nearest trajectory distance.

    Non-seed buses are processed in ascending channel index; each joins the
    nearest seed, with the within-cluster eccentricity tie-break described
    in the module docstring. Statistics are computed after assignment and
    each cluster's seed is re-seated on its highest-typicality member.
    """
    d2 = np.asarray(d2, dtype=np.float64)
    tau = np.asarray(tau, dtype=np.float64)
    n = d2.shape[0]
    seeds = list(seeds)
    if not seeds:
        raise ConfigError("need at least one seed")
    members = {s: [s] for s in seeds}
    for bus in range(n):
        if bus in members:
            continue
        dists = np.array([d2[bus, s] for s in seeds])
        dmin = float(dists.min())
        tied = [
            s
            for s, dist in zip(seeds, dists)
            if dist - dmin <= SEED_TIE_RTOL * max(abs(dist), abs(dmin))
        ]
        if len(tied) == 1:
            chosen = tied[0]
        else:
            scored = sorted(
                (( _subset_eccentricity(bus, members[s], d2), s) for s in tied),
            )
            chosen = scored[0][1]
        members[chosen].append(bus)
    return _build_cluster_set(
        list(members.values()), d2, tau, iteration_k=0, backend=backend
    )


def _build_cluster_set(groups, d2, tau, iteration_k, backend=None) -> ClusterSet:
    kernels = backend if backend is not None else _backend.load()
    labels = np.empty(d2.shape[0], dtype=np.intp)
    for idx, group in enumerate(groups):
        labels[group] = idx
    sums = kernels.label_pair_sums(np.ascontiguousarray(d2), labels, len(groups))
    clusters = []
    for idx, group in enumerate(groups):
        clusters.append(_make_cluster(tuple(sorted(group)), sums[idx, idx], tau))
    return ClusterSet(clusters=_ordered(clusters), iteration_K=iteration_k)


def _make_cluster(members_sorted, within_sum, tau) -> Cluster:
    m = len(members_sorted)
    vals = tau[list(members_sorted)]
    peak_pos = int(np.argmax(vals))
    return Cluster(
        seed_bus=members_sorted[peak_pos],
        members=members_sorted,
        peak_tau=float(vals[peak_pos]),
        spread_sigma=float(np.sqrt(max(0.0, within_sum) / (2.0 * m * m))),
        tau_variance=float(vals.var()),
    )


def _ordered(clusters) -> tuple[Cluster, ...]:
    return tuple(sorted(clusters, key=lambda c: (-c.peak_tau, c.seed_bus)))


def merge_clusters(cs: ClusterSet, d2, tau, backend=None) -> ClusterSet:
    """Fuse overlapping clusters until every pair is separated.

    Two clusters qualify for merging when the distance between their
    centroids is at most twice the larger of their spreads. Each round
    merges the qualifying pair with the smallest centroid gap; the cluster
    with the lower peak typicality is absorbed (lower seed index absorbs on
    an exact tie). At most one fewer merge than clusters can occur, so the
    loop terminates.
    """
    d2 = np.asarray(d2, dtype=np.float64)
    tau = np.asarray(tau, dtype=np.float64)
    kernels = backend if backend is not None else _backend.load()
    groups = [list(c.members) for c in cs.clusters]
    if len(groups) > 1:
        labels = np.empty(d2.shape[0], dtype=np.intp)
        for idx, group in enumerate(groups):
            labels[group] = idx
        sums = np.asarray(
            kernels.label_pair_sums(np.ascontiguousarray(d2), labels, len(groups))
        )
        while len(groups) > 1:
            pick = _closest_overlapping_pair(groups, sums)
            if pick is None:
                break
            a, b = pick
            groups, sums = _fuse(groups, sums, a, b, tau)
    return _build_cluster_set(groups, d2, tau, cs.iteration_K, backend=backend)


def _closest_overlapping_pair(groups, sums):
    best = None
    for a in range(len(groups)):
        ma = len(groups[a])
        sig2_a = sums[a, a] / (2.0 * ma * ma)
        for b in range(a + 1, len(groups)):
            mb = len(groups[b])
            sig2_b = sums[b, b] / (2.0 * mb * mb)
            gap2 = max(0.0, sums[a, b] / (ma * mb) - sig2_a - sig2_b)
            if gap2 <= 4.0 * max(sig2_a, sig2_b):
                key = (gap2, min(groups[a][0], groups[b][0]))
                if best is None or key < best[0]:
                    best = (key, (a, b))
    return None if best is None else best[1]


def _fuse(groups, sums, a, b, tau):
    peak_a = tau[groups[a]].max()
    peak_b = tau[groups[b]].max()
    if peak_a > peak_b:
        keep, drop = a, b
    elif peak_b > peak_a:
        keep, drop = b, a
    else:
        # exact typicality tie: the lower seed index absorbs
        seed_a = groups[a][int(np.argmax(tau[groups[a]]))]
        seed_b = groups[b][int(np.argmax(tau[groups[b]]))]
        keep, drop = (a, b) if seed_a <= seed_b else (b, a)
    groups[keep] = groups[keep] + groups[drop]
    merged_sums = sums.copy()
    merged_sums[keep, keep] = sums[keep, keep] + sums[drop, drop] + 2.0 * sums[keep, drop]
    for c in range(len(groups)):
        if c in (keep, drop):
            continue
        merged_sums[keep, c] = sums[keep, c] + sums[drop, c]
        merged_sums[c, keep] = merged_sums[keep, c]
    del groups[drop]
    merged_sums = np.delete(np.delete(merged_sums, drop, axis=0), drop, axis=1)
    return groups, merged_sums


def attach_centroids(cs: ClusterSet, trajectories) -> ClusterSet:
    """Fill each cluster's mean member trajectory from (K, N) data."""
    traj = np.asarray(trajectories, dtype=np.float64)
    clusters = tuple(
        replace(c, centroid=traj[:, list(c.members)].mean(axis=1))
        for c in cs.clusters
    )
    return ClusterSet(clusters=clusters, iteration_K=cs.iteration_K)


def cluster_snapshot(tau, d2, iteration_k: int, backend=None) -> ClusterSet:
    """Full pipeline: chain, seeds, assignment, merging, ordering."""
    chain = proximity_chain(tau, d2, backend=backend)
    seeds = detect_seeds(chain, tau)
    assigned = assign_members(seeds, d2, tau, backend=backend)
    merged = merge_clusters(assigned, d2, tau, backend=backend)
    return ClusterSet(clusters=merged.clusters, iteration_K=iteration_k)
