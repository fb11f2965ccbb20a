"""NumPy fallback implementations of the per-frame hot kernels.

Same contracts as the compiled module ``taucoh._kernels``; selected by
``taucoh._backend`` when the extension is unavailable or explicitly requested.
"""

import numpy as np

BACKEND_NAME = "python"


def update_distance_matrix(d2, dev):
    """In place: d2[i, j] += (dev[i] - dev[j])**2."""
    diff = dev[:, None] - dev[None, :]
    d2 += diff * diff


def update_centered_accumulators(s, dev):
    """Accumulate squared deviation-from-frame-mean into s, in place.

    Returns (frame_mean, frame_variance) where frame_variance is the
    population variance of the frame across channels. Adding the returned
    variance terms over frames reproduces the batch spread of the point set.
    """
    m = float(dev.mean())
    c = dev - m
    c2 = c * c
    s += c2
    return m, float(c2.mean())


def chain_walk(d2, tau):
    """Greedy nearest-neighbour ordering of all points.

    Starts at the point with the highest typicality (first index wins ties)
    and repeatedly appends the unvisited point closest to the last appended
    one (again first index on ties). Returns the visit order as an int array.
    """
    n = d2.shape[0]
    order = np.empty(n, dtype=np.intp)
    visited = np.zeros(n, dtype=bool)
    current = int(np.argmax(tau))
    order[0] = current
    visited[current] = True
    big = np.inf
    for pos in range(1, n):
        row = np.where(visited, big, d2[current])
        current = int(np.argmin(row))
        order[pos] = current
        visited[current] = True
    return order


def label_pair_sums(d2, labels, n_clusters):
    """S[a, b] = sum of d2[i, j] over ordered pairs with labels i=a, j=b."""
    onehot = np.zeros((d2.shape[0], n_clusters))
    onehot[np.arange(d2.shape[0]), labels] = 1.0
    return onehot.T @ d2 @ onehot
