# Compiled per-frame hot kernels: distance-state rank update, centered
# accumulator update, greedy proximity chain, and label-block distance sums.
# Mirrors taucoh._kernels_py exactly; that module documents the contracts.

import numpy as np

cimport numpy as cnp

cnp.import_array()

BACKEND_NAME = "compiled"


def update_distance_matrix(double[:, ::1] d2, double[::1] dev):
    cdef Py_ssize_t n = dev.shape[0]
    cdef Py_ssize_t i, j
    cdef double diff
    for i in range(n):
        for j in range(i + 1, n):
            diff = dev[i] - dev[j]
            diff *= diff
            d2[i, j] += diff
            d2[j, i] += diff


def update_centered_accumulators(double[::1] s, double[::1] dev):
    cdef Py_ssize_t n = dev.shape[0]
    cdef Py_ssize_t i
    cdef double m = 0.0, v = 0.0, c
    for i in range(n):
        m += dev[i]
    m /= n
    for i in range(n):
        c = dev[i] - m
        c *= c
        s[i] += c
        v += c
    return m, v / n


def chain_walk(double[:, ::1] d2, double[::1] tau):
    cdef Py_ssize_t n = d2.shape[0]
    order_arr = np.empty(n, dtype=np.intp)
    cdef Py_ssize_t[::1] order = order_arr
    visited_arr = np.zeros(n, dtype=np.uint8)
    cdef unsigned char[::1] visited = visited_arr
    cdef Py_ssize_t i, pos, current = 0, best
    cdef double best_val, val

    for i in range(1, n):
        if tau[i] > tau[current]:
            current = i
    order[0] = current
    visited[current] = 1
    for pos in range(1, n):
        best = -1
        best_val = 0.0
        for i in range(n):
            if visited[i]:
                continue
            val = d2[current, i]
            if best < 0 or val < best_val:
                best = i
                best_val = val
        order[pos] = best
        visited[best] = 1
        current = best
    return order_arr


def label_pair_sums(double[:, ::1] d2, Py_ssize_t[::1] labels, Py_ssize_t n_clusters):
    cdef Py_ssize_t n = d2.shape[0]
    out_arr = np.zeros((n_clusters, n_clusters))
    cdef double[:, ::1] out = out_arr
    cdef Py_ssize_t i, j
    for i in range(n):
        for j in range(n):
            out[labels[i], labels[j]] += d2[i, j]
    return out_arr
