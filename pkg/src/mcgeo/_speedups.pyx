# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels: Gray-code Cheeger scan and the projection-sampler loop."""
import numpy as np

cimport numpy as cnp
from libc.math cimport INFINITY

cnp.import_array()


def cheeger_scan(const double[:, ::1] w, const double[::1] pi):
    cdef Py_ssize_t n = pi.shape[0]
    cdef long long total = (<long long>1) << n
    cdef long long i, mask = 0, best_mask = 0
    cdef Py_ssize_t k, j
    cdef double mass = 0.0, flow = 0.0, s_out, s_in, best = INFINITY, r
    cdef char[::1] inside = np.zeros(n, dtype=np.int8)
    with nogil:
        for i in range(1, total):
            k = 0
            while not ((i >> k) & 1):
                k += 1
            s_out = 0.0
            s_in = 0.0
            for j in range(n):
                if j == k:
                    continue
                if inside[j]:
                    s_in = s_in + w[j, k]
                else:
                    s_out = s_out + w[k, j]
            if inside[k]:
                flow = flow - (s_out - s_in)
                mass = mass - pi[k]
                inside[k] = 0
            else:
                flow = flow + (s_out - s_in)
                mass = mass + pi[k]
                inside[k] = 1
            mask = mask ^ ((<long long>1) << k)
            if mass > 0.0 and mass <= 0.5 + 1e-12:
                r = flow / mass
                if r < best:
                    best = r
                    best_mask = mask
        # the running sums drift; recompute the winner's ratio from scratch
        if best_mask:
            mass = 0.0
            flow = 0.0
            for k in range(n):
                if (best_mask >> k) & 1:
                    mass = mass + pi[k]
                    for j in range(n):
                        if not ((best_mask >> j) & 1):
                            flow = flow + w[k, j]
            best = flow / mass
    return best, best_mask


cdef inline Py_ssize_t _draw(const double* cdf, Py_ssize_t n, double u) nogil:
    cdef Py_ssize_t lo = 0, hi = n - 1, mid
    while lo < hi:
        mid = (lo + hi) // 2
        if cdf[mid] > u:
            hi = mid
        else:
            lo = mid + 1
    return lo


def sampler_chunk(cnp.int64_t[::1] state, const double[:, ::1] u, const double[::1] cdf0,
                  const double[:, ::1] p0cdf, const double[:, :, ::1] acc_level,
                  const double[:, :, ::1] acc_swap, cnp.int64_t[:, ::1] counts,
                  cnp.int64_t[:, ::1] traj):
    cdef Py_ssize_t d = state.shape[0]
    cdef Py_ssize_t n = cdf0.shape[0]
    cdef Py_ssize_t m = u.shape[0]
    cdef Py_ssize_t step, i, c, y
    cdef cnp.int64_t tmp
    cdef bint record = traj.shape[0] > 0
    with nogil:
        for step in range(m):
            state[0] = _draw(&cdf0[0], n, u[step, 0])
            if u[step, 1] < 0.5:
                i = <Py_ssize_t>(u[step, 2] * d)
                if i > d - 1:
                    i = d - 1
                y = _draw(&p0cdf[state[i], 0], n, u[step, 3])
                if u[step, 4] < acc_level[i, state[i], y]:
                    state[i] = y
            else:
                i = <Py_ssize_t>(u[step, 2] * (d - 1))
                if i > d - 2:
                    i = d - 2
                if u[step, 4] < acc_swap[i, state[i], state[i + 1]]:
                    tmp = state[i]
                    state[i] = state[i + 1]
                    state[i + 1] = tmp
            for c in range(d):
                counts[c, state[c]] += 1
            if record:
                for c in range(d):
                    traj[step, c] = state[c]
