# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled kernels: Philox4x32-10 normals and the fused running-sup of |B|.

Same layout and arithmetic as ``bdglab._fallback``; see that module for the
stream layout.  All loops run without the GIL so the thread pool in
``bdglab.paths`` scales across cores.
"""

import numpy as np

from libc.math cimport cos, log, sin, sqrt
from libc.stdint cimport uint32_t, uint64_t

cdef double TWO_PI = 6.283185307179586
cdef double INV_2_53 = 1.0 / 9007199254740992.0


cdef inline void _philox(uint32_t* c, uint32_t k0, uint32_t k1) noexcept nogil:
    cdef uint64_t p0, p1
    cdef uint32_t hi0, lo0, hi1, lo1
    cdef int r
    for r in range(10):
        if r:
            k0 = k0 + 0x9E3779B9u
            k1 = k1 + 0xBB67AE85u
        p0 = <uint64_t>0xD2511F53u * <uint64_t>c[0]
        p1 = <uint64_t>0xCD9E8D57u * <uint64_t>c[2]
        hi0 = <uint32_t>(p0 >> 32)
        lo0 = <uint32_t>p0
        hi1 = <uint32_t>(p1 >> 32)
        lo1 = <uint32_t>p1
        c[0] = hi1 ^ c[1] ^ k0
        c[1] = lo1
        c[2] = hi0 ^ c[3] ^ k1
        c[3] = lo0


cdef inline void _normal_pair(uint32_t pair, uint32_t stream, uint64_t path,
                              uint32_t k0, uint32_t k1,
                              double* z0, double* z1) noexcept nogil:
    cdef uint32_t c[4]
    cdef double u1, u2, radius, angle
    c[0] = pair
    c[1] = stream
    c[2] = <uint32_t>path
    c[3] = <uint32_t>(path >> 32)
    _philox(c, k0, k1)
    u1 = 1.0 - (<double>(c[0] >> 5) * 67108864.0 + <double>(c[1] >> 6)) * INV_2_53
    u2 = (<double>(c[2] >> 5) * 67108864.0 + <double>(c[3] >> 6)) * INV_2_53
    radius = sqrt(-2.0 * log(u1))
    angle = TWO_PI * u2
    z0[0] = radius * cos(angle)
    z1[0] = radius * sin(angle)


def philox4x32(c0, c1, c2, c3, k0, k1):
    """Philox4x32 with 10 rounds, applied elementwise to counter arrays."""
    a0, a1, a2, a3 = np.broadcast_arrays(
        *(np.asarray(c, dtype=np.uint32) for c in (c0, c1, c2, c3)))
    shape = a0.shape
    cdef uint32_t[::1] v0 = np.ascontiguousarray(a0).ravel().copy()
    cdef uint32_t[::1] v1 = np.ascontiguousarray(a1).ravel().copy()
    cdef uint32_t[::1] v2 = np.ascontiguousarray(a2).ravel().copy()
    cdef uint32_t[::1] v3 = np.ascontiguousarray(a3).ravel().copy()
    cdef uint32_t kk0 = <uint32_t>(int(k0) & 0xFFFFFFFF)
    cdef uint32_t kk1 = <uint32_t>(int(k1) & 0xFFFFFFFF)
    cdef uint32_t c[4]
    cdef Py_ssize_t i
    with nogil:
        for i in range(v0.shape[0]):
            c[0] = v0[i]; c[1] = v1[i]; c[2] = v2[i]; c[3] = v3[i]
            _philox(c, kk0, kk1)
            v0[i] = c[0]; v1[i] = c[1]; v2[i] = c[2]; v3[i] = c[3]
    return tuple(np.asarray(v).reshape(shape) for v in (v0, v1, v2, v3))


def standard_normals(seed, stream, path_start, n_paths, count):
    """Return an ``(n_paths, count)`` array of N(0, 1) draws."""
    cdef uint64_t s = <uint64_t>int(seed)
    cdef uint32_t k0 = <uint32_t>s
    cdef uint32_t k1 = <uint32_t>(s >> 32)
    cdef uint32_t st = <uint32_t>(int(stream) & 0xFFFFFFFF)
    cdef uint64_t p0 = <uint64_t>int(path_start)
    cdef Py_ssize_t m = int(n_paths)
    cdef Py_ssize_t n = int(count)
    out_arr = np.empty((m, n))
    cdef double[:, ::1] out = out_arr
    cdef Py_ssize_t i, j
    cdef double z0, z1
    with nogil:
        for i in range(m):
            j = 0
            while j < n:
                _normal_pair(<uint32_t>(j >> 1), st, p0 + i, k0, k1, &z0, &z1)
                out[i, j] = z0
                if j + 1 < n:
                    out[i, j + 1] = z1
                j += 2
    return out_arr


def brownian_sup_abs(seed, stream, path_start, n_paths, sqrt_dt, dims):
    """Per-path max over grid nodes of the Euclidean norm of B, streamed."""
    cdef double[::1] sdt = np.ascontiguousarray(sqrt_dt, dtype=np.float64)
    cdef uint64_t s = <uint64_t>int(seed)
    cdef uint32_t k0 = <uint32_t>s
    cdef uint32_t k1 = <uint32_t>(s >> 32)
    cdef uint32_t st = <uint32_t>(int(stream) & 0xFFFFFFFF)
    cdef uint64_t p0 = <uint64_t>int(path_start)
    cdef Py_ssize_t m = int(n_paths)
    cdef Py_ssize_t steps = sdt.shape[0]
    cdef Py_ssize_t d = int(dims)
    out_arr = np.empty(m)
    cdef double[::1] out = out_arr
    level_arr = np.zeros(d)
    cdef double[::1] level = level_arr
    cdef Py_ssize_t i, j, k, n, total = steps * d
    cdef double z0, z1, z, best, norm, sq
    with nogil:
        for i in range(m):
            for k in range(d):
                level[k] = 0.0
            best = 0.0
            n = 0
            for j in range(steps):
                for k in range(d):
                    if n & 1 == 0:
                        _normal_pair(<uint32_t>(n >> 1), st, p0 + i, k0, k1, &z0, &z1)
                        z = z0
                    else:
                        z = z1
                    level[k] = level[k] + z * sdt[j]
                    n += 1
                if d == 1:
                    norm = level[0] if level[0] >= 0.0 else -level[0]
                else:
                    sq = 0.0
                    for k in range(d):
                        sq = sq + level[k] * level[k]
                    norm = sqrt(sq)
                if norm > best:
                    best = norm
            out[i] = best
    return out_arr
