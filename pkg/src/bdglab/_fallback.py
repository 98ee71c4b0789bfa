"""Pure-numpy implementations of the hot kernels.

These mirror ``_kernels.pyx`` function for function.  The random stream is
Philox4x32-10 keyed by the 64-bit master seed; the counter of the Philox block
that yields normals ``2c`` and ``2c+1`` of path ``p`` in stream ``s`` is
``(c, s, p_lo, p_hi)``.  Each pair of normals comes from one block through the
Box-Muller transform, so every normal is a pure function of
``(seed, stream, path, index)``.
"""

from __future__ import annotations

import numpy as np

_M0 = np.uint64(0xD2511F53)
_M1 = np.uint64(0xCD9E8D57)
_W0 = 0x9E3779B9
_W1 = 0xBB67AE85
_LO = np.uint64(0xFFFFFFFF)
_S32 = np.uint64(32)
_TWO_PI = 6.283185307179586
_INV_2_53 = 1.0 / 9007199254740992.0

# paths per vectorized chunk in brownian_sup_abs
_CHUNK = 256


def philox4x32(c0, c1, c2, c3, k0, k1):
    """Philox4x32 with 10 rounds, applied elementwise to counter arrays."""
    c0, c1, c2, c3 = (np.asarray(c, dtype=np.uint32) for c in (c0, c1, c2, c3))
    k0 = int(k0) & 0xFFFFFFFF
    k1 = int(k1) & 0xFFFFFFFF
    for r in range(10):
        if r:
            k0 = (k0 + _W0) & 0xFFFFFFFF
            k1 = (k1 + _W1) & 0xFFFFFFFF
        p0 = _M0 * c0.astype(np.uint64)
        p1 = _M1 * c2.astype(np.uint64)
        hi0 = (p0 >> _S32).astype(np.uint32)
        lo0 = (p0 & _LO).astype(np.uint32)
        hi1 = (p1 >> _S32).astype(np.uint32)
        lo1 = (p1 & _LO).astype(np.uint32)
        c0, c1, c2, c3 = (
            hi1 ^ c1 ^ np.uint32(k0),
            lo1,
            hi0 ^ c3 ^ np.uint32(k1),
            lo0,
        )
    return c0, c1, c2, c3


def standard_normals(seed, stream, path_start, n_paths, count):
    """Return an ``(n_paths, count)`` array of N(0, 1) draws."""
    n_paths = int(n_paths)
    count = int(count)
    if n_paths == 0 or count == 0:
        return np.empty((n_paths, count))
    seed = int(seed)
    n_pairs = (count + 1) // 2
    paths = np.arange(path_start, path_start + n_paths, dtype=np.uint64)
    pairs = np.arange(n_pairs, dtype=np.uint32)
    c0 = np.broadcast_to(pairs[None, :], (n_paths, n_pairs))
    c1 = np.full((n_paths, n_pairs), int(stream) & 0xFFFFFFFF, dtype=np.uint32)
    c2 = np.broadcast_to((paths & _LO).astype(np.uint32)[:, None], (n_paths, n_pairs))
    c3 = np.broadcast_to((paths >> _S32).astype(np.uint32)[:, None], (n_paths, n_pairs))
    w0, w1, w2, w3 = philox4x32(c0, c1, c2, c3, seed & 0xFFFFFFFF, seed >> 32)

    a = (w0 >> np.uint32(5)).astype(np.float64) * 67108864.0
    u1 = 1.0 - (a + (w1 >> np.uint32(6)).astype(np.float64)) * _INV_2_53
    a = (w2 >> np.uint32(5)).astype(np.float64) * 67108864.0
    u2 = (a + (w3 >> np.uint32(6)).astype(np.float64)) * _INV_2_53

    radius = np.sqrt(-2.0 * np.log(u1))
    angle = _TWO_PI * u2
    out = np.empty((n_paths, 2 * n_pairs))
    out[:, 0::2] = radius * np.cos(angle)
    out[:, 1::2] = radius * np.sin(angle)
    return out[:, :count]


def brownian_sup_abs(seed, stream, path_start, n_paths, sqrt_dt, dims):
    """Per-path max over grid nodes of the Euclidean norm of B.

    Increments are generated exactly as ``simulate_brownian`` lays them out
    (normal index ``step * dims + k``) so the result matches the stored-batch
    route without materializing the full batch.
    """
    sqrt_dt = np.asarray(sqrt_dt, dtype=np.float64)
    steps = sqrt_dt.shape[0]
    dims = int(dims)
    out = np.empty(int(n_paths))
    for a in range(0, int(n_paths), _CHUNK):
        b = min(a + _CHUNK, int(n_paths))
        z = standard_normals(seed, stream, path_start + a, b - a, steps * dims)
        inc = z.reshape(b - a, steps, dims) * sqrt_dt[None, :, None]
        levels = np.cumsum(inc, axis=1)
        if dims == 1:
            norms = np.abs(levels[:, :, 0])
        else:
            norms = np.sqrt(np.sum(levels * levels, axis=2))
        # B_0 = 0 contributes |B_0| = 0, which never exceeds a norm
        out[a:b] = norms.max(axis=1)
    return out
