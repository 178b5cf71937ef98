"""Pure-Python/NumPy versions of the hot kernels.

Every function here has a twin with the same signature in ``_kernels.pyx``.
Output buffers are passed in and filled in place so both backends share
one calling convention.
"""
import numpy as np


def random_walks(indptr, indices, starts, uniforms, walks, lengths):
    """Fill ``walks[i]`` with a truncated walk from ``starts[i]``.

    Step ``s`` picks neighbor ``floor(uniforms[i, s] * deg)``. A walk stops
    early at a node without out-neighbors; unused slots are set to -1.
    """
    n_walks, length = walks.shape
    walks.fill(-1)
    for i in range(n_walks):
        v = int(starts[i])
        walks[i, 0] = v
        n = 1
        while n < length:
            lo = indptr[v]
            deg = indptr[v + 1] - lo
            if deg == 0:
                break
            j = int(uniforms[i, n - 1] * deg)
            if j >= deg:
                j = deg - 1
            v = int(indices[lo + j])
            walks[i, n] = v
            n += 1
        lengths[i] = n


def count_window_pairs(walks, lengths, window):
    total = 0
    for i in range(walks.shape[0]):
        walk = walks[i]
        n = int(lengths[i])
        for a in range(n):
            for b in range(max(0, a - window), min(n, a + window + 1)):
                if a != b and walk[a] != walk[b]:
                    total += 1
    return total


def window_pairs(walks, lengths, window, out):
    """Write (center, context) rows into ``out``; returns rows written."""
    k = 0
    for i in range(walks.shape[0]):
        walk = walks[i]
        n = int(lengths[i])
        for a in range(n):
            for b in range(max(0, a - window), min(n, a + window + 1)):
                if a != b and walk[a] != walk[b]:
                    out[k, 0] = walk[a]
                    out[k, 1] = walk[b]
                    k += 1
    return k


def scatter_add_rows(out, index, rows):
    np.add.at(out, index, rows)


def _sigmoid(x):
    # exp form keeps relative accuracy for very negative x (the tanh form
    # cancels there); the clamp keeps exp finite, as in the compiled kernel
    lim = 80.0 if np.asarray(x).dtype == np.float32 else 700.0
    one = np.asarray(1, dtype=np.asarray(x).dtype)
    return one / (one + np.exp(-np.clip(x, -lim, lim)))


def gru_fwd_gates(pre_rz, h_prev, r, z, rh):
    hdim = h_prev.shape[1]
    r[...] = _sigmoid(pre_rz[:, :hdim])
    z[...] = _sigmoid(pre_rz[:, hdim:])
    np.multiply(r, h_prev, out=rh)


def gru_fwd_blend(pre_c, z, h_prev, mask, c, h_new):
    np.tanh(pre_c, out=c)
    blended = (1.0 - z) * h_prev + z * c
    h_new[...] = np.where(mask[:, None] != 0, blended, h_prev)


def gru_bwd_blend(dh, mask, z, c, h_prev, dc_pre, dz_pre, dh_prev):
    active = (mask != 0)[:, None]
    dz = dh * (c - h_prev)
    dc = dh * z
    dc_pre[...] = np.where(active, dc * (1.0 - c * c), 0.0)
    dz_pre[...] = np.where(active, dz * z * (1.0 - z), 0.0)
    dh_prev[...] = np.where(active, dh * (1.0 - z), dh)


def gru_bwd_reset(d_rh, r, h_prev, dr_pre, dh_prev):
    dr_pre[...] = d_rh * h_prev * r * (1.0 - r)
    dh_prev += d_rh * r
