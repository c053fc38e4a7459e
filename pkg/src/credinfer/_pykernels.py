"""Pure numpy versions of the fused kernels.

Used when the compiled ``_ckernels`` extension is not available. Both
modules expose the same functions with the same argument conventions:
2-D C-contiguous float64 arrays and int64 index arrays.
"""

import numpy as np


def gdu_mix(g, r, a, b, c, d):
    # nested interpolation: a gate drops out bitwise when its two branches are equal
    p = b + g * (a - b)
    q = d + g * (c - d)
    return q + r * (p - q)


def gdu_mix_grad(g, r, a, b, c, d, gh):
    ng = 1.0 - g
    nr = 1.0 - r
    p = b + g * (a - b)
    q = d + g * (c - d)
    dg = gh * (r * (a - b) + nr * (c - d))
    dr = gh * (p - q)
    return dg, dr, gh * g * r, gh * ng * r, gh * g * nr, gh * ng * nr


def segment_mean(values, indptr, indices):
    n_seg = len(indptr) - 1
    out = np.zeros((n_seg, values.shape[1]))
    counts = np.diff(indptr)
    if len(indices) == 0:
        return out
    seg = np.repeat(np.arange(n_seg), counts)
    np.add.at(out, seg, values[indices])
    nz = counts > 0
    out[nz] /= counts[nz, None]
    return out


def segment_mean_grad(grad_out, indptr, indices, n_values):
    counts = np.diff(indptr)
    seg = np.repeat(np.arange(len(counts)), counts)
    scaled = np.zeros_like(grad_out)
    nz = counts > 0
    scaled[nz] = grad_out[nz] / counts[nz, None]
    return scatter_add_rows(n_values, indices, scaled[seg])


def scatter_add_rows(n_rows, idx, src):
    out = np.zeros((n_rows, src.shape[1]))
    np.add.at(out, idx, src)
    return out
