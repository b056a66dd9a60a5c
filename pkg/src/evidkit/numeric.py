"""Small numerical helpers shared by the layer and training modules."""

from __future__ import annotations

import numpy as np


def sigmoid(z):
    """Logistic function, stable for large |z|."""
    z = np.asarray(z, dtype=float)
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def logit(p):
    """Inverse of sigmoid; maps 0 and 1 to -inf and +inf."""
    p = np.asarray(p, dtype=float)
    with np.errstate(divide="ignore"):
        return np.log(p) - np.log1p(-p)


def softmax_rows(z):
    """Row-wise softmax; -inf entries yield exact zeros."""
    z = np.asarray(z, dtype=float)
    m = np.max(z, axis=-1, keepdims=True)
    e = np.exp(z - m)
    return e / e.sum(axis=-1, keepdims=True)


def log_rows(p, floor=0.0):
    """Elementwise log tolerating exact zeros (maps them to -inf or log(floor))."""
    p = np.asarray(p, dtype=float)
    if floor > 0.0:
        p = np.maximum(p, floor)
    with np.errstate(divide="ignore"):
        return np.log(p)


def leave_one_out_prod(a, axis):
    """For each index along `axis`, the product of all other entries.

    Uses prefix/suffix cumulative products, so zeros in `a` are handled
    exactly (no division).
    """
    b = np.moveaxis(np.asarray(a, dtype=float), axis, 0)
    n = b.shape[0]
    fwd = np.ones_like(b)
    bwd = np.ones_like(b)
    if n > 1:
        fwd[1:] = np.cumprod(b[:-1], axis=0)
        bwd[:-1] = np.cumprod(b[::-1], axis=0)[:-1][::-1]
    return np.moveaxis(fwd * bwd, 0, axis)
