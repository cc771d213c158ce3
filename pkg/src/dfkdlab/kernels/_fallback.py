"""NumPy implementations of the hot kernels.

Same signatures as the compiled core (`_core.pyx`); the package selects one
of the two at import time. All inputs are C-contiguous float64 arrays.
"""

import numpy as np


def relu_fwd(x):
    return np.maximum(x, 0.0)


def relu_bwd(x, g):
    return np.where(x > 0.0, g, 0.0)


def softmax_rows(z):
    """Row softmax with -inf entries mapping to exactly 0.

    Caller guarantees every row has at least one finite entry.
    """
    m = np.max(z, axis=1, keepdims=True)
    e = np.exp(z - m)
    return e / np.sum(e, axis=1, keepdims=True)


def softmax_bwd_rows(p, g):
    dot = np.sum(g * p, axis=1, keepdims=True)
    return p * (g - dot)


def logsumexp_rows(z):
    m = np.max(z, axis=1)
    return m + np.log(np.sum(np.exp(z - m[:, None]), axis=1))


def abs_sum(d):
    return float(np.sum(np.abs(d)))


def sign(d):
    return np.sign(d)


def huber_each(d, delta):
    a = np.abs(d)
    return np.where(a <= delta, 0.5 * d * d, delta * (a - 0.5 * delta))


def huber_grad(d, delta):
    return np.where(np.abs(d) <= delta, d, delta * np.sign(d))


def pairwise_mean_dist(x):
    """psi[i] = mean_{j != i} ||x_i - x_j||_2 for a (N, k) matrix."""
    n = x.shape[0]
    diff = x[:, None, :] - x[None, :, :]
    dmat = np.sqrt(np.sum(diff * diff, axis=2))
    return np.sum(dmat, axis=1) / (n - 1)


def pairwise_mean_dist_bwd(x, gpsi):
    """Gradient of sum_i gpsi[i] * psi[i] w.r.t. x.

    Uses the subgradient 0 for coincident rows (distance 0).
    """
    n = x.shape[0]
    diff = x[:, None, :] - x[None, :, :]
    dmat = np.sqrt(np.sum(diff * diff, axis=2))
    inv = np.zeros_like(dmat)
    np.divide(1.0, dmat, out=inv, where=dmat > 0.0)
    w = (gpsi[:, None] + gpsi[None, :]) * inv
    gx = w.sum(axis=1)[:, None] * x - w @ x
    return gx / (n - 1)
