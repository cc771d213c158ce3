"""Hot-loop kernels with a compiled core and a NumPy fallback.

The compiled Cython core (`dfkdlab.kernels._core`) is used when it was built
for this installation; otherwise the NumPy implementations in `_fallback`
take over. Set ``DFKDLAB_PURE_PYTHON=1`` to force the fallback (used by the
benchmark and the backend-parity tests).

Both backends expose the same functions; `BACKEND` names the active one.
"""

import os

from . import _fallback

if os.environ.get("DFKDLAB_PURE_PYTHON") == "1":
    _impl = _fallback
    BACKEND = "fallback"
else:
    try:
        from . import _core as _impl
        BACKEND = "compiled"
    except ImportError:
        _impl = _fallback
        BACKEND = "fallback"

relu_fwd = _impl.relu_fwd
relu_bwd = _impl.relu_bwd
softmax_rows = _impl.softmax_rows
softmax_bwd_rows = _impl.softmax_bwd_rows
logsumexp_rows = _impl.logsumexp_rows
abs_sum = _impl.abs_sum
sign = _impl.sign
huber_each = _impl.huber_each
huber_grad = _impl.huber_grad
pairwise_mean_dist = _impl.pairwise_mean_dist
pairwise_mean_dist_bwd = _impl.pairwise_mean_dist_bwd

__all__ = [
    "BACKEND",
    "relu_fwd",
    "relu_bwd",
    "softmax_rows",
    "softmax_bwd_rows",
    "logsumexp_rows",
    "abs_sum",
    "sign",
    "huber_each",
    "huber_grad",
    "pairwise_mean_dist",
    "pairwise_mean_dist_bwd",
]
