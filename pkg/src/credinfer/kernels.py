"""Fused kernel dispatch.

The compiled extension is preferred; the numpy fallback is selected at
import time when the extension was not built. ``BACKEND`` names the
active implementation.
"""

import numpy as np

try:
    from credinfer import _ckernels as _impl

    BACKEND = "cython"
except ImportError:  # extension not built
    from credinfer import _pykernels as _impl

    BACKEND = "python"

__all__ = [
    "BACKEND",
    "gdu_mix",
    "gdu_mix_grad",
    "segment_mean",
    "segment_mean_grad",
    "scatter_add_rows",
    "load_backend",
    "set_backend",
]


def load_backend(name):
    """Return the kernel module called ``name`` ("cython" or "python")."""
    if name == "cython":
        from credinfer import _ckernels

        return _ckernels
    if name == "python":
        from credinfer import _pykernels

        return _pykernels
    raise ValueError(f"unknown kernel backend {name!r}")


def set_backend(name):
    """Make ``name`` the active backend; returns the previously active name."""
    global _impl, BACKEND
    module = load_backend(name)
    previous = BACKEND
    _impl, BACKEND = module, name
    return previous


def _f64(a):
    return np.ascontiguousarray(a, dtype=np.float64)


def _i64(a):
    return np.ascontiguousarray(a, dtype=np.int64)


def _as2d(a):
    a = _f64(a)
    return a.reshape(1, -1) if a.ndim == 1 else a


def gdu_mix(g, r, a, b, c, d, impl=None):
    """g*r*a + (1-g)*r*b + g*(1-r)*c + (1-g)*(1-r)*d, entrywise."""
    impl = impl or _impl
    shape = np.shape(g)
    out = impl.gdu_mix(*(_as2d(x) for x in (g, r, a, b, c, d)))
    return out.reshape(shape)


def gdu_mix_grad(g, r, a, b, c, d, gh, impl=None):
    impl = impl or _impl
    shape = np.shape(g)
    outs = impl.gdu_mix_grad(*(_as2d(x) for x in (g, r, a, b, c, d, gh)))
    return tuple(o.reshape(shape) for o in outs)


def segment_mean(values, indptr, indices, impl=None):
    """Row means of ``values`` over CSR segments; empty segments give zeros."""
    impl = impl or _impl
    return impl.segment_mean(_f64(values), _i64(indptr), _i64(indices))


def segment_mean_grad(grad_out, indptr, indices, n_values, impl=None):
    impl = impl or _impl
    return impl.segment_mean_grad(_f64(grad_out), _i64(indptr), _i64(indices), int(n_values))


def scatter_add_rows(n_rows, idx, src, impl=None):
    """Zero matrix of ``n_rows`` rows with ``src[i]`` added into row ``idx[i]``."""
    impl = impl or _impl
    return impl.scatter_add_rows(int(n_rows), _i64(idx), _f64(src))
