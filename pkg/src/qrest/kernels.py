"""Hot-kernel dispatch: compiled extension when available, numpy otherwise.

Set ``QREST_PURE_PYTHON=1`` to force the numpy path (used by the benchmark
and by the equivalence tests).
"""
import os

import numpy as np

from . import _fallback

BACKEND = "python"
_impl = _fallback

if os.environ.get("QREST_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _ext as _impl  # type: ignore[no-redef]

        BACKEND = "cython"
    except ImportError:  # extension not built
        _impl = _fallback


def schur_complement(ptr, rows, cols, vals, w, backend=None):
    impl = _pick(backend)
    return impl.schur_complement(
        np.ascontiguousarray(ptr, dtype=np.int64),
        np.ascontiguousarray(rows, dtype=np.int64),
        np.ascontiguousarray(cols, dtype=np.int64),
        np.ascontiguousarray(vals, dtype=float),
        np.ascontiguousarray(w, dtype=float),
    )


def smo_solve(k, p, z, cap, tol, max_iter, backend=None):
    impl = _pick(backend)
    return impl.smo_solve(
        np.ascontiguousarray(k, dtype=float),
        np.ascontiguousarray(p, dtype=float),
        np.ascontiguousarray(z, dtype=float),
        np.ascontiguousarray(cap, dtype=float),
        float(tol),
        int(max_iter),
    )


def _pick(backend):
    if backend is None:
        return _impl
    if backend == "python":
        return _fallback
    if backend == "cython":
        from . import _ext

        return _ext
    raise ValueError(f"unknown backend {backend!r}")
