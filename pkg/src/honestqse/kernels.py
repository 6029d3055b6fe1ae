"""Kernel dispatch: the Cython extension when built, the numpy fallback otherwise.

Set ``HONESTQSE_PURE_PYTHON=1`` to force the fallback.
"""

import os

import numpy as np

from . import _kernels_py

if os.environ.get("HONESTQSE_PURE_PYTHON"):
    _ext = None
else:
    try:
        from . import _kernels as _ext
    except ImportError:
        _ext = None

BACKEND = "cython" if _ext is not None else "python"
_impl = _ext if _ext is not None else _kernels_py


def log_likelihoods(particles, effects, counts, backend=None):
    """Per-particle ``sum_k counts[k] ln Tr(E_k rho)``; ``-inf`` where a factor is <= 1e-15."""
    impl = _pick(backend)
    return impl.log_likelihoods(
        np.ascontiguousarray(particles, dtype=complex),
        np.ascontiguousarray(effects, dtype=complex),
        np.ascontiguousarray(counts, dtype=float),
    )


def sample_outcomes(probs, uniforms, backend=None):
    """Inverse-CDF sampling of outcome indices from one distribution."""
    cdf = np.cumsum(np.asarray(probs, dtype=float))
    cdf /= cdf[-1]
    return _pick(backend).sample_outcomes(cdf, np.ascontiguousarray(uniforms, dtype=float))


def systematic_resample(weights, u, backend=None):
    return _pick(backend).systematic_resample(np.ascontiguousarray(weights, dtype=float), float(u))


def _pick(backend):
    if backend is None:
        return _impl
    if backend == "python":
        return _kernels_py
    if backend == "cython":
        if _ext is None:
            raise ImportError("the compiled honestqse._kernels extension is not available")
        return _ext
    raise ValueError(f"unknown kernel backend {backend!r}")
