"""Kernel backend selection.

The compiled extension (`_core`, built from Cython) is preferred when
importable; otherwise the NumPy/SciPy fallback is used.  Setting the
environment variable REIDFLOW_PURE=1 forces the fallback.  Both backends
implement identical contracts and agree to within floating-point noise;
`tests/test_kernels.py` checks the agreement and `benchmarks/bench_kernels.py`
compares their speed.
"""

from __future__ import annotations

import os

if os.environ.get("REIDFLOW_PURE") == "1":
    from . import _fallback as _impl

    HAVE_EXT = False
else:
    try:
        from . import _core as _impl  # type: ignore[attr-defined]

        HAVE_EXT = True
    except ImportError:
        from . import _fallback as _impl

        HAVE_EXT = False

pairwise_distances = _impl.pairwise_distances
knn_mean_from_matrix = _impl.knn_mean_from_matrix
BACKEND = _impl.BACKEND

__all__ = ["pairwise_distances", "knn_mean_from_matrix", "BACKEND", "HAVE_EXT"]
