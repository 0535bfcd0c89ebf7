"""Hot loops over the meter grid.

The compiled extension is used when it was built and importable; otherwise
the numpy implementation is used. Set ``WVAFISHER_PURE_PYTHON=1`` to force
the fallback.
"""

import os

from . import _pykernels as python_backend

compiled_backend = None
if not os.environ.get("WVAFISHER_PURE_PYTHON"):
    try:
        from . import _ckernels as compiled_backend
    except ImportError:  # extension not built
        compiled_backend = None

_impl = compiled_backend if compiled_backend is not None else python_backend
BACKEND = "cython" if compiled_backend is not None else "python"

projection_sums = _impl.projection_sums
cell_amplitudes = _impl.cell_amplitudes
cell_probabilities = _impl.cell_probabilities
loglik_counts = _impl.loglik_counts

__all__ = ["BACKEND", "projection_sums", "cell_amplitudes", "cell_probabilities",
           "loglik_counts", "python_backend", "compiled_backend"]
