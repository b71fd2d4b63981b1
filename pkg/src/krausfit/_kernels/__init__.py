"""Hot projection kernels with a compiled core and a numpy fallback.

The compiled extension (Cython + direct LAPACK calls) is preferred when it
imported cleanly at build time; set ``KRAUSFIT_PURE_PYTHON=1`` to force the
numpy implementation.  Both expose the same API and agree to rounding.
"""

import os

if os.environ.get("KRAUSFIT_PURE_PYTHON"):
    from ._ref import BACKEND, psd_project
else:
    try:
        from ._core import BACKEND, psd_project  # type: ignore[attr-defined]
    except ImportError:
        from ._ref import BACKEND, psd_project

__all__ = ["BACKEND", "psd_project"]
