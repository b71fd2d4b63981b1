"""Pure-numpy reference implementation of the hot projection kernel."""

from __future__ import annotations

import numpy as np

BACKEND = "python"


def psd_project(h: np.ndarray) -> np.ndarray:
    """Frobenius-nearest PSD matrix to the Hermitian part of ``h``.

    Negative eigenvalues are clipped at exactly zero.  When only a few
    eigenvalues are negative (the common case near convergence of an
    alternating-projection loop) the negative part is subtracted instead of
    rebuilding the whole matrix.
    """
    a = (h + h.conj().T) * 0.5
    w, v = np.linalg.eigh(a)
    if w[0] >= 0.0:
        return a
    neg = w < 0.0
    vn = v[:, neg]
    out = a - (vn * w[neg]) @ vn.conj().T
    return (out + out.conj().T) * 0.5
