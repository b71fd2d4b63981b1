"""Dense complex matrix kernels shared by every decision routine.

All functions are pure: they take numpy arrays (interpreted as complex
matrices), never mutate their inputs, and return fresh arrays.  Matrices are
kept in complex128 throughout; everything here is sized for the desk-scale
problems this package targets (dimensions up to a few hundred).
"""

from __future__ import annotations

import numpy as np

from .errors import NotHermitianError, NotPSDError, ShapeError

#: Max-norm tolerance for accepting a matrix as Hermitian.
HERMITIAN_TOL = 1e-10

#: Relative eigenvalue tolerance: eigenvalues in [-psd_tol, 0) are treated
#: as zero, where psd_tol = PSD_TOL_FACTOR * max(1, largest |eigenvalue|).
PSD_TOL_FACTOR = 1e-9


def dagger(a: np.ndarray) -> np.ndarray:
    """Conjugate transpose."""
    return a.conj().T


def hermitian_part(a: np.ndarray) -> np.ndarray:
    """Return (A + A*) / 2."""
    return (a + a.conj().T) / 2


def is_hermitian(a: np.ndarray, tol: float = HERMITIAN_TOL) -> bool:
    """Check ||A - A*||_max <= tol."""
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        return False
    return float(np.abs(a - a.conj().T).max(initial=0.0)) <= tol


def psd_tolerance(eigenvalues: np.ndarray) -> float:
    """Clipping tolerance for eigenvalues of a nominally PSD matrix."""
    scale = float(np.abs(eigenvalues).max(initial=0.0))
    return PSD_TOL_FACTOR * max(1.0, scale)


def herm_eig(h: np.ndarray, *, check: bool = True) -> tuple[np.ndarray, np.ndarray]:
    """Eigendecomposition of a Hermitian matrix, eigenvalues descending.

    Returns (w, V) with H = V @ diag(w) @ V* and the columns of V
    orthonormal.  Degenerate eigenspaces may come back in any orthonormal
    basis; callers must not rely on a particular choice.

    Raises:
        NotHermitianError: if ``check`` and H is not Hermitian within
            HERMITIAN_TOL.
    """
    if h.ndim != 2 or h.shape[0] != h.shape[1]:
        raise ShapeError(f"expected a square matrix, got shape {h.shape}")
    if check and not is_hermitian(h):
        gap = float(np.abs(h - h.conj().T).max())
        raise NotHermitianError(f"matrix is not Hermitian (max deviation {gap:.3e})")
    w, v = np.linalg.eigh(hermitian_part(h))
    return w[::-1].copy(), v[:, ::-1].copy()


def trace_norm(x: np.ndarray) -> float:
    """Sum of the singular values of X."""
    return float(np.linalg.svd(np.asarray(x, dtype=complex), compute_uv=False).sum())


def sqrt_psd(a: np.ndarray) -> np.ndarray:
    """Principal square root of a PSD Hermitian matrix.

    Eigenvalues within the PSD tolerance below zero are clipped to zero;
    anything more negative raises NotPSDError.
    """
    w, v = herm_eig(a)
    tol = psd_tolerance(w)
    if w[-1] < -tol:
        raise NotPSDError(
            f"matrix has eigenvalue {w[-1]:.3e} below -{tol:.1e}",
            min_eigenvalue=float(w[-1]),
        )
    s = np.sqrt(np.clip(w, 0.0, None))
    return hermitian_part((v * s) @ v.conj().T)


def fidelity(a: np.ndarray, b: np.ndarray) -> float:
    """Trace norm of sqrt(A) @ sqrt(B) for PSD Hermitian A, B."""
    return trace_norm(sqrt_psd(a) @ sqrt_psd(b))


def pinv(a: np.ndarray, rcond: float = 1e-12) -> np.ndarray:
    """Moore-Penrose pseudoinverse."""
    return np.linalg.pinv(np.asarray(a, dtype=complex), rcond=rcond)


def hadamard(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Entrywise product of two equal-shape matrices."""
    if a.shape != b.shape:
        raise ShapeError(f"shape mismatch: {a.shape} vs {b.shape}")
    return a * b


def kron(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Kronecker product."""
    return np.kron(a, b)


def partial_trace(m: np.ndarray, dims: tuple[int, int], which: str = "second") -> np.ndarray:
    """Partial trace of a matrix on a bipartite space C^p (x) C^q.

    ``dims = (p, q)`` fixes the factorization; ``which`` selects the factor
    that gets traced out ("second" keeps the p-dimensional factor, "first"
    keeps the q-dimensional one).
    """
    p, q = dims
    if m.shape != (p * q, p * q):
        raise ShapeError(f"matrix shape {m.shape} does not match dims {dims}")
    r = m.reshape(p, q, p, q)
    if which == "second":
        return np.einsum("ijkj->ik", r)
    if which == "first":
        return np.einsum("ijil->jl", r)
    raise ValueError(f"which must be 'first' or 'second', got {which!r}")


def _column_space(a: np.ndarray, tol: float) -> tuple[np.ndarray, np.ndarray, np.ndarray, int]:
    """Full SVD of A plus its numerical rank."""
    u, s, vh = np.linalg.svd(a, full_matrices=True)
    smax = s[0] if s.size else 0.0
    rank = int(np.sum(s > tol * max(smax, 1.0)))
    return u, s, vh, rank


def frame_unitary(x: np.ndarray, y: np.ndarray, *, tol: float = 1e-8) -> np.ndarray:
    """Unitary U with U @ X = Y, given the Gram equality X*X = Y*Y.

    X and Y must have the same shape N x k; the Gram equality guarantees
    such a U exists.  The completion on the orthogonal complements is an
    arbitrary orthonormal choice and callers must not rely on it.

    Raises:
        ShapeError: on shape mismatch or if the Gram matrices differ by
            more than ``tol`` (scaled by the Gram magnitude).
    """
    if x.shape != y.shape:
        raise ShapeError(f"frame shapes differ: {x.shape} vs {y.shape}")
    gx = x.conj().T @ x
    gy = y.conj().T @ y
    scale = max(1.0, float(np.abs(gx).max(initial=0.0)))
    gap = float(np.abs(gx - gy).max(initial=0.0))
    if gap > tol * scale:
        raise ShapeError(f"Gram matrices differ by {gap:.3e}; no exact frame map exists")

    n = x.shape[0]
    ux, sx, vxh, rank = _column_space(x, 1e-12)
    if rank == 0:
        return np.eye(n, dtype=complex)
    vr = vxh[:rank].conj().T                      # k x r
    uy_r = y @ vr / sx[:rank]                     # N x r, orthonormal columns
    # Re-orthonormalize via the polar factor (closest isometry, no column
    # sign flips): Y's tiny Gram mismatch perturbs uy_r.
    g = uy_r.conj().T @ uy_r
    wg, vg = np.linalg.eigh(hermitian_part(g))
    inv_sqrt = (vg / np.sqrt(np.clip(wg, 1e-30, None))) @ vg.conj().T
    uy_r = uy_r @ inv_sqrt
    uy_full, _, _, _ = _column_space(y, 1e-12)
    uy = np.hstack([uy_r, uy_full[:, rank:]])
    uxf = np.hstack([ux[:, :rank], ux[:, rank:]])
    return uy @ uxf.conj().T


def complete_isometry(v: np.ndarray) -> np.ndarray:
    """Extend an isometry (orthonormal columns) to a full unitary.

    Returns a square unitary whose first ``v.shape[1]`` columns equal V.
    """
    n, k = v.shape
    if k > n:
        raise ShapeError(f"cannot complete a {n}x{k} matrix with k > n")
    u, _, _, _ = _column_space(v, 1e-12)
    out = np.hstack([v, u[:, k:]])
    # Guard: the input must actually be an isometry for the result to be
    # unitary, up to the input's own deviation.
    return out
