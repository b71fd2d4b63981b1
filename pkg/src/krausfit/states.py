"""Quantum-state types: validation, spectral factorization, purification.

Purifications are stored as r stacked blocks of length m (ancilla index
outer), so a purification vector y of a state B satisfies
sum_j y_j y_j* = B over its blocks.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import linalg
from .errors import (
    LinearlyDependentError,
    NotPSDError,
    ShapeError,
    TraceNotOneError,
)

TRACE_TOL = 1e-9
GRAM_DEP_TOL = 1e-10


def validate_density(m: np.ndarray, *, trace_tol: float = TRACE_TOL) -> np.ndarray:
    """Validate a density matrix (Hermitian, PSD, trace one); return a copy.

    Raises:
        NotHermitianError, NotPSDError, TraceNotOneError.
    """
    m = np.asarray(m, dtype=complex)
    w, _ = linalg.herm_eig(m)
    tol = linalg.psd_tolerance(w)
    if w[-1] < -tol:
        raise NotPSDError(
            f"state has eigenvalue {w[-1]:.3e}", min_eigenvalue=float(w[-1])
        )
    tr = complex(np.trace(m))
    if abs(tr - 1.0) > trace_tol:
        raise TraceNotOneError(f"state has trace {tr:.12g}", trace=tr)
    return linalg.hermitian_part(m)


def fix_global_phase(x: np.ndarray, tol: float = 1e-12) -> np.ndarray:
    """Rotate a vector so its first nonzero component is real positive."""
    x = np.asarray(x, dtype=complex)
    norm = np.linalg.norm(x)
    if norm == 0:
        return x.copy()
    for xi in x:
        if abs(xi) > tol * norm:
            return x * (abs(xi) / xi)
    return x.copy()


def as_pure_state(a: np.ndarray, tol: float = 1e-8) -> np.ndarray | None:
    """Extract x with A = x x* if A is rank one within tolerance, else None.

    The returned vector keeps A's scale (||x||^2 = tr A) and has its global
    phase fixed.
    """
    w, v = linalg.herm_eig(a)
    scale = max(1.0, float(w[0]))
    if w[0] <= 0 or (a.shape[0] > 1 and abs(w[1]) > tol * scale):
        return None
    return fix_global_phase(np.sqrt(w[0]) * v[:, 0])


@dataclass(frozen=True)
class SpectralFactor:
    """Rank-revealing factorization A = basis @ diag(sqrt_eigs)^2 @ basis*.

    ``basis`` is n x r with orthonormal columns; ``sqrt_eigs`` holds the
    square roots of the positive eigenvalues, descending.
    """

    basis: np.ndarray
    sqrt_eigs: np.ndarray

    @property
    def rank(self) -> int:
        return self.sqrt_eigs.size

    def reconstruct(self) -> np.ndarray:
        return (self.basis * self.sqrt_eigs**2) @ self.basis.conj().T


def spectral_factor(a: np.ndarray) -> SpectralFactor:
    """Factor a PSD matrix into its positive eigenspace, zeros dropped."""
    w, v = linalg.herm_eig(a)
    tol = linalg.psd_tolerance(w)
    if w.size and w[-1] < -tol:
        raise NotPSDError(
            f"matrix has eigenvalue {w[-1]:.3e}", min_eigenvalue=float(w[-1])
        )
    keep = w > tol
    basis = v[:, keep]
    for j in range(basis.shape[1]):
        basis[:, j] = fix_global_phase(basis[:, j])
    return SpectralFactor(basis=basis, sqrt_eigs=np.sqrt(w[keep]))


@dataclass(frozen=True)
class Purification:
    """Vector in C^(m*r) whose blocks reduce to a given m x m state."""

    ancilla_dim: int
    vector: np.ndarray

    @property
    def system_dim(self) -> int:
        return self.vector.size // self.ancilla_dim

    def blocks(self) -> np.ndarray:
        """View as an (r, m) array of stacked blocks."""
        return self.vector.reshape(self.ancilla_dim, self.system_dim)

    def reduce(self) -> np.ndarray:
        """Sum of block outer products; equals the purified state."""
        b = self.blocks()
        return b.T @ b.conj()


def purify(
    a: np.ndarray, ancilla_dim: int, isometry: np.ndarray | None = None
) -> Purification:
    """Purify a density matrix into C^m (x) C^r, r = ``ancilla_dim``.

    With eigenpairs (lambda_k, v_k) of A, returns the vector
    sum_k sqrt(lambda_k) (W v_k) (x) v_k where W is a partial isometry from
    C^m to C^r acting isometrically on A's range.  ``isometry=None`` picks
    the identity embedding when r >= m (the canonical choice) and the map
    v_k -> e_k otherwise.

    Raises:
        ShapeError: if r < rank(A) or the given W is not a partial isometry
            on A's range.
    """
    m = a.shape[0]
    factor = spectral_factor(a)
    rank = factor.rank
    if ancilla_dim < rank:
        raise ShapeError(f"ancilla dimension {ancilla_dim} below rank {rank}")
    if isometry is None:
        if ancilla_dim >= m:
            w = np.zeros((ancilla_dim, m), dtype=complex)
            w[:m, :m] = np.eye(m)
        else:
            w = np.zeros((ancilla_dim, m), dtype=complex)
            for k in range(rank):
                w[k] = factor.basis[:, k].conj()
    else:
        w = np.asarray(isometry, dtype=complex)
        if w.shape != (ancilla_dim, m):
            raise ShapeError(f"isometry shape {w.shape} != ({ancilla_dim}, {m})")
        mapped = w @ factor.basis
        gram = mapped.conj().T @ mapped
        if np.abs(gram - np.eye(rank)).max(initial=0.0) > 1e-8:
            raise ShapeError("matrix does not act isometrically on the state's range")

    vec = np.zeros(ancilla_dim * m, dtype=complex)
    for k in range(rank):
        vec += factor.sqrt_eigs[k] * np.kron(w @ factor.basis[:, k], factor.basis[:, k])
    return Purification(ancilla_dim=ancilla_dim, vector=vec)


def _smallest_root_det_pencil(a: np.ndarray, b: np.ndarray) -> float:
    """Smallest nonnegative root of det(A - c B) for 2x2 Hermitian A, B.

    det(A - cB) = det(A) - c (tr A tr B - tr AB) + c^2 det(B); for density
    matrices the root exists in [0, 1].
    """
    det_a = float(np.linalg.det(a).real)
    det_b = float(np.linalg.det(b).real)
    lin = float((np.trace(a) * np.trace(b) - np.trace(a @ b)).real)
    if abs(det_b) < 1e-14:
        if abs(lin) < 1e-14:
            raise LinearlyDependentError("degenerate pencil: det(A - cB) constant")
        c = det_a / lin
        return max(c, 0.0)
    disc = lin * lin - 4.0 * det_b * det_a
    disc = max(disc, 0.0)
    roots = [(lin - np.sqrt(disc)) / (2 * det_b), (lin + np.sqrt(disc)) / (2 * det_b)]
    nonneg = [r for r in sorted(roots) if r >= -1e-12]
    if not nonneg:
        raise LinearlyDependentError("det pencil has no nonnegative root")
    return max(nonneg[0], 0.0)


@dataclass(frozen=True)
class QubitPairReduction:
    """Bookkeeping for rewriting a qubit pair as pure states.

    x1 x1* = (A1 - c A2) / scale1 and x2 x2* = (A2 - c_tilde x1 x1*) / scale2.
    Applying the same combinations to a target pair preserves interpolation
    feasibility for trace-preserving CP maps.
    """

    x1: np.ndarray
    x2: np.ndarray
    c: float
    scale1: float
    c_tilde: float
    scale2: float

    def reduce_targets(self, b1: np.ndarray, b2: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Apply the recorded combinations to a target pair."""
        b1r = (b1 - self.c * b2) / self.scale1
        b2r = (b2 - self.c_tilde * b1r) / self.scale2
        return linalg.hermitian_part(b1r), linalg.hermitian_part(b2r)

    def expand_targets(self, b1r: np.ndarray, b2r: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Invert ``reduce_targets``."""
        b2 = self.scale2 * b2r + self.c_tilde * b1r
        b1 = self.scale1 * b1r + self.c * b2
        return b1, b2


def reduce_against_pure(a: np.ndarray, x: np.ndarray) -> tuple[np.ndarray, float, float]:
    """Subtract the largest PSD-preserving multiple of x x* from a 2x2 state.

    Returns (x_new, c, scale) with x_new x_new* = (A - c x x*) / scale; the
    difference is rank one by the choice of c.

    Raises:
        LinearlyDependentError: if A is (numerically) the projector x x*.
    """
    p = np.outer(x, x.conj())
    c = _smallest_root_det_pencil(a, p)
    scale = 1.0 - c
    if scale <= 1e-12:
        raise LinearlyDependentError("state equals the subtracted projector")
    reduced = (a - c * p) / scale
    x_new = as_pure_state(reduced, tol=1e-7)
    if x_new is None:
        raise LinearlyDependentError("reduction did not reach rank one")
    return x_new / np.linalg.norm(x_new), c, scale


def reduce_qubit_pair(a1: np.ndarray, a2: np.ndarray) -> QubitPairReduction:
    """Rewrite two independent qubit densities as pure states.

    Subtracts the largest multiple of A2 from A1 that keeps it PSD (which
    leaves a rank-one matrix), then does the same to A2 against the first
    pure state.  Each difference is renormalized to trace one; the
    coefficients are recorded so the same combinations can be applied to a
    target pair.

    Raises:
        LinearlyDependentError: if the Gram determinant of {A1, A2} falls
            below 1e-10.
    """
    if a1.shape != (2, 2) or a2.shape != (2, 2):
        raise ShapeError("qubit reduction needs 2x2 matrices")
    g11 = float(np.trace(a1 @ a1).real)
    g12 = complex(np.trace(a1 @ a2))
    g22 = float(np.trace(a2 @ a2).real)
    gram_det = g11 * g22 - abs(g12) ** 2
    if gram_det < GRAM_DEP_TOL:
        raise LinearlyDependentError(
            f"states are linearly dependent (Gram det {gram_det:.3e})"
        )

    c = _smallest_root_det_pencil(a1, a2)
    scale1 = 1.0 - c
    if scale1 <= 1e-12:
        raise LinearlyDependentError("first reduction consumed the whole state")
    t1 = (a1 - c * a2) / scale1
    x1 = as_pure_state(t1, tol=1e-7)
    if x1 is None:
        raise LinearlyDependentError("first reduction did not reach rank one")
    x1 = x1 / np.linalg.norm(x1)

    p1 = np.outer(x1, x1.conj())
    c_tilde = _smallest_root_det_pencil(a2, p1)
    scale2 = 1.0 - c_tilde
    if scale2 <= 1e-12:
        raise LinearlyDependentError("second reduction consumed the whole state")
    t2 = (a2 - c_tilde * p1) / scale2
    x2 = as_pure_state(t2, tol=1e-7)
    if x2 is None:
        raise LinearlyDependentError("second reduction did not reach rank one")
    x2 = x2 / np.linalg.norm(x2)

    return QubitPairReduction(
        x1=x1, x2=x2, c=c, scale1=scale1, c_tilde=c_tilde, scale2=scale2
    )
