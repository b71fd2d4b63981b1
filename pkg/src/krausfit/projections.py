"""Convex feasibility by Dykstra's alternating projections.

The variable is a tuple of Hermitian blocks, flattened into a real vector by
an isometric vectorization (Frobenius inner product maps to the Euclidean
one).  Feasibility problems are posed as an affine set (built from any
affine residual function by evaluating it on basis vectors) intersected with
one PSD cone per chosen block.  Dykstra's correction terms are kept for the
cones only; none are needed for the affine set.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Optional, Sequence

import numpy as np

from ._kernels import psd_project

_SQRT2 = np.sqrt(2.0)


class HermitianVectorizer:
    """Isometric real vectorization of Hermitian dim x dim matrices."""

    def __init__(self, dim: int):
        self.dim = dim
        self.dof = dim * dim
        self._iu = np.triu_indices(dim, k=1)
        self._ndiag = dim
        self._noff = dim * (dim - 1) // 2

    def to_vec(self, h: np.ndarray) -> np.ndarray:
        off = h[self._iu]
        return np.concatenate(
            [np.diagonal(h).real, _SQRT2 * off.real, _SQRT2 * off.imag]
        )

    def to_vec_batch(self, h: np.ndarray) -> np.ndarray:
        """Vectorize a stack of Hermitian matrices, shape (batch, dim, dim)."""
        idx = np.arange(self.dim)
        off = h[:, self._iu[0], self._iu[1]]
        return np.concatenate(
            [h[:, idx, idx].real, _SQRT2 * off.real, _SQRT2 * off.imag], axis=1
        )

    def to_mat(self, x: np.ndarray) -> np.ndarray:
        n, k = self._ndiag, self._noff
        h = np.zeros((n, n), dtype=complex)
        np.fill_diagonal(h, x[:n])
        vals = (x[n : n + k] + 1j * x[n + k :]) / _SQRT2
        h[self._iu] = vals
        h[(self._iu[1], self._iu[0])] = vals.conj()
        return h


@lru_cache(maxsize=64)
def vectorizer(dim: int) -> HermitianVectorizer:
    return HermitianVectorizer(dim)


@lru_cache(maxsize=32)
def hermitian_basis(dim: int) -> np.ndarray:
    """Stack of the dim^2 Hermitian basis matrices matching the vectorizer."""
    hv = vectorizer(dim)
    out = np.empty((hv.dof, dim, dim), dtype=complex)
    unit = np.zeros(hv.dof)
    for z in range(hv.dof):
        unit[z] = 1.0
        out[z] = hv.to_mat(unit)
        unit[z] = 0.0
    return out


class BlockSpace:
    """Product of Hermitian matrix spaces, flattened to one real vector."""

    def __init__(self, dims: Sequence[int]):
        self.dims = tuple(dims)
        self.vecs = [vectorizer(d) for d in self.dims]
        self.offsets = np.concatenate([[0], np.cumsum([v.dof for v in self.vecs])])
        self.dof = int(self.offsets[-1])

    def to_vec(self, blocks: Sequence[np.ndarray]) -> np.ndarray:
        return np.concatenate([v.to_vec(b) for v, b in zip(self.vecs, blocks)])

    def to_blocks(self, x: np.ndarray) -> list[np.ndarray]:
        return [
            v.to_mat(x[self.offsets[i] : self.offsets[i + 1]])
            for i, v in enumerate(self.vecs)
        ]

    def block_slice(self, i: int) -> slice:
        return slice(int(self.offsets[i]), int(self.offsets[i + 1]))


class AffineSet:
    """Affine set {x : L x = b} with a precomputed least-squares projector.

    Each projection costs two matrix-vector products.  ``inconsistency`` is
    the residual of the least-squares solution: an empty affine set shows up
    as a meaningfully nonzero value.
    """

    def __init__(self, space: BlockSpace, matrix: np.ndarray, rhs: np.ndarray,
                 rcond: float = 1e-12):
        self.space = space
        self.matrix = np.asarray(matrix, dtype=float)
        self.rhs = np.asarray(rhs, dtype=float)
        self.pinv = np.linalg.pinv(self.matrix, rcond=rcond)
        x_ls = self.pinv @ self.rhs
        self.min_norm_point = x_ls
        self.inconsistency = float(np.linalg.norm(self.matrix @ x_ls - self.rhs))

    @classmethod
    def from_residual(
        cls,
        space: BlockSpace,
        residual: Callable[[list[np.ndarray]], np.ndarray],
        rcond: float = 1e-12,
    ) -> "AffineSet":
        """Build the set from any affine residual function (its zero locus).

        The constraint matrix comes from evaluating the residual on every
        basis vector of the block space; meant for small spaces.
        """
        zero_blocks = [np.zeros((d, d), dtype=complex) for d in space.dims]
        r0 = np.asarray(residual(zero_blocks), dtype=float)
        cols = np.empty((r0.size, space.dof))
        basis = np.zeros(space.dof)
        for j in range(space.dof):
            basis[j] = 1.0
            cols[:, j] = residual(space.to_blocks(basis)) - r0
            basis[j] = 0.0
        return cls(space, cols, -r0, rcond=rcond)

    def is_consistent(self, tol: float = 1e-9) -> bool:
        scale = 1.0 + float(np.linalg.norm(self.rhs))
        return self.inconsistency <= tol * scale

    def project(self, x: np.ndarray) -> np.ndarray:
        return x - self.pinv @ (self.matrix @ x - self.rhs)

    def residual_norm(self, x: np.ndarray) -> float:
        return float(np.linalg.norm(self.matrix @ x - self.rhs))


@dataclass
class FeasibilityOptions:
    max_iter: int = 20000
    feasible_tol: float = 1e-7
    infeasible_gap: float = 1e-5
    stall_window: int = 500
    stall_decrease: float = 1e-10
    check_every: int = 25
    #: Convergence target for the inter-set gap; iteration continues below
    #: feasible_tol down to this target while progress lasts.
    gap_goal: float = 1e-10


@dataclass
class FeasibilityResult:
    status: str  # "feasible" | "infeasible" | "indeterminate"
    blocks: list[np.ndarray] = field(default_factory=list)
    payload: object = None
    residual: float = float("inf")
    gap: float = float("inf")
    iterations: int = 0


def _cone_residual(space: BlockSpace, blocks: list[np.ndarray], cone_blocks) -> float:
    acc = 0.0
    for i in cone_blocks:
        d = blocks[i] - psd_project(blocks[i])
        acc += float(np.linalg.norm(d)) ** 2
    return float(np.sqrt(acc))


def dykstra_feasibility(
    space: BlockSpace,
    affine: AffineSet,
    cone_blocks: Sequence[int],
    start_blocks: Sequence[np.ndarray],
    options: FeasibilityOptions | None = None,
    on_candidate: Optional[Callable[[list[np.ndarray], str], object]] = None,
) -> FeasibilityResult:
    """Decide whether the affine set meets the PSD cones on ``cone_blocks``.

    Every cycle projects onto each cone (with Dykstra corrections) and then
    onto the affine set, so the tracked iterate always satisfies the affine
    constraints exactly; the reported residual is its exact Frobenius
    distance to the cones.  A Douglas-Rachford sidecar supplies a second
    stream of candidate points.  ``on_candidate(blocks, kind)`` is called at
    checkpoints with kind "shadow" (DR cone point) or "iterate" (Dykstra
    affine point); returning a truthy payload accepts the point and ends
    the run.  Status "infeasible" means the inter-set gap stalled above
    ``infeasible_gap``.
    """
    opts = options or FeasibilityOptions()
    if not affine.is_consistent():
        return FeasibilityResult(
            status="infeasible",
            residual=affine.inconsistency,
            gap=affine.inconsistency,
            iterations=0,
        )

    def cone_project_vec(v: np.ndarray) -> np.ndarray:
        out = v.copy()
        for i in cone_blocks:
            sl = space.block_slice(i)
            out[sl] = space.vecs[i].to_vec(psd_project(space.vecs[i].to_mat(v[sl])))
        return out

    x = affine.project(space.to_vec(list(start_blocks)))
    corrections = {i: np.zeros(space.vecs[i].dof) for i in cone_blocks}
    # Douglas-Rachford sidecar: its shadow sequence often reaches the
    # intersection orders of magnitude sooner on tangential instances, and
    # feeds the (independently verified) candidate hook; verdicts still
    # come from the Dykstra gap.
    x_dr = x.copy()
    shadow = cone_project_vec(x_dr)
    gaps = np.empty(opts.max_iter)
    best_resid = float("inf")

    for t in range(opts.max_iter):
        for i in cone_blocks:
            sl = space.block_slice(i)
            y = x[sl] + corrections[i]
            z = space.vecs[i].to_vec(psd_project(space.vecs[i].to_mat(y)))
            corrections[i] = y - z
            x[sl] = z
        x_new = affine.project(x)
        gap = float(np.linalg.norm(x_new - x))
        x = x_new
        gaps[t] = gap

        x_dr = x_dr + affine.project(2.0 * shadow - x_dr) - shadow
        shadow = cone_project_vec(x_dr)

        check_now = (t + 1) % opts.check_every == 0
        if check_now:
            blocks = space.to_blocks(x)
            resid = _cone_residual(space, blocks, cone_blocks)
            best_resid = min(best_resid, resid)
            shadow_blocks = space.to_blocks(shadow)
            shadow_resid = affine.residual_norm(shadow)
            if on_candidate is not None:
                # Candidates may succeed well before the Dykstra iterate
                # reaches tolerance.
                for cand, cand_resid, kind in (
                    (shadow_blocks, shadow_resid, "shadow"),
                    (blocks, resid, "iterate"),
                ):
                    payload = on_candidate(cand, kind)
                    if payload is not None:
                        return FeasibilityResult(
                            "feasible", cand, payload, cand_resid, gap, t + 1
                        )
            else:
                if shadow_resid <= opts.feasible_tol:
                    return FeasibilityResult(
                        "feasible", shadow_blocks, None, shadow_resid, gap, t + 1
                    )
                if resid <= opts.feasible_tol:
                    return FeasibilityResult(
                        "feasible", blocks, None, resid, gap, t + 1
                    )
            if gap <= opts.gap_goal and resid <= opts.feasible_tol:
                # Converged but the candidate was never accepted.
                return FeasibilityResult(
                    "indeterminate", blocks, None, resid, gap, t + 1
                )

        if t >= opts.stall_window:
            if gaps[t - opts.stall_window] - gap <= opts.stall_decrease:
                blocks = space.to_blocks(x)
                resid = _cone_residual(space, blocks, cone_blocks)
                if resid > opts.infeasible_gap:
                    return FeasibilityResult(
                        "infeasible", blocks, None, resid, gap, t + 1
                    )
                status = "indeterminate"
                if resid <= opts.feasible_tol and on_candidate is not None:
                    payload = on_candidate(blocks, "iterate")
                    if payload is not None:
                        return FeasibilityResult(
                            "feasible", blocks, payload, resid, gap, t + 1
                        )
                return FeasibilityResult(status, blocks, None, resid, gap, t + 1)

    blocks = space.to_blocks(x)
    resid = _cone_residual(space, blocks, cone_blocks)
    status = "indeterminate" if resid > opts.feasible_tol else "feasible"
    payload = None
    if status == "feasible" and on_candidate is not None:
        payload = on_candidate(blocks, "iterate")
        if payload is None:
            status = "indeterminate"
    return FeasibilityResult(status, blocks, payload, resid, gaps[-1], opts.max_iter)
