"""Kraus channels, Choi matrices, and feasibility certificates.

Index convention, frozen by the round-trip tests: the Choi matrix J lives on
(input (x) output), J = sum_ij E_ij (x) T(E_ij), and a Kraus operator
F (m x n) corresponds to the column-stacked vector w with F[a, b] = w[b*m + a].
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import linalg
from .errors import NotPSDError, ShapeError

FEASIBLE = "FEASIBLE"
INFEASIBLE = "INFEASIBLE"
INDETERMINATE = "INDETERMINATE"

#: Map classes accepted throughout the package.
MAP_CLASSES = ("CP", "TPCP", "UCP", "UTPCP")

CLASS_TOL = 1e-8
VERIFY_TOL = 1e-7


@dataclass(frozen=True)
class KrausChannel:
    """Operator-sum representation X -> sum_j F_j X F_j* with F_j m x n."""

    operators: tuple[np.ndarray, ...]

    def __post_init__(self):
        if not self.operators:
            raise ShapeError("a channel needs at least one Kraus operator")
        shape = self.operators[0].shape
        if any(op.shape != shape for op in self.operators):
            raise ShapeError("Kraus operators must share a common shape")

    @property
    def in_dim(self) -> int:
        return self.operators[0].shape[1]

    @property
    def out_dim(self) -> int:
        return self.operators[0].shape[0]

    def tp_defect(self) -> float:
        """Frobenius distance of sum F_j* F_j from the identity."""
        acc = sum(op.conj().T @ op for op in self.operators)
        return float(np.linalg.norm(acc - np.eye(self.in_dim)))

    def unital_defect(self) -> float:
        """Frobenius distance of sum F_j F_j* from the identity."""
        acc = sum(op @ op.conj().T for op in self.operators)
        return float(np.linalg.norm(acc - np.eye(self.out_dim)))

    def is_trace_preserving(self, tol: float = CLASS_TOL) -> bool:
        return self.tp_defect() <= tol

    def is_unital(self, tol: float = CLASS_TOL) -> bool:
        return self.unital_defect() <= tol


@dataclass(frozen=True)
class ChoiMatrix:
    """Choi matrix of a linear map M_n -> M_m on (input (x) output)."""

    in_dim: int
    out_dim: int
    matrix: np.ndarray

    def __post_init__(self):
        n, m = self.in_dim, self.out_dim
        if self.matrix.shape != (n * m, n * m):
            raise ShapeError(
                f"Choi matrix shape {self.matrix.shape} != ({n * m}, {n * m})"
            )

    def is_cp(self, tol_factor: float = linalg.PSD_TOL_FACTOR) -> bool:
        w = np.linalg.eigvalsh(linalg.hermitian_part(self.matrix))
        return w[0] >= -tol_factor * max(1.0, abs(w).max())

    def tp_defect(self) -> float:
        red = linalg.partial_trace(self.matrix, (self.in_dim, self.out_dim), "second")
        return float(np.linalg.norm(red - np.eye(self.in_dim)))

    def unital_defect(self) -> float:
        red = linalg.partial_trace(self.matrix, (self.in_dim, self.out_dim), "first")
        return float(np.linalg.norm(red - np.eye(self.out_dim)))


def apply_channel(channel: KrausChannel, x: np.ndarray) -> np.ndarray:
    """Evaluate sum_j F_j X F_j*."""
    if x.shape != (channel.in_dim, channel.in_dim):
        raise ShapeError(
            f"input shape {x.shape} does not match channel input dim {channel.in_dim}"
        )
    out = np.zeros((channel.out_dim, channel.out_dim), dtype=complex)
    for op in channel.operators:
        out += op @ x @ op.conj().T
    return out


def choi_from_kraus(channel: KrausChannel) -> ChoiMatrix:
    """Choi matrix J = sum_j vec(F_j) vec(F_j)* (column stacking)."""
    n, m = channel.in_dim, channel.out_dim
    j = np.zeros((n * m, n * m), dtype=complex)
    for op in channel.operators:
        w = op.flatten(order="F")
        j += np.outer(w, w.conj())
    return ChoiMatrix(in_dim=n, out_dim=m, matrix=j)


def kraus_from_choi(choi: ChoiMatrix, rank_tol: float = 1e-12) -> KrausChannel:
    """Extract Kraus operators from a PSD Choi matrix by eigendecomposition.

    The number of operators equals the numerical rank (at most n*m).

    Raises:
        NotPSDError: if the Choi matrix has a meaningfully negative
            eigenvalue.
    """
    w, v = linalg.herm_eig(choi.matrix)
    tol = linalg.psd_tolerance(w)
    if w.size and w[-1] < -tol:
        raise NotPSDError(
            f"Choi matrix has eigenvalue {w[-1]:.3e}", min_eigenvalue=float(w[-1])
        )
    cutoff = rank_tol * max(1.0, float(w[0]) if w.size else 1.0)
    ops = []
    for wl, col in zip(w, v.T):
        if wl <= cutoff:
            break
        ops.append(np.sqrt(wl) * col.reshape((choi.out_dim, choi.in_dim), order="F"))
    if not ops:
        ops.append(np.zeros((choi.out_dim, choi.in_dim), dtype=complex))
    return KrausChannel(operators=tuple(ops))


def apply_choi(choi: ChoiMatrix, x: np.ndarray) -> np.ndarray:
    """Evaluate the map through its Choi matrix: tr_in(J (X^t (x) I))."""
    n, m = choi.in_dim, choi.out_dim
    if x.shape != (n, n):
        raise ShapeError(f"input shape {x.shape} does not match Choi input dim {n}")
    prod = choi.matrix @ np.kron(x.T, np.eye(m))
    return linalg.partial_trace(prod, (n, m), "first")


def channel_from_isometry(v: np.ndarray, out_dim: int) -> KrausChannel:
    """Slice an isometry V (L x n, L a multiple of out_dim) into Kraus blocks.

    The blocks F_j = V[j*out_dim:(j+1)*out_dim] satisfy
    sum_j F_j* F_j = V* V, so a TP channel results exactly when V has
    orthonormal columns.
    """
    l, _ = v.shape
    if l % out_dim != 0:
        raise ShapeError(f"row count {l} is not a multiple of out_dim {out_dim}")
    ops = [v[j * out_dim : (j + 1) * out_dim] for j in range(l // out_dim)]
    return KrausChannel(operators=tuple(ops))


def reslice_channel(channel: KrausChannel, out_dim: int, drop_tol: float = 1e-14) -> KrausChannel:
    """Split each Kraus operator into out_dim-row blocks.

    Preserves the channel action followed by a partial trace over the block
    index; all-zero blocks are dropped.
    """
    ops = []
    for op in channel.operators:
        if op.shape[0] % out_dim != 0:
            raise ShapeError(
                f"operator rows {op.shape[0]} not a multiple of {out_dim}"
            )
        for b in range(op.shape[0] // out_dim):
            block = op[b * out_dim : (b + 1) * out_dim]
            if np.abs(block).max(initial=0.0) > drop_tol:
                ops.append(block)
    if not ops:
        ops.append(np.zeros((out_dim, channel.in_dim), dtype=complex))
    return KrausChannel(operators=tuple(ops))


@dataclass
class Certificate:
    """Feasibility verdict plus supporting evidence.

    A FEASIBLE certificate always carries a channel whose independent
    verification residuals are below VERIFY_TOL.
    """

    verdict: str
    channel: Optional[KrausChannel] = None
    evidence: dict = field(default_factory=dict)
    iterations: int = 0
    route: str = ""

    @property
    def feasible(self) -> bool:
        return self.verdict == FEASIBLE


def interpolation_residuals(
    channel: KrausChannel,
    inputs: list[np.ndarray],
    targets: list[np.ndarray],
) -> list[float]:
    """Frobenius residuals ||T(A_i) - B_i|| for each pair."""
    return [
        float(np.linalg.norm(apply_channel(channel, a) - b))
        for a, b in zip(inputs, targets)
    ]


def verify_channel(
    channel: KrausChannel,
    inputs: list[np.ndarray],
    targets: list[np.ndarray],
    map_class: str,
    prescribed_image: np.ndarray | None = None,
    tol: float = VERIFY_TOL,
) -> dict:
    """Independent verification of a claimed interpolating channel.

    Returns a report dict with the individual residuals and an ``ok`` flag;
    never raises on a failing check.
    """
    report: dict = {"map_class": map_class}
    resid = interpolation_residuals(channel, inputs, targets)
    report["interpolation"] = resid
    checks = [max(resid, default=0.0) <= tol]
    if map_class in ("TPCP", "UTPCP"):
        report["tp_defect"] = channel.tp_defect()
        checks.append(report["tp_defect"] <= tol)
    if map_class in ("UCP", "UTPCP"):
        report["unital_defect"] = channel.unital_defect()
        checks.append(report["unital_defect"] <= tol)
    if prescribed_image is not None:
        image = apply_channel(channel, np.eye(channel.in_dim, dtype=complex))
        report["identity_image_defect"] = float(np.linalg.norm(image - prescribed_image))
        checks.append(report["identity_image_defect"] <= tol)
    report["ok"] = bool(all(checks))
    return report
