"""Deciders and constructions for pure input states.

Covers trace-preserving CP maps between pure state sets (a Hadamard-quotient
correlation-matrix condition), general CP maps (a kernel-inclusion condition
on the correlation matrix), CP maps with a prescribed identity image, and
the unital variants.  Every decision reduces to feasibility of a correlation
matrix M (PSD, unit diagonal) under affine constraints, decided either by a
direct eigenvalue check when M is fully forced or by Dykstra projections.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from math import ceil

import numpy as np

from . import linalg
from ._kernels import psd_project
from .channels import (
    FEASIBLE,
    INDETERMINATE,
    INFEASIBLE,
    Certificate,
    KrausChannel,
    channel_from_isometry,
    verify_channel,
)
from .errors import ShapeError
from .projections import (
    AffineSet,
    BlockSpace,
    FeasibilityOptions,
    dykstra_feasibility,
    vectorizer,
)

#: Entries of Y*Y with modulus at or below this count as structural zeros.
ZERO_TOL = 1e-10

#: Forced quotients with |Y*Y| entries below this get a conditioning warning.
CONDITIONING_WARN = 1e-6

#: Feasibility comparisons within this band of the boundary may go either way.
BOUNDARY_TOL = 1e-7

#: Relative eigenvalue threshold for the numerical kernel of X*X.
KERNEL_REL_TOL = 1e-9


@dataclass(frozen=True)
class GramPair:
    """Input columns X (n x k), target columns Y (m x k) and their Grams."""

    x: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        if self.x.ndim != 2 or self.y.ndim != 2:
            raise ShapeError("GramPair expects matrices of stacked columns")
        if self.x.shape[1] != self.y.shape[1]:
            raise ShapeError(
                f"column counts differ: {self.x.shape[1]} vs {self.y.shape[1]}"
            )

    @property
    def k(self) -> int:
        return self.x.shape[1]

    @cached_property
    def gx(self) -> np.ndarray:
        return self.x.conj().T @ self.x

    @cached_property
    def gy(self) -> np.ndarray:
        return self.y.conj().T @ self.y


@dataclass(frozen=True)
class DiagonalFamily:
    """Diagonal matrices whose squared moduli partition the unit diagonal."""

    gammas: tuple[np.ndarray, ...]

    def identity_defect(self) -> float:
        acc = sum(g @ g.conj().T for g in self.gammas)
        return float(np.linalg.norm(acc - np.eye(self.gammas[0].shape[0])))


def correlation_factor(m: np.ndarray, rank_tol: float = 1e-12) -> np.ndarray:
    """Factor a correlation matrix as M = C* C with unit columns.

    C has r rows (the numerical rank of M); tiny negative eigenvalues are
    clipped first, and columns are normalized to exactly unit length.
    """
    w, v = linalg.herm_eig(linalg.hermitian_part(m))
    cutoff = rank_tol * max(1.0, float(w[0]) if w.size else 1.0)
    keep = w > cutoff
    c = (np.sqrt(w[keep])[:, None]) * v[:, keep].conj().T
    norms = np.linalg.norm(c, axis=0)
    norms[norms == 0] = 1.0
    return c / norms


def diagonal_family(c: np.ndarray) -> DiagonalFamily:
    """Diagonal matrices Gamma_j with (Gamma_j)_ii = C[j, i]."""
    return DiagonalFamily(gammas=tuple(np.diag(row) for row in c))


def validate_correlation(m: np.ndarray, tol: float = 1e-8) -> bool:
    """Check PSD (within tolerance) and unit diagonal."""
    w = np.linalg.eigvalsh(linalg.hermitian_part(m))
    if w[0] < -linalg.psd_tolerance(w) - tol:
        return False
    return bool(np.abs(np.diagonal(m) - 1.0).max(initial=0.0) <= tol)


def _require_unit_columns(cols: np.ndarray, what: str, tol: float = 1e-8):
    norms = np.linalg.norm(cols, axis=0)
    if np.abs(norms - 1.0).max(initial=0.0) > tol:
        raise ShapeError(f"{what} columns must be unit vectors")


def _kernel_basis(g: np.ndarray) -> np.ndarray:
    """Orthonormal basis of the numerical kernel of a PSD Gram matrix."""
    w, v = np.linalg.eigh(linalg.hermitian_part(g))
    lam_max = max(float(w[-1]), 0.0)
    keep = w < KERNEL_REL_TOL * max(lam_max, 1e-300)
    return v[:, keep]


def _forced_correlation(pair: GramPair, zero_tol: float = ZERO_TOL):
    """Entries of M forced by X*X = M o Y*Y, plus zero-pattern violations.

    Returns (forced_mask, forced_values, violations, warnings).
    """
    gx, gy = pair.gx, pair.gy
    forced = np.abs(gy) > zero_tol
    values = np.zeros_like(gx)
    values[forced] = gx[forced] / gy[forced]
    violations = [
        (i, j)
        for i in range(pair.k)
        for j in range(pair.k)
        if not forced[i, j] and abs(gx[i, j]) > 1e-8
    ]
    warnings = [
        (i, j)
        for i in range(pair.k)
        for j in range(i + 1, pair.k)
        if forced[i, j] and abs(gy[i, j]) < CONDITIONING_WARN
    ]
    return forced, values, violations, warnings


def build_pure_tpcp_channel(pair: GramPair, m_corr: np.ndarray) -> KrausChannel:
    """Kraus operators of a TPCP map sending x_i x_i* to y_i y_i*.

    Factors M = C*C, forms the frame c_i (x) y_i, and completes the Gram
    isometry between the padded inputs and that frame to a unitary whose
    first block column holds the Kraus operators.
    """
    n, k = pair.x.shape
    m = pair.y.shape[0]
    c = correlation_factor(m_corr)
    s = max(c.shape[0], ceil(n / m))
    if c.shape[0] < s:
        c = np.vstack([c, np.zeros((s - c.shape[0], k))])
    ambient = s * m
    x_pad = np.zeros((ambient, k), dtype=complex)
    x_pad[:n] = pair.x
    frame = np.stack([np.kron(c[:, i], pair.y[:, i]) for i in range(k)], axis=1)
    u = linalg.frame_unitary(x_pad, frame, tol=1e-5)
    return channel_from_isometry(u[:, :n], m)


def _rank_one_targets(pair: GramPair) -> list[np.ndarray]:
    return [np.outer(pair.y[:, i], pair.y[:, i].conj()) for i in range(pair.k)]


def _rank_one_inputs(pair: GramPair) -> list[np.ndarray]:
    return [np.outer(pair.x[:, i], pair.x[:, i].conj()) for i in range(pair.k)]


def decide_pure_tpcp(
    x_cols: np.ndarray,
    y_cols: np.ndarray,
    options: FeasibilityOptions | None = None,
) -> Certificate:
    """Existence of a TPCP map with T(x_i x_i*) = y_i y_i*.

    Feasible exactly when X*X = M o Y*Y for some correlation matrix M.
    Entries of M are forced wherever (Y*Y)_ij is nonzero; a nonzero
    (X*X)_ij over a zero (Y*Y)_ij is an immediate infeasibility; remaining
    entries are completed over the PSD cone.  A FEASIBLE certificate
    carries the correlation matrix and a verified channel.
    """
    pair = GramPair(np.asarray(x_cols, dtype=complex), np.asarray(y_cols, dtype=complex))
    _require_unit_columns(pair.x, "input")
    _require_unit_columns(pair.y, "target")
    forced, values, violations, warnings = _forced_correlation(pair)
    evidence: dict = {}
    if warnings:
        evidence["conditioning_warnings"] = warnings
    if violations:
        i, j = violations[0]
        evidence.update(
            reason="zero-pattern",
            pair=(i, j),
            gx_entry=complex(pair.gx[i, j]),
        )
        return Certificate(INFEASIBLE, evidence=evidence, route="pure-tpcp")

    inputs, targets = _rank_one_inputs(pair), _rank_one_targets(pair)

    def attempt(m_corr: np.ndarray):
        try:
            channel = build_pure_tpcp_channel(pair, m_corr)
        except ShapeError:
            return None
        report = verify_channel(channel, inputs, targets, "TPCP")
        return (channel, report) if report["ok"] else None

    if forced.all():
        m_corr = linalg.hermitian_part(values)
        min_eig = float(np.linalg.eigvalsh(m_corr)[0])
        evidence["forced_min_eig"] = min_eig
        evidence["correlation_matrix"] = m_corr
        if min_eig < -BOUNDARY_TOL:
            evidence["reason"] = "forced-correlation-not-psd"
            return Certificate(INFEASIBLE, evidence=evidence, route="pure-tpcp")
        payload = attempt(psd_project(m_corr))
        if payload is None:
            return Certificate(INDETERMINATE, evidence=evidence, route="pure-tpcp")
        channel, report = payload
        evidence["verification"] = report
        return Certificate(FEASIBLE, channel=channel, evidence=evidence,
                           route="pure-tpcp")

    # PSD completion of the free entries.
    k = pair.k
    space = BlockSpace([k])
    iu = np.triu_indices(k, k=1)
    forced_off = forced[iu]
    forced_vals = values[iu][forced_off]

    def completion_residual(blocks):
        mm = blocks[0]
        parts = [np.diagonal(mm).real - 1.0]
        if forced_vals.size:
            diffs = mm[iu][forced_off] - forced_vals
            parts.append(diffs.real)
            parts.append(diffs.imag)
        return np.concatenate(parts)

    affine = AffineSet.from_residual(space, completion_residual)
    result = dykstra_feasibility(
        space,
        affine,
        cone_blocks=[0],
        start_blocks=[np.eye(k, dtype=complex)],
        options=options or FeasibilityOptions(),
        on_candidate=lambda blocks: attempt(psd_project(blocks[0])),
    )
    evidence["gap"] = result.gap
    if result.status == "feasible":
        channel, report = result.payload
        evidence["correlation_matrix"] = psd_project(result.blocks[0])
        evidence["verification"] = report
        return Certificate(FEASIBLE, channel=channel, evidence=evidence,
                           iterations=result.iterations, route="pure-tpcp")
    if result.status == "infeasible":
        evidence["reason"] = "correlation-completion-infeasible"
        return Certificate(INFEASIBLE, evidence=evidence,
                           iterations=result.iterations, route="pure-tpcp")
    return Certificate(INDETERMINATE, evidence=evidence,
                       iterations=result.iterations, route="pure-tpcp")


def build_pure_cp_channel(pair: GramPair, m_corr: np.ndarray) -> KrausChannel:
    """Kraus operators F_j = Y Gamma_j X^+ from a correlation matrix."""
    c = correlation_factor(m_corr)
    x_pinv = linalg.pinv(pair.x)
    ops = tuple(pair.y @ gamma @ x_pinv for gamma in diagonal_family(c).gammas)
    return KrausChannel(operators=ops)


def decide_pure_cp(
    x_cols: np.ndarray,
    y_cols: np.ndarray,
    options: FeasibilityOptions | None = None,
) -> Certificate:
    """Existence of a CP map with T(x_i x_i*) = y_i y_i*.

    Feasible exactly when some correlation matrix M satisfies
    ker X*X <= ker M o (Y*Y).  Columns need not be normalized.
    """
    pair = GramPair(np.asarray(x_cols, dtype=complex), np.asarray(y_cols, dtype=complex))
    kernel = _kernel_basis(pair.gx)
    inputs, targets = _rank_one_inputs(pair), _rank_one_targets(pair)

    def attempt(m_corr: np.ndarray):
        channel = build_pure_cp_channel(pair, m_corr)
        report = verify_channel(channel, inputs, targets, "CP")
        return (channel, report) if report["ok"] else None

    if kernel.shape[1] == 0:
        payload = attempt(np.eye(pair.k, dtype=complex))
        if payload is None:
            return Certificate(
                INDETERMINATE,
                evidence={"reason": "construction-failed-on-trivial-kernel"},
                route="pure-cp",
            )
        channel, report = payload
        return Certificate(
            FEASIBLE,
            channel=channel,
            evidence={"correlation_matrix": np.eye(pair.k), "verification": report,
                      "kernel_dim": 0},
            route="pure-cp",
        )

    k = pair.k
    space = BlockSpace([k])
    gy = pair.gy

    def residual(blocks):
        m = blocks[0]
        parts = [np.diagonal(m).real - 1.0]
        prod = (m * gy) @ kernel
        parts.append(prod.real.ravel())
        parts.append(prod.imag.ravel())
        return np.concatenate(parts)

    affine = AffineSet.from_residual(space, residual)
    if not affine.is_consistent():
        return Certificate(
            INFEASIBLE,
            evidence={"reason": "kernel-constraints-inconsistent",
                      "least_squares_residual": affine.inconsistency,
                      "kernel_dim": int(kernel.shape[1])},
            route="pure-cp",
        )
    result = dykstra_feasibility(
        space,
        affine,
        cone_blocks=[0],
        start_blocks=[np.eye(k, dtype=complex)],
        options=options or FeasibilityOptions(),
        on_candidate=lambda blocks: attempt(psd_project(blocks[0])),
    )
    if result.status == "feasible":
        channel, report = result.payload
        return Certificate(
            FEASIBLE,
            channel=channel,
            evidence={"correlation_matrix": psd_project(result.blocks[0]),
                      "verification": report, "gap": result.gap,
                      "kernel_dim": int(kernel.shape[1])},
            iterations=result.iterations,
            route="pure-cp",
        )
    verdict = INFEASIBLE if result.status == "infeasible" else INDETERMINATE
    return Certificate(
        verdict,
        evidence={"reason": "kernel-inclusion-infeasible" if verdict == INFEASIBLE
                  else "undecided", "gap": result.gap,
                  "kernel_dim": int(kernel.shape[1])},
        iterations=result.iterations,
        route="pure-cp",
    )


def _rank_and_kernel(pair: GramPair) -> tuple[int, np.ndarray]:
    kernel = _kernel_basis(pair.gx)
    rank = pair.k - kernel.shape[1]
    return rank, kernel


def build_cp_channel_with_target(
    pair: GramPair, m_corr: np.ndarray, b: np.ndarray
) -> KrausChannel:
    """Kraus family F_j = Y Gamma_j X^+ + G_j P_perp realizing T(I) = B.

    The G_j spread the slack B - Y[conj(M) o (X*X)^+]Y* over rank-one
    eigenprojections supported on the orthogonal complement of range(X).
    """
    n = pair.x.shape[0]
    c = correlation_factor(m_corr)
    x_pinv = linalg.pinv(pair.x)
    gx_pinv = linalg.pinv(pair.gx)
    base_ops = [pair.y @ gamma @ x_pinv for gamma in diagonal_family(c).gammas]

    slack = b - pair.y @ (m_corr.conj() * gx_pinv) @ pair.y.conj().T
    slack = psd_project(slack)
    w, v = linalg.herm_eig(slack)
    cutoff = 1e-12 * max(1.0, float(w[0]) if w.size else 1.0)
    mu = w[w > cutoff]
    u_cols = v[:, : mu.size]

    if mu.size:
        u_full, s_full, _ = np.linalg.svd(pair.x, full_matrices=True)
        rank = int(np.sum(s_full > 1e-12 * max(1.0, s_full[0] if s_full.size else 1.0)))
        if rank >= n:
            raise ShapeError("slack requires rank(X) < n but X has full row rank")
        w_perp = u_full[:, rank]
        extra = [
            np.sqrt(mu[l]) * np.outer(u_cols[:, l], w_perp.conj())
            for l in range(mu.size)
        ]
        while len(base_ops) < len(extra):
            base_ops.append(np.zeros_like(base_ops[0]))
        for l, g in enumerate(extra):
            base_ops[l] = base_ops[l] + g
    return KrausChannel(operators=tuple(base_ops))


def decide_pure_cp_with_target(
    x_cols: np.ndarray,
    y_cols: np.ndarray,
    b: np.ndarray,
    options: FeasibilityOptions | None = None,
    *,
    route: str = "pure-cp-with-target",
) -> Certificate:
    """Existence of a CP map with T(x_i x_i*) = y_i y_i* and T(I) = B.

    Jointly feasible in a correlation matrix M under the kernel-inclusion
    constraint and B - Y[conj(M) o (X*X)^+]Y* PSD (equality when X has full
    row rank).  Decided by cyclic Dykstra over the affine set and the two
    PSD cones (M and the slack).
    """
    pair = GramPair(np.asarray(x_cols, dtype=complex), np.asarray(y_cols, dtype=complex))
    b = np.asarray(b, dtype=complex)
    n, k = pair.x.shape
    m = pair.y.shape[0]
    if b.shape != (m, m):
        raise ShapeError(f"identity image must be {m} x {m}, got {b.shape}")
    rank, kernel = _rank_and_kernel(pair)
    full_row_rank = rank == n
    gx_pinv = linalg.pinv(pair.gx)
    gy = pair.gy
    inputs, targets = _rank_one_inputs(pair), _rank_one_targets(pair)

    space = BlockSpace([k, m])
    hv_m = vectorizer(m)

    def residual(blocks):
        mm, ss = blocks
        parts = [np.diagonal(mm).real - 1.0]
        if kernel.shape[1]:
            prod = (mm * gy) @ kernel
            parts.append(prod.real.ravel())
            parts.append(prod.imag.ravel())
        coupling = ss + pair.y @ (mm.conj() * gx_pinv) @ pair.y.conj().T - b
        parts.append(hv_m.to_vec(linalg.hermitian_part(coupling)))
        if full_row_rank:
            parts.append(hv_m.to_vec(ss))
        return np.concatenate(parts)

    affine = AffineSet.from_residual(space, residual)
    if not affine.is_consistent():
        return Certificate(
            INFEASIBLE,
            evidence={"reason": "constraints-inconsistent",
                      "least_squares_residual": affine.inconsistency},
            route=route,
        )

    def attempt(blocks):
        m_corr = psd_project(blocks[0])
        try:
            channel = build_cp_channel_with_target(pair, m_corr, b)
        except ShapeError:
            return None
        report = verify_channel(channel, inputs, targets, "CP", prescribed_image=b)
        return (channel, report, m_corr) if report["ok"] else None

    result = dykstra_feasibility(
        space,
        affine,
        cone_blocks=[0, 1],
        start_blocks=[np.eye(k, dtype=complex), np.zeros((m, m), dtype=complex)],
        options=options or FeasibilityOptions(),
        on_candidate=attempt,
    )
    if result.status == "feasible":
        channel, report, m_corr = result.payload
        return Certificate(
            FEASIBLE,
            channel=channel,
            evidence={"correlation_matrix": m_corr, "verification": report,
                      "gap": result.gap, "full_row_rank": full_row_rank},
            iterations=result.iterations,
            route=route,
        )
    verdict = INFEASIBLE if result.status == "infeasible" else INDETERMINATE
    return Certificate(
        verdict,
        evidence={"gap": result.gap, "cone_residual": result.residual,
                  "full_row_rank": full_row_rank},
        iterations=result.iterations,
        route=route,
    )


def decide_pure_unital_cp(
    x_cols: np.ndarray,
    y_cols: np.ndarray,
    options: FeasibilityOptions | None = None,
) -> Certificate:
    """Existence of a unital CP map on pure states: T(I) = I as the target."""
    m = np.asarray(y_cols).shape[0]
    return decide_pure_cp_with_target(
        x_cols, y_cols, np.eye(m, dtype=complex), options, route="pure-unital-cp"
    )


def decide_pure_unital_tpcp(
    x_cols: np.ndarray,
    y_cols: np.ndarray,
    options: FeasibilityOptions | None = None,
) -> Certificate:
    """Existence of a unital TPCP map with T(x_i x_i*) = y_i y_i*.

    Requires m = n; feasible exactly when one correlation matrix M jointly
    satisfies X*X = M o Y*Y and Y[conj(M) o (X*X)^+]Y* <= I (equality when
    X has full rank).  The decision runs in M; the constructive channel is
    recovered through the Choi oracle on the decided instance.
    """
    pair = GramPair(np.asarray(x_cols, dtype=complex), np.asarray(y_cols, dtype=complex))
    n, k = pair.x.shape
    m = pair.y.shape[0]
    if m != n:
        return Certificate(
            INFEASIBLE,
            evidence={"reason": "dimension-mismatch", "in_dim": n, "out_dim": m},
            route="pure-unital-tpcp",
        )
    _require_unit_columns(pair.x, "input")
    _require_unit_columns(pair.y, "target")
    forced, values, violations, warnings = _forced_correlation(pair)
    evidence: dict = {}
    if warnings:
        evidence["conditioning_warnings"] = warnings
    if violations:
        evidence.update(reason="zero-pattern", pair=violations[0])
        return Certificate(INFEASIBLE, evidence=evidence, route="pure-unital-tpcp")

    rank, _ = _rank_and_kernel(pair)
    full_row_rank = rank == n
    gx_pinv = linalg.pinv(pair.gx)
    inputs, targets = _rank_one_inputs(pair), _rank_one_targets(pair)

    def construct(m_corr: np.ndarray):
        from .oracle import FeasibilityProblem, decide_general

        cert = decide_general(
            FeasibilityProblem(
                inputs=tuple(inputs), targets=tuple(targets), map_class="UTPCP"
            ),
            options,
        )
        if cert.feasible:
            report = verify_channel(cert.channel, inputs, targets, "UTPCP")
            if report["ok"]:
                return (cert.channel, report, m_corr)
        return None

    space = BlockSpace([k, m])
    hv_m = vectorizer(m)
    iu = np.triu_indices(k, k=1)
    forced_off = forced[iu]
    forced_vals = values[iu][forced_off]

    def residual(blocks):
        mm, ss = blocks
        parts = [np.diagonal(mm).real - 1.0]
        if forced_vals.size:
            diffs = mm[iu][forced_off] - forced_vals
            parts.append(diffs.real)
            parts.append(diffs.imag)
        coupling = ss + pair.y @ (mm.conj() * gx_pinv) @ pair.y.conj().T - np.eye(m)
        parts.append(hv_m.to_vec(linalg.hermitian_part(coupling)))
        if full_row_rank:
            parts.append(hv_m.to_vec(ss))
        return np.concatenate(parts)

    affine = AffineSet.from_residual(space, residual)
    if not affine.is_consistent():
        evidence["reason"] = "constraints-inconsistent"
        evidence["least_squares_residual"] = affine.inconsistency
        return Certificate(INFEASIBLE, evidence=evidence, route="pure-unital-tpcp")

    result = dykstra_feasibility(
        space,
        affine,
        cone_blocks=[0, 1],
        start_blocks=[np.eye(k, dtype=complex), np.zeros((m, m), dtype=complex)],
        options=options or FeasibilityOptions(),
        on_candidate=lambda blocks: construct(psd_project(blocks[0])),
    )
    evidence["gap"] = result.gap
    evidence["full_row_rank"] = full_row_rank
    if result.status == "feasible":
        channel, report, m_corr = result.payload
        evidence["correlation_matrix"] = m_corr
        evidence["verification"] = report
        return Certificate(FEASIBLE, channel=channel, evidence=evidence,
                           iterations=result.iterations, route="pure-unital-tpcp")
    verdict = INFEASIBLE if result.status == "infeasible" else INDETERMINATE
    if verdict == INFEASIBLE:
        evidence["reason"] = "joint-correlation-conditions-infeasible"
    return Certificate(verdict, evidence=evidence, iterations=result.iterations,
                       route="pure-unital-tpcp")
