"""Complete TPCP decision procedures for qubit instances, k = 1..4.

Qubit pairs reduce to pure input states by subtracting PSD-preserving
multiples, after which feasibility is a fidelity comparison (k = 2), a
contraction-matrix feasibility problem solved by alternating projections
(k = 3), or positivity of the Choi matrix of the unique interpolating map
(k = 4).  Every FEASIBLE verdict carries Kraus operators verified against
the original, unreduced instance.
"""

from __future__ import annotations

import numpy as np

from . import linalg, states
from .channels import (
    FEASIBLE,
    INDETERMINATE,
    INFEASIBLE,
    Certificate,
    ChoiMatrix,
    KrausChannel,
    kraus_from_choi,
    verify_channel,
)
from ._kernels import psd_project
from .errors import (
    DegenerateDecompositionError,
    LinearlyDependentError,
    ShapeError,
)
from .projections import FeasibilityOptions, vectorizer

BOUNDARY_TOL = 1e-7

_E11 = np.diag([1.0, 0.0]).astype(complex)
_E22 = np.diag([0.0, 1.0]).astype(complex)


def decide_qubit_k1(b1: np.ndarray) -> Certificate:
    """Channel for a single pair: X -> (tr X) B1 always works."""
    b1 = states.validate_density(b1)
    factor = states.spectral_factor(b1)
    ops = []
    for l in range(factor.rank):
        col = factor.sqrt_eigs[l] * factor.basis[:, l]
        for j in range(2):
            e = np.zeros(2, dtype=complex)
            e[j] = 1.0
            ops.append(np.outer(col, e.conj()))
    channel = KrausChannel(operators=tuple(ops))
    report = verify_channel(channel, [_E11, _E22], [b1, b1], "TPCP")
    verdict = FEASIBLE if report["ok"] else INDETERMINATE
    return Certificate(verdict, channel=channel,
                       evidence={"verification": report}, route="qubit-k1")


def _reduced_target_check(b_reduced: np.ndarray, index: int) -> Certificate | None:
    """INFEASIBLE certificate if a reduced target left the PSD cone."""
    w = np.linalg.eigvalsh(linalg.hermitian_part(b_reduced))
    if w[0] < -(linalg.psd_tolerance(w) + BOUNDARY_TOL):
        return Certificate(
            INFEASIBLE,
            evidence={"reason": "reduced-target-not-psd", "index": index,
                      "min_eigenvalue": float(w[0])},
            route="qubit-k2",
        )
    return None


def _pure_pair_channel(
    x1: np.ndarray, x2: np.ndarray, b1: np.ndarray, b2: np.ndarray
) -> KrausChannel:
    """Construct a TPCP map with x_i x_i* -> B_i when |x1* x2| <= F(B1, B2).

    Follows the contraction argument: pick the unitary V attaining the
    trace norm of sqrt(B1) sqrt(B2), stack the columns of sqrt(B1) and
    sqrt(B2) V into unit vectors with the right inner product, and complete
    the resulting Gram-matched frames to a unitary whose block column holds
    the four Kraus operators.
    """
    s1 = linalg.sqrt_psd(psd_project(b1))
    s2 = linalg.sqrt_psd(psd_project(b2))
    p, _, qh = np.linalg.svd(s1 @ s2)
    v = qh.conj().T @ p.conj().T
    y = s1.flatten(order="F")
    z = (s2 @ v).flatten(order="F")
    ip = complex(y.conj() @ z)
    overlap = complex(x1.conj() @ x2)
    if abs(ip) < 1e-14:
        delta = 1.0
    else:
        delta = overlap / ip
        if abs(delta) > 1.0:
            delta = delta / abs(delta)
    x8 = np.zeros((8, 2), dtype=complex)
    x8[:2, 0] = x1
    x8[:2, 1] = x2
    y8 = np.zeros((8, 2), dtype=complex)
    y8[:4, 0] = y
    y8[:4, 1] = delta * z
    y8[4:, 1] = np.sqrt(max(0.0, 1.0 - abs(delta) ** 2)) * z
    u = linalg.frame_unitary(x8, y8, tol=1e-5)
    return KrausChannel(operators=tuple(u[2 * j : 2 * j + 2, :2] for j in range(4)))


def decide_qubit_k2(
    a1: np.ndarray, a2: np.ndarray, b1: np.ndarray, b2: np.ndarray
) -> Certificate:
    """TPCP feasibility for two qubit pairs via the fidelity condition.

    Reduces the inputs to pure states x1, x2 (applying the same linear
    combinations to the targets); feasibility is then
    |x1* x2| <= F(B1~, B2~), provided the reduced targets stay PSD.
    """
    try:
        red = states.reduce_qubit_pair(a1, a2)
    except LinearlyDependentError:
        if float(np.linalg.norm(b1 - b2)) > 1e-7:
            return Certificate(
                INFEASIBLE,
                evidence={"reason": "dependent-inputs-inconsistent-targets"},
                route="qubit-k2",
            )
        cert = decide_qubit_k1(b1)
        cert.route = "qubit-k2->k1"
        return cert

    b1r, b2r = red.reduce_targets(b1, b2)
    for idx, br in ((0, b1r), (1, b2r)):
        bad = _reduced_target_check(br, idx)
        if bad is not None:
            return bad
    b1c, b2c = psd_project(b1r), psd_project(b2r)
    overlap = abs(complex(red.x1.conj() @ red.x2))
    fid = linalg.fidelity(b1c, b2c)
    margin = fid - overlap
    evidence = {"overlap": overlap, "target_fidelity": fid, "margin": margin}
    if margin < -BOUNDARY_TOL:
        evidence["reason"] = "fidelity-condition"
        return Certificate(INFEASIBLE, evidence=evidence, route="qubit-k2")

    channel = _pure_pair_channel(red.x1, red.x2, b1c, b2c)
    report = verify_channel(channel, [a1, a2], [b1, b2], "TPCP")
    evidence["verification"] = report
    if not report["ok"]:
        return Certificate(INDETERMINATE, evidence=evidence, route="qubit-k2")
    return Certificate(FEASIBLE, channel=channel, evidence=evidence, route="qubit-k2")


def _quadratic_pencil_roots(b1: np.ndarray, b2: np.ndarray) -> list[float]:
    """Nonnegative real roots of det(B1 - t B2) for 2x2 Hermitian pencils."""
    det1 = float(np.linalg.det(b1).real)
    det2 = float(np.linalg.det(b2).real)
    lin = float((np.trace(b1) * np.trace(b2) - np.trace(b1 @ b2)).real)
    roots: list[float] = []
    if abs(det2) > 1e-14:
        disc = lin * lin - 4.0 * det2 * det1
        if disc >= 0:
            roots = [(lin - np.sqrt(disc)) / (2 * det2),
                     (lin + np.sqrt(disc)) / (2 * det2)]
    elif abs(lin) > 1e-14:
        roots = [det1 / lin]
    return [r for r in roots if r > 0 and np.isfinite(r)]


def check_trace_norm_condition(
    a1: np.ndarray,
    a2: np.ndarray,
    b1: np.ndarray,
    b2: np.ndarray,
    t_grid: np.ndarray | None = None,
) -> dict:
    """Grid check of ||A1 - t A2||_1 >= ||B1 - t B2||_1 over t >= 0.

    The default grid is 200 log-spaced points on [1e-3, 1e3] augmented with
    the determinant roots of both pencils (where the trace norms kink).
    Failure reports the most violating t and the margin; for qubits this
    condition is also sufficient, up to grid resolution.
    """
    if t_grid is None:
        t_grid = np.logspace(-3.0, 3.0, 200)
    ts = np.concatenate(
        [np.asarray(t_grid, dtype=float),
         _quadratic_pencil_roots(b1, b2),
         _quadratic_pencil_roots(a1, a2)]
    )
    lhs = np.abs(np.linalg.eigvalsh(a1[None] - ts[:, None, None] * a2[None])).sum(axis=1)
    rhs = np.abs(np.linalg.eigvalsh(b1[None] - ts[:, None, None] * b2[None])).sum(axis=1)
    margins = lhs - rhs
    idx = int(np.argmin(margins))
    return {
        "name": "trace_norm",
        "passed": bool(margins[idx] >= -1e-9),
        "worst_t": float(ts[idx]),
        "margin": float(margins[idx]),
    }


def _purify_qubit_triple(a1, a2, a3, b1, b2, b3):
    """Reduce three independent qubit states to pure inputs.

    A1 is reduced against A2, then A2 and A3 against the first pure state;
    the same combinations are applied to the targets.
    """
    red = states.reduce_qubit_pair(a1, a2)
    b1r, b2r = red.reduce_targets(b1, b2)
    x3, c3, s3 = states.reduce_against_pure(a3, red.x1)
    b3r = linalg.hermitian_part((b3 - c3 * b1r) / s3)
    return (red.x1, red.x2, x3), (b1r, b2r, b3r)


def _contraction_rows(s1: np.ndarray, s2: np.ndarray, rhs_trace: complex,
                      b3t: np.ndarray):
    """Real linear system on C in R^8 encoding the two matrix constraints.

    Constraints: tr(sqrt(B2) C sqrt(B1)) equals ``rhs_trace`` and
    Re(sqrt(B2) C sqrt(B1)) equals ``b3t``.
    """
    def c_from_vec(v: np.ndarray) -> np.ndarray:
        return (v[0::2] + 1j * v[1::2]).reshape(2, 2)

    def functional(c: np.ndarray) -> np.ndarray:
        kmat = s2 @ c @ s1
        re = (kmat + kmat.conj().T) / 2
        tr = np.trace(kmat)
        return np.array(
            [tr.real, tr.imag,
             re[0, 0].real, re[1, 1].real, re[0, 1].real, re[0, 1].imag]
        )

    cols = np.empty((6, 8))
    basis = np.zeros(8)
    for j in range(8):
        basis[j] = 1.0
        cols[:, j] = functional(c_from_vec(basis))
        basis[j] = 0.0
    rhs = np.array(
        [rhs_trace.real, rhs_trace.imag,
         b3t[0, 0].real, b3t[1, 1].real, b3t[0, 1].real, b3t[0, 1].imag]
    )
    return cols, rhs, c_from_vec


def _find_contraction(cols, rhs, c_from_vec, max_iter=5000):
    """Alternating projections between the affine set and the unit ball.

    Returns (status, C) with status in {"feasible", "infeasible",
    "inconsistent"}; C is the affine-set point of the final iterate.
    """
    pinv = np.linalg.pinv(cols, rcond=1e-12)
    x = pinv @ rhs
    if np.linalg.norm(cols @ x - rhs) > 1e-9 * (1.0 + np.linalg.norm(rhs)):
        return "inconsistent", None

    def proj_affine(v):
        return v - pinv @ (cols @ v - rhs)

    def proj_ball(v):
        c = c_from_vec(v)
        u, s, vh = np.linalg.svd(c)
        c2 = (u * np.clip(s, None, 1.0)) @ vh
        out = np.empty(8)
        flat = c2.reshape(-1)
        out[0::2] = flat.real
        out[1::2] = flat.imag
        return out

    prev_gap = np.inf
    for _ in range(max_iter):
        y = proj_ball(x)
        x = proj_affine(y)
        gap = float(np.linalg.norm(x - y))
        if gap < 1e-12 or abs(prev_gap - gap) < 1e-12:
            break
        prev_gap = gap
    c = c_from_vec(x)
    sigma = float(np.linalg.svd(c, compute_uv=False)[0])
    if sigma <= 1.0 + BOUNDARY_TOL:
        return "feasible", c
    return "infeasible", c


def decide_qubit_k3(inputs, targets) -> Certificate:
    """TPCP feasibility for three independent qubit pairs.

    After reducing the inputs to pure states, feasibility is equivalent to
    the existence of a contraction C satisfying two linear matrix
    constraints built from the decomposition x3 = a1 e^{i t1} x1 +
    a2 e^{i t2} x2; the affine family of solutions is intersected with the
    operator-norm unit ball by alternating projections.
    """
    a1, a2, a3 = inputs
    b1, b2, b3 = targets
    (x1, x2, x3), (b1r, b2r, b3r) = _purify_qubit_triple(a1, a2, a3, b1, b2, b3)
    for idx, br in enumerate((b1r, b2r, b3r)):
        w = np.linalg.eigvalsh(br)
        if w[0] < -(linalg.psd_tolerance(w) + BOUNDARY_TOL):
            return Certificate(
                INFEASIBLE,
                evidence={"reason": "reduced-target-not-psd", "index": idx,
                          "min_eigenvalue": float(w[0])},
                route="qubit-k3",
            )
    b1c, b2c, b3c = (psd_project(b) for b in (b1r, b2r, b3r))

    w = np.linalg.solve(np.stack([x1, x2], axis=1), x3)
    alpha = np.abs(w)
    if alpha.min() < 1e-9:
        raise DegenerateDecompositionError(
            f"decomposition coefficient {alpha.min():.3e} vanishes for an "
            "independent triple"
        )
    phases = w / alpha
    b3_tilde = (b3c - alpha[0] ** 2 * b1c - alpha[1] ** 2 * b2c) / (
        2 * alpha[0] * alpha[1]
    )
    s1 = linalg.sqrt_psd(b1c)
    s2 = linalg.sqrt_psd(b2c)
    rhs_trace = complex(phases[0].conj() * phases[1] * (x1.conj() @ x2))
    cols, rhs, c_from_vec = _contraction_rows(s1, s2, rhs_trace, b3_tilde)
    status, c = _find_contraction(cols, rhs, c_from_vec)
    if status == "inconsistent":
        return Certificate(
            INFEASIBLE,
            evidence={"reason": "linear-constraints-inconsistent"},
            route="qubit-k3",
        )
    if status == "infeasible":
        return Certificate(
            INFEASIBLE,
            evidence={"reason": "no-contraction",
                      "smallest_norm_found": float(np.linalg.svd(c, compute_uv=False)[0])},
            route="qubit-k3",
        )

    u_svd, s_svd, vh_svd = np.linalg.svd(c)
    c = (u_svd * np.clip(s_svd, None, 1.0)) @ vh_svd
    remainder = psd_project(np.eye(2) - c @ c.conj().T)
    m1 = s2 @ c
    m2 = s2 @ linalg.sqrt_psd(remainder)
    x8 = np.zeros((8, 2), dtype=complex)
    x8[:2, 0] = phases[0] * x1
    x8[:2, 1] = phases[1] * x2
    y8 = np.zeros((8, 2), dtype=complex)
    y8[:4, 0] = s1.flatten(order="F")
    y8[:4, 1] = m1.flatten(order="F")
    y8[4:, 1] = m2.flatten(order="F")
    u = linalg.frame_unitary(x8, y8, tol=1e-5)
    channel = KrausChannel(operators=tuple(u[2 * j : 2 * j + 2, :2] for j in range(4)))
    report = verify_channel(channel, [a1, a2, a3], [b1, b2, b3], "TPCP")
    evidence = {"contraction_norm": float(np.linalg.svd(c, compute_uv=False)[0]),
                "verification": report}
    if not report["ok"]:
        return Certificate(INDETERMINATE, evidence=evidence, route="qubit-k3")
    return Certificate(FEASIBLE, channel=channel, evidence=evidence, route="qubit-k3")


def decide_qubit_k4(inputs, targets) -> Certificate:
    """TPCP feasibility when the inputs form a basis of M_2.

    The interpolating linear map is unique; the verdict is the positivity
    of its Choi matrix, checked on the standard basis images.
    """
    vmat = np.stack([a.flatten() for a in inputs], axis=1)
    if abs(np.linalg.det(vmat)) < 1e-12:
        raise LinearlyDependentError("inputs do not form a basis of M_2")
    images = {}
    for p in range(2):
        for q in range(2):
            e = np.zeros((2, 2), dtype=complex)
            e[p, q] = 1.0
            gamma = np.linalg.solve(vmat, e.flatten())
            images[(p, q)] = sum(g * b for g, b in zip(gamma, targets))

    tp_gaps = [
        abs(np.trace(images[(0, 0)]) - 1.0),
        abs(np.trace(images[(1, 1)]) - 1.0),
        abs(np.trace(images[(0, 1)])),
        abs(np.trace(images[(1, 0)])),
    ]
    if max(tp_gaps) > 1e-8:
        return Certificate(
            INFEASIBLE,
            evidence={"reason": "not-trace-preserving", "tp_gaps": tp_gaps},
            route="qubit-k4",
        )
    jmat = np.zeros((4, 4), dtype=complex)
    for (p, q), img in images.items():
        jmat[2 * p : 2 * p + 2, 2 * q : 2 * q + 2] = img
    jmat = linalg.hermitian_part(jmat)
    eigs = np.linalg.eigvalsh(jmat)
    evidence = {"min_choi_eigenvalue": float(eigs[0])}
    if eigs[0] < -(linalg.psd_tolerance(eigs) + BOUNDARY_TOL):
        evidence["reason"] = "choi-not-psd"
        return Certificate(INFEASIBLE, evidence=evidence, route="qubit-k4")
    channel = kraus_from_choi(ChoiMatrix(in_dim=2, out_dim=2, matrix=psd_project(jmat)))
    report = verify_channel(channel, list(inputs), list(targets), "TPCP")
    evidence["verification"] = report
    if not report["ok"]:
        return Certificate(INDETERMINATE, evidence=evidence, route="qubit-k4")
    return Certificate(FEASIBLE, channel=channel, evidence=evidence, route="qubit-k4")


def _filter_dependent(inputs, targets, tol: float = 1e-9):
    """Drop inputs that are linear combinations of earlier ones.

    A dependent input with an inconsistent target is an immediate
    infeasibility; a consistent one adds nothing (linearity).  Returns
    (kept_indices, certificate_or_None).
    """
    hv = vectorizer(2)
    kept: list[int] = []
    basis: list[np.ndarray] = []
    for i, (a, b) in enumerate(zip(inputs, targets)):
        va = hv.to_vec(a)
        if basis:
            bmat = np.stack(basis, axis=1)
            coeff, *_ = np.linalg.lstsq(bmat, va, rcond=None)
            resid = float(np.linalg.norm(bmat @ coeff - va))
            if resid <= tol * (1.0 + float(np.linalg.norm(va))):
                predicted = sum(c * targets[kept[j]] for j, c in enumerate(coeff))
                gap = float(np.linalg.norm(predicted - b))
                if gap > 1e-7:
                    return kept, Certificate(
                        INFEASIBLE,
                        evidence={"reason": "dependent-input-inconsistent-target",
                                  "index": i, "target_gap": gap},
                        route="qubit-filter",
                    )
                continue
        kept.append(i)
        basis.append(va)
    return kept, None


def decide_qubit_tpcp(inputs, targets, options: FeasibilityOptions | None = None) -> Certificate:
    """Dispatch a qubit TPCP instance to the k-specific decision procedure.

    Linearly dependent inputs are filtered in a pre-pass (with consistency
    checks on their targets); numerically degenerate reductions fall back
    to the Choi oracle.  FEASIBLE channels are re-verified against the full
    instance including any filtered pairs.
    """
    if len(inputs) != len(targets) or not inputs:
        raise ShapeError("inputs and targets must be equal-length, nonempty")
    inputs = [states.validate_density(a) for a in inputs]
    targets = [states.validate_density(b) for b in targets]
    if any(a.shape != (2, 2) for a in inputs + targets):
        raise ShapeError("qubit deciders require 2x2 states")

    kept, bad = _filter_dependent(inputs, targets)
    if bad is not None:
        return bad
    sub_in = [inputs[i] for i in kept]
    sub_tg = [targets[i] for i in kept]

    try:
        if len(kept) == 1:
            cert = decide_qubit_k1(sub_tg[0])
        elif len(kept) == 2:
            cert = decide_qubit_k2(sub_in[0], sub_in[1], sub_tg[0], sub_tg[1])
        elif len(kept) == 3:
            cert = decide_qubit_k3(sub_in, sub_tg)
        else:
            cert = decide_qubit_k4(sub_in, sub_tg)
    except (LinearlyDependentError, DegenerateDecompositionError) as exc:
        from .oracle import FeasibilityProblem, decide_general

        cert = decide_general(
            FeasibilityProblem(inputs=tuple(inputs), targets=tuple(targets),
                               map_class="TPCP"),
            options,
        )
        cert.route = "qubit->oracle-fallback"
        cert.evidence["fallback_reason"] = str(exc)
        return cert

    if cert.feasible and len(kept) != len(inputs):
        report = verify_channel(cert.channel, inputs, targets, "TPCP")
        cert.evidence["full_instance_verification"] = report
        if not report["ok"]:
            return Certificate(INDETERMINATE, evidence=cert.evidence,
                               route=cert.route)
    return cert
