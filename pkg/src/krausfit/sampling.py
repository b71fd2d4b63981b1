"""Random instance generators for tests, benchmarks and boundary studies."""

from __future__ import annotations

import numpy as np

from .channels import KrausChannel
from .errors import ShapeError


def random_complex(rng: np.random.Generator, shape) -> np.ndarray:
    return rng.normal(size=shape) + 1j * rng.normal(size=shape)


def random_density(rng: np.random.Generator, dim: int, rank: int | None = None) -> np.ndarray:
    """Haar-ish random density matrix of the given rank (full by default)."""
    r = rank or dim
    g = random_complex(rng, (dim, r))
    a = g @ g.conj().T
    return a / float(np.trace(a).real)


def random_pure_state(rng: np.random.Generator, dim: int) -> np.ndarray:
    v = random_complex(rng, dim)
    return v / np.linalg.norm(v)


def random_unitary(rng: np.random.Generator, dim: int) -> np.ndarray:
    q, r = np.linalg.qr(random_complex(rng, (dim, dim)))
    return q * (np.diagonal(r) / np.abs(np.diagonal(r)))


def random_tp_channel(
    rng: np.random.Generator, in_dim: int, out_dim: int, kraus_count: int | None = None
) -> KrausChannel:
    """Random trace-preserving channel from a Haar random isometry."""
    min_r = -(-in_dim // out_dim)  # ceil(n/m)
    r = max(kraus_count or min_r, min_r)
    g = random_complex(rng, (out_dim * r, in_dim))
    q, _ = np.linalg.qr(g)
    return KrausChannel(
        operators=tuple(q[j * out_dim : (j + 1) * out_dim] for j in range(r))
    )


def random_cp_channel(
    rng: np.random.Generator, in_dim: int, out_dim: int, kraus_count: int = 2,
    scale: float = 1.0,
) -> KrausChannel:
    """Random CP map with no normalization constraint."""
    ops = tuple(
        scale * random_complex(rng, (out_dim, in_dim)) / np.sqrt(out_dim * in_dim)
        for _ in range(kraus_count)
    )
    return KrausChannel(operators=ops)


def random_unital_cp_channel(
    rng: np.random.Generator, in_dim: int, out_dim: int, kraus_count: int | None = None
) -> KrausChannel:
    """Random unital CP map: the adjoint of a random TP channel."""
    tp = random_tp_channel(rng, out_dim, in_dim, kraus_count)
    return KrausChannel(operators=tuple(op.conj().T for op in tp.operators))


def random_mixed_unitary_channel(
    rng: np.random.Generator, dim: int, terms: int = 3
) -> KrausChannel:
    """Random convex mixture of unitaries: both TP and unital."""
    probs = rng.dirichlet(np.ones(terms))
    ops = tuple(
        np.sqrt(p) * random_unitary(rng, dim) for p in probs
    )
    return KrausChannel(operators=ops)


def random_channel_of_class(
    rng: np.random.Generator, map_class: str, in_dim: int, out_dim: int
) -> KrausChannel:
    """Random channel belonging to the requested map class."""
    if map_class == "TPCP":
        return random_tp_channel(rng, in_dim, out_dim,
                                 int(rng.integers(1, in_dim * out_dim + 1)))
    if map_class == "CP":
        return random_cp_channel(rng, in_dim, out_dim,
                                 int(rng.integers(1, 4)),
                                 scale=float(rng.uniform(0.5, 2.0)))
    if map_class == "UCP":
        return random_unital_cp_channel(rng, in_dim, out_dim,
                                        int(rng.integers(1, out_dim * in_dim + 1)))
    if map_class == "UTPCP":
        if in_dim != out_dim:
            raise ShapeError("unital TPCP channels need in_dim == out_dim")
        return random_mixed_unitary_channel(rng, in_dim,
                                            int(rng.integers(1, 5)))
    raise ShapeError(f"unknown map class {map_class!r}")
