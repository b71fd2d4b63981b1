"""krausfit: decide and construct quantum channels interpolating state sets.

Given inputs A_1..A_k and targets B_1..B_k (density matrices), the package
answers whether a completely positive map of a requested class (CP, TPCP,
unital CP, unital TPCP) exists with T(A_i) = B_i, and when it does, returns
an explicit Kraus representation.  Fast theorem-based deciders cover qubit
and pure-state instances; a Choi-matrix alternating-projection oracle covers
everything and doubles as an independent cross-check.
"""

from .channels import Certificate, ChoiMatrix, KrausChannel, apply_channel
from .oracle import FeasibilityProblem, decide_general, screen

__all__ = [
    "Certificate",
    "ChoiMatrix",
    "KrausChannel",
    "apply_channel",
    "FeasibilityProblem",
    "decide_general",
    "screen",
]

__version__ = "0.1.0"
