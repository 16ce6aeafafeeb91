"""Transition matrices for the bipartite ranking schemes.

Each scheme scales the entries of ``W`` by powers of the endpoint degrees:

=========  ==============================  ==============================
scheme     forward (updates u from p)      backward (updates p from u)
=========  ==============================  ==============================
hits       W                               W^T
cohits     W D_p^-1                        W^T D_u^-1
bger       D_u^-1 W                        D_p^-1 W^T
bgrm       D_u^-1 W D_p^-1                 D_p^-1 W^T D_u^-1
birank     D_u^-1/2 W D_p^-1/2             transpose of forward
=========  ==============================  ==============================

Scaling is applied to stored entries only, so isolated vertices never
produce a 0/0.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .graph import BipartiteGraph


class Scheme(str, enum.Enum):
    HITS = "hits"
    COHITS = "cohits"
    BGER = "bger"
    BGRM = "bgrm"
    BIRANK = "birank"

    @classmethod
    def parse(cls, value) -> "Scheme":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower().replace("-", ""))
        except ValueError:
            raise ValueError(f"unknown scheme {value!r}; choose from {[s.value for s in cls]}") from None


# (exponent on the row degree, exponent on the column degree) for the forward matrix
_EXPONENTS = {
    Scheme.HITS: (0.0, 0.0),
    Scheme.COHITS: (0.0, -1.0),
    Scheme.BGER: (-1.0, 0.0),
    Scheme.BGRM: (-1.0, -1.0),
    Scheme.BIRANK: (-0.5, -0.5),
}


@dataclass(frozen=True, eq=False)
class TransitionPair:
    forward: sp.csr_matrix  # u_count x p_count
    backward: sp.csr_matrix  # p_count x u_count
    scheme: Scheme
    graph: BipartiteGraph | None = None

    @property
    def u_count(self) -> int:
        return self.forward.shape[0]

    @property
    def p_count(self) -> int:
        return self.forward.shape[1]


def _degree_factor(d: np.ndarray, power: float) -> np.ndarray:
    if power == 0.0:
        return np.ones_like(d)
    out = np.zeros_like(d)
    nz = d > 0
    if power == -1.0:
        out[nz] = 1.0 / d[nz]
    elif power == -0.5:
        out[nz] = 1.0 / np.sqrt(d[nz])
    else:
        out[nz] = d[nz] ** power
    return out


def scale_entries(W: sp.csr_matrix, row_d, col_d, row_pow: float, col_pow: float) -> sp.csr_matrix:
    """Return ``diag(row_d^row_pow) W diag(col_d^col_pow)`` touching stored entries only."""
    rows = np.repeat(np.arange(W.shape[0]), np.diff(W.indptr))
    data = W.data.astype(np.float64, copy=True)
    if row_pow == col_pow == -0.5:
        # one sqrt of the product rounds once: w / sqrt(d d) is exact for w == d
        data /= np.sqrt(np.asarray(row_d, dtype=np.float64)[rows] * np.asarray(col_d, dtype=np.float64)[W.indices])
        row_pow = col_pow = 0.0
    if row_pow != 0.0:
        data *= _degree_factor(np.asarray(row_d, dtype=np.float64), row_pow)[rows]
    if col_pow != 0.0:
        data *= _degree_factor(np.asarray(col_d, dtype=np.float64), col_pow)[W.indices]
    out = sp.csr_matrix((data, W.indices.copy(), W.indptr.copy()), shape=W.shape)
    out.has_sorted_indices = True
    return out


def symmetric_normalize(W: sp.csr_matrix, row_d, col_d) -> sp.csr_matrix:
    """``D_row^-1/2 W D_col^-1/2``."""
    return scale_entries(W, row_d, col_d, -0.5, -0.5)


def _freeze(m: sp.csr_matrix) -> sp.csr_matrix:
    m.sort_indices()
    for a in (m.data, m.indices, m.indptr):
        a.setflags(write=False)
    return m


def normalize(graph: BipartiteGraph, scheme=Scheme.BIRANK) -> TransitionPair:
    """Precompute the forward/backward transition matrices of ``scheme``."""
    scheme = Scheme.parse(scheme)
    row_pow, col_pow = _EXPONENTS[scheme]
    W, d_u, d_p = graph.W, graph.d_u, graph.d_p
    forward = scale_entries(W, d_u, d_p, row_pow, col_pow)
    if scheme is Scheme.BIRANK:
        backward = forward.T.tocsr()
    else:
        # every scheme in the table uses the same exponents on W^T with U and P swapped
        backward = scale_entries(W.T.tocsr(), d_p, d_u, row_pow, col_pow)
    return TransitionPair(_freeze(forward), _freeze(backward), scheme, graph)


def _check_len(v, n, what):
    v = np.asarray(v, dtype=np.float64)
    if v.shape != (n,):
        raise ValueError(f"{what} has shape {v.shape}, expected ({n},)")
    return v


def apply_forward(tp: TransitionPair, p) -> np.ndarray:
    """Propagate P scores to the U side: ``forward @ p``."""
    return tp.forward @ _check_len(p, tp.p_count, "p")


def apply_backward(tp: TransitionPair, u) -> np.ndarray:
    """Propagate U scores to the P side: ``backward @ u``."""
    return tp.backward @ _check_len(u, tp.u_count, "u")
