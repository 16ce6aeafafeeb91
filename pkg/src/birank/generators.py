"""Synthetic bipartite graphs for convergence and timing studies.

All randomness comes from ``numpy.random.Generator(PCG64(seed))``, whose
stream is platform independent, so a ``GenSpec`` fully determines its graph.
Every generated edge has weight 1.0.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .graph import BipartiteGraph, from_matrix

logger = logging.getLogger(__name__)

_ROW_CHUNK_CELLS = 1 << 22


@dataclass(frozen=True)
class GenSpec:
    u_count: int
    p_count: int
    kind: str = "random"
    density: float = 0.01
    lam: float = 2.0
    seed: int = 0

    def __post_init__(self):
        if self.u_count < 1 or self.p_count < 1:
            raise ValueError("partition sizes must be >= 1")
        if self.kind == "random":
            if not (0.0 < self.density <= 1.0):
                raise ValueError(f"density must lie in (0, 1], got {self.density}")
        elif self.kind == "powerlaw":
            if not self.lam > 1.0:
                raise ValueError(f"power-law exponent must be > 1, got {self.lam}")
        else:
            raise ValueError(f"unknown kind {self.kind!r}")


@dataclass
class GenerationReport:
    """What the power-law generator could not honour."""

    target_u: np.ndarray
    target_p: np.ndarray
    truncated_u: int = 0  # U demand dropped for lack of P vertices with residual degree
    unfilled_p: int = 0  # P demand left over once all U vertices were served
    notes: list[str] = field(default_factory=list)


def _rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(seed))


def gen_random(spec: GenSpec) -> BipartiteGraph:
    """Keep each of the ``u * p`` possible edges iff its uniform draw is <= density.

    Cells are visited row-major; draws are made in row chunks, which consumes
    the stream in the same order as one big draw.
    """
    rng = _rng(spec.seed)
    U, P = spec.u_count, spec.p_count
    rows_per_chunk = max(1, _ROW_CHUNK_CELLS // P)
    blocks = []
    for start in range(0, U, rows_per_chunk):
        stop = min(U, start + rows_per_chunk)
        keep = rng.random((stop - start, P)) <= spec.density
        blocks.append(sp.csr_matrix(keep, dtype=np.float64))
    return from_matrix(sp.vstack(blocks, format="csr"))


def sample_powerlaw_degrees(rng: np.random.Generator, n: int, lam: float, max_degree: int) -> np.ndarray:
    """Draw ``n`` degrees from ``p(x) ~ x^-lam`` on ``1..max_degree``."""
    x = np.arange(1, max_degree + 1, dtype=np.float64)
    w = x ** -lam
    cdf = np.cumsum(w)
    cdf /= cdf[-1]
    return np.minimum(np.searchsorted(cdf, rng.random(n), side="right"), max_degree - 1) + 1


class _Fenwick:
    """Prefix sums over non-negative integer weights with weighted sampling."""

    def __init__(self, weights):
        self.n = len(weights)
        self.tree = [0] * (self.n + 1)
        for i, w in enumerate(weights):
            self.add(i, int(w))
        top = 1
        while top * 2 <= self.n:
            top *= 2
        self._top = top

    def add(self, i: int, delta: int) -> None:
        i += 1
        while i <= self.n:
            self.tree[i] += delta
            i += i & -i

    def total(self) -> int:
        s, i = 0, self.n
        while i > 0:
            s += self.tree[i]
            i -= i & -i
        return s

    def find(self, target: int) -> int:
        """Smallest index whose inclusive prefix sum exceeds ``target``."""
        pos, step = 0, self._top
        while step:
            nxt = pos + step
            if nxt <= self.n and self.tree[nxt] <= target:
                pos = nxt
                target -= self.tree[nxt]
            step //= 2
        return pos


def gen_powerlaw(spec: GenSpec, report: GenerationReport | None = None) -> BipartiteGraph:
    """Power-law bipartite graph built from sampled target degrees.

    1. Each vertex draws a target degree from ``p(x) ~ x^-lam`` truncated to
       ``[1, size of the other side]``.
    2. U vertices are served in decreasing target-degree order (ties by
       index). Each picks distinct P neighbours by sampling proportionally
       to their remaining residual degree.

    If the P side runs out of residual degree, the rest of that U vertex's
    demand is dropped and counted in ``report``.
    """
    rng = _rng(spec.seed)
    U, P = spec.u_count, spec.p_count
    deg_u = sample_powerlaw_degrees(rng, U, spec.lam, P)
    deg_p = sample_powerlaw_degrees(rng, P, spec.lam, U)
    if report is None:
        report = GenerationReport(deg_u, deg_p)
    else:
        report.target_u, report.target_p = deg_u, deg_p

    residual = deg_p.astype(np.int64).tolist()
    tree = _Fenwick(residual)
    order = np.lexsort((np.arange(U), -deg_u))
    rows, cols = [], []
    for i in order:
        k = int(deg_u[i])
        chosen = []
        for _ in range(k):
            total = tree.total()
            if total <= 0:
                break
            j = tree.find(int(rng.integers(total)))
            chosen.append(j)
            # hide j until this vertex is done so it is not picked twice
            tree.add(j, -residual[j])
        for j in chosen:
            residual[j] -= 1
            tree.add(j, residual[j])
            rows.append(int(i))
            cols.append(j)
        report.truncated_u += k - len(chosen)
    report.unfilled_p = int(sum(residual))
    if report.truncated_u:
        report.notes.append(f"dropped {report.truncated_u} U-side degree units")
        logger.info("power-law generator dropped %d U-side degree units", report.truncated_u)
    W = sp.csr_matrix((np.ones(len(rows)), (rows, cols)), shape=(U, P))
    return from_matrix(W)


def generate(spec: GenSpec) -> BipartiteGraph:
    return gen_random(spec) if spec.kind == "random" else gen_powerlaw(spec)
