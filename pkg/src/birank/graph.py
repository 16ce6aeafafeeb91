"""Bipartite and n-partite graph containers, construction and TSV ingestion.

Graphs are immutable once built. The weight matrix is stored as a CSR matrix
with sorted indices and no explicit zeros, so iteration order is deterministic.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np
import scipy.sparse as sp

from .errors import GraphError


def _frozen(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


def _row_sums(m: sp.csr_matrix) -> np.ndarray:
    return np.asarray(m.sum(axis=1), dtype=np.float64).ravel()


def _col_sums(m: sp.csr_matrix) -> np.ndarray:
    return np.asarray(m.sum(axis=0), dtype=np.float64).ravel()


@dataclass(frozen=True)
class VertexId:
    side: int
    index: int

    def __post_init__(self):
        if self.side < 0 or self.index < 0:
            raise GraphError(f"negative vertex id {self}")


@dataclass(frozen=True, eq=False)
class BipartiteGraph:
    """Undirected weighted bipartite graph between a U side and a P side.

    ``W`` is ``u_count x p_count``; ``d_u``/``d_p`` are the weighted degrees.
    ``u_ids``/``p_ids`` hold external string ids when the graph came from a
    file or an application pipeline.
    """

    W: sp.csr_matrix
    d_u: np.ndarray
    d_p: np.ndarray
    u_ids: tuple[str, ...] | None = None
    p_ids: tuple[str, ...] | None = None

    @property
    def u_count(self) -> int:
        return self.W.shape[0]

    @property
    def p_count(self) -> int:
        return self.W.shape[1]

    @property
    def n_edges(self) -> int:
        return self.W.nnz

    def edges(self):
        """Yield ``(i, j, w)`` in row-major sorted order."""
        W = self.W
        for i in range(W.shape[0]):
            for k in range(W.indptr[i], W.indptr[i + 1]):
                yield i, int(W.indices[k]), float(W.data[k])

    def check(self) -> None:
        """Re-verify the structural invariants; raises GraphError."""
        if np.any(self.W.data <= 0) or not np.all(np.isfinite(self.W.data)):
            raise GraphError("stored weights must be finite and > 0")
        if not np.array_equal(_row_sums(self.W), self.d_u):
            raise GraphError("cached U degrees are stale")
        if not np.array_equal(_col_sums(self.W), self.d_p):
            raise GraphError("cached P degrees are stale")


@dataclass(frozen=True)
class QueryVector:
    """Prior scores over the vertices of one partition."""

    side: int
    scores: np.ndarray

    def __post_init__(self):
        s = np.array(self.scores, dtype=np.float64)
        if s.ndim != 1:
            raise GraphError("query vector must be one-dimensional")
        if not np.all(np.isfinite(s)) or np.any(s < 0):
            raise GraphError("query vector entries must be finite and >= 0")
        object.__setattr__(self, "scores", _frozen(s))

    def __len__(self):
        return len(self.scores)

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.scores, dtype=dtype)


def _csr(rows, cols, vals, shape) -> sp.csr_matrix:
    m = sp.coo_matrix(
        (np.asarray(vals, dtype=np.float64), (np.asarray(rows, dtype=np.int64), np.asarray(cols, dtype=np.int64))),
        shape=shape,
    ).tocsr()
    m.sum_duplicates()
    m.sort_indices()
    return m


def _validate_edges(edges, n_rows, n_cols, what="edge"):
    rows, cols, vals = [], [], []
    for k, e in enumerate(edges):
        try:
            i, j, w = e
        except (TypeError, ValueError):
            raise GraphError(f"{what} #{k} is not an (i, j, weight) triple: {e!r}") from None
        if not (0 <= i < n_rows) or not (0 <= j < n_cols):
            raise GraphError(f"{what} #{k} ({i}, {j}) out of range for {n_rows}x{n_cols}")
        w = float(w)
        if not math.isfinite(w) or w <= 0:
            raise GraphError(f"{what} #{k} ({i}, {j}) has invalid weight {w!r}")
        rows.append(i)
        cols.append(j)
        vals.append(w)
    return rows, cols, vals


def from_matrix(W, u_ids=None, p_ids=None) -> BipartiteGraph:
    """Wrap an existing non-negative (sparse or dense) matrix.

    Explicit zeros are dropped.
    """
    m = sp.csr_matrix(W, dtype=np.float64, copy=True)
    m.eliminate_zeros()
    m.sum_duplicates()
    m.sort_indices()
    if m.nnz and (np.any(m.data < 0) or not np.all(np.isfinite(m.data))):
        raise GraphError("weights must be finite and non-negative")
    if u_ids is not None and len(u_ids) != m.shape[0]:
        raise GraphError("u_ids length does not match matrix rows")
    if p_ids is not None and len(p_ids) != m.shape[1]:
        raise GraphError("p_ids length does not match matrix columns")
    for a in (m.data, m.indices, m.indptr):
        a.setflags(write=False)
    return BipartiteGraph(
        W=m,
        d_u=_frozen(_row_sums(m)),
        d_p=_frozen(_col_sums(m)),
        u_ids=tuple(u_ids) if u_ids is not None else None,
        p_ids=tuple(p_ids) if p_ids is not None else None,
    )


def build_bipartite(u_count: int, p_count: int, edges: Iterable, u_ids=None, p_ids=None) -> BipartiteGraph:
    """Build a bipartite graph from ``(i, j, weight)`` triples.

    Weights must be finite and strictly positive; duplicate pairs are summed.
    """
    if u_count < 0 or p_count < 0:
        raise GraphError("partition sizes must be non-negative")
    rows, cols, vals = _validate_edges(edges, u_count, p_count)
    return from_matrix(_csr(rows, cols, vals, (u_count, p_count)), u_ids=u_ids, p_ids=p_ids)


def _split_line(raw: str, n_fields: int, path, lineno):
    parts = raw.rstrip("\r\n").split("\t")
    if len(parts) != n_fields:
        raise GraphError(f"expected {n_fields} tab-separated fields, got {len(parts)}", path, lineno)
    if any(p == "" for p in parts[:-1]):
        raise GraphError("empty id field", path, lineno)
    try:
        w = float(parts[-1])
    except ValueError:
        raise GraphError(f"weight {parts[-1]!r} is not a number", path, lineno) from None
    if not math.isfinite(w) or w <= 0:
        raise GraphError(f"weight {parts[-1]!r} must be finite and > 0", path, lineno)
    return parts[:-1], w


def iter_tsv_records(path, n_fields: int):
    """Yield ``(lineno, ids, weight)`` for each data line of a TSV file.

    Blank lines and lines starting with ``#`` are skipped.
    """
    path = Path(path)
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            if not raw.strip() or raw.startswith("#"):
                continue
            ids, w = _split_line(raw, n_fields, path, lineno)
            yield lineno, ids, w


class _Interner:
    def __init__(self):
        self.index: dict[str, int] = {}

    def __call__(self, key: str) -> int:
        i = self.index.get(key)
        if i is None:
            i = self.index[key] = len(self.index)
        return i

    def ids(self) -> tuple[str, ...]:
        return tuple(self.index)


def load_edge_list(path) -> BipartiteGraph:
    """Read a ``u_id<TAB>p_id<TAB>weight`` file.

    Ids are mapped to dense indices in first-appearance order and kept on the
    returned graph as ``u_ids``/``p_ids``.
    """
    users, items = _Interner(), _Interner()
    rows, cols, vals = [], [], []
    for _, (u, p), w in iter_tsv_records(path, 3):
        rows.append(users(u))
        cols.append(items(p))
        vals.append(w)
    if not vals:
        raise GraphError("no edges found", path)
    shape = (len(users.index), len(items.index))
    return from_matrix(_csr(rows, cols, vals, shape), u_ids=users.ids(), p_ids=items.ids())


def write_edge_list(graph: BipartiteGraph, path) -> None:
    """Write ``graph`` in the edge-list format; weights use ``repr`` so reloads are exact."""
    u_ids = graph.u_ids or tuple(f"u{i}" for i in range(graph.u_count))
    p_ids = graph.p_ids or tuple(f"p{j}" for j in range(graph.p_count))
    with open(path, "w", encoding="utf-8") as fh:
        for i, j, w in graph.edges():
            fh.write(f"{u_ids[i]}\t{p_ids[j]}\t{w!r}\n")


@dataclass(frozen=True, eq=False)
class NPartiteGraph:
    """Graph over ``n`` vertex partitions with pairwise relation matrices.

    ``relations[(t, l)]`` is the ``|P_t| x |P_l|`` weight matrix; both
    directions are always present. ``degrees[(t, l)]`` is the weighted degree
    of each vertex of ``P_t`` counted within relation ``(t, l)`` only.
    """

    partition_sizes: tuple[int, ...]
    relations: Mapping[tuple[int, int], sp.csr_matrix]
    degrees: Mapping[tuple[int, int], np.ndarray]
    ids: tuple[tuple[str, ...], ...] | None = None

    @property
    def n(self) -> int:
        return len(self.partition_sizes)

    def neighbors_of(self, t: int) -> list[int]:
        return sorted(l for (s, l) in self.relations if s == t)


def build_npartite(
    partition_sizes: Sequence[int],
    relation_edges: Mapping[tuple[int, int], Iterable],
    ids: Sequence[Sequence[str]] | None = None,
) -> NPartiteGraph:
    """Build an n-partite graph; missing reverse relations are materialized as transposes."""
    sizes = tuple(int(s) for s in partition_sizes)
    if any(s < 0 for s in sizes):
        raise GraphError("partition sizes must be non-negative")
    n = len(sizes)
    built: dict[tuple[int, int], sp.csr_matrix] = {}
    for (t, l), edges in relation_edges.items():
        if not (0 <= t < n and 0 <= l < n):
            raise GraphError(f"relation ({t}, {l}) references a missing partition")
        if t == l:
            raise GraphError(f"relation ({t}, {l}) would create intra-partition edges")
        rows, cols, vals = _validate_edges(edges, sizes[t], sizes[l], what=f"relation ({t},{l}) edge")
        built[(t, l)] = _csr(rows, cols, vals, (sizes[t], sizes[l]))
    return _close_relations(sizes, built, ids)


def npartite_from_matrices(matrices: Mapping[tuple[int, int], object], partition_sizes=None, ids=None) -> NPartiteGraph:
    """Like :func:`build_npartite` but from ready-made weight matrices."""
    built = {}
    for (t, l), m in matrices.items():
        if t == l:
            raise GraphError(f"relation ({t}, {l}) would create intra-partition edges")
        c = sp.csr_matrix(m, dtype=np.float64, copy=True)
        c.eliminate_zeros()
        c.sum_duplicates()
        c.sort_indices()
        if c.nnz and (np.any(c.data < 0) or not np.all(np.isfinite(c.data))):
            raise GraphError(f"relation ({t}, {l}) has invalid weights")
        built[(t, l)] = c
    if partition_sizes is None:
        n = 1 + max(max(k) for k in built)
        sizes = [None] * n
        for (t, l), m in built.items():
            sizes[t], sizes[l] = m.shape
        if any(s is None for s in sizes):
            raise GraphError("cannot infer the size of an unconnected partition")
        partition_sizes = sizes
    sizes = tuple(int(s) for s in partition_sizes)
    for (t, l), m in built.items():
        if m.shape != (sizes[t], sizes[l]):
            raise GraphError(f"relation ({t}, {l}) has shape {m.shape}, expected {(sizes[t], sizes[l])}")
    return _close_relations(sizes, built, ids)


def _close_relations(sizes, built, ids) -> NPartiteGraph:
    relations = {}
    for (t, l), m in built.items():
        rev = built.get((l, t))
        mt = m.T.tocsr()
        mt.sort_indices()
        if rev is not None:
            same = rev.shape == mt.shape and (rev != mt).nnz == 0
            if not same:
                raise GraphError(f"relations ({t}, {l}) and ({l}, {t}) are not transposes of each other")
        relations[(t, l)] = m
        relations.setdefault((l, t), rev if rev is not None else mt)
    for m in relations.values():
        for a in (m.data, m.indices, m.indptr):
            a.setflags(write=False)
    degrees = {k: _frozen(_row_sums(m)) for k, m in relations.items()}
    if ids is not None:
        if len(ids) != len(sizes) or any(len(x) != s for x, s in zip(ids, sizes)):
            raise GraphError("ids do not match partition sizes")
        ids = tuple(tuple(x) for x in ids)
    return NPartiteGraph(partition_sizes=sizes, relations=dict(sorted(relations.items())), degrees=degrees, ids=ids)


def bipartite_to_npartite(graph: BipartiteGraph) -> NPartiteGraph:
    """View a bipartite graph as a 2-partite one with partition 0 = P, 1 = U.

    That ordering makes the n-partite update sweep (partition 0 first)
    reproduce the p-then-u order of the bipartite solver.
    """
    ids = None
    if graph.u_ids is not None and graph.p_ids is not None:
        ids = (graph.p_ids, graph.u_ids)
    return npartite_from_matrices({(1, 0): graph.W}, partition_sizes=(graph.p_count, graph.u_count), ids=ids)
