"""Iterative bipartite ranking, its closed-form fixed point and diagnostics.

The solver alternates

    p <- alpha * backward @ u + (1 - alpha) * p0
    u <- beta  * forward  @ p + (1 - beta)  * u0

until the squared change of ``(p, u)`` over one sweep drops to ``tol``. With
the symmetric (``birank``) normalization this is block coordinate descent on

    R(p, u) = sum_ij w_ij (p_j / sqrt(d_j) - u_i / sqrt(d_i))^2
              + gamma * |p - p0|^2 + eta * |u - u0|^2

with ``gamma = (1 - alpha) / alpha`` and ``eta = (1 - beta) / beta``.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np
import scipy.sparse as sp

from .errors import NumericError, OracleSizeError
from .graph import BipartiteGraph, NPartiteGraph
from .normalize import Scheme, TransitionPair, symmetric_normalize

logger = logging.getLogger(__name__)

DENSE_LIMIT = 2000


@dataclass
class RankConfig:
    """Solver settings.

    ``init`` is ``"uniform"``, ``"query"`` or a ``(p, u)`` pair of arrays.
    """

    alpha: float = 0.85
    beta: float = 0.85
    max_iters: int = 200
    tol: float = 1e-4
    init: object = "uniform"
    track_objective: bool = True

    def __post_init__(self):
        for name in ("alpha", "beta"):
            v = getattr(self, name)
            if not (0.0 <= v <= 1.0):
                raise ValueError(f"{name} must lie in [0, 1], got {v}")
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if not self.tol > 0:
            raise ValueError("tol must be > 0")
        if isinstance(self.init, str) and self.init not in ("uniform", "query"):
            raise ValueError(f"unknown init {self.init!r}")


@dataclass
class RankResult:
    p: np.ndarray
    u: np.ndarray
    iterations: int
    converged: bool
    objective_trace: list[float] = field(default_factory=list)
    diff_trace: list[float] = field(default_factory=list)
    iter_times: list[float] = field(default_factory=list)


def _vec(x, n: int, what: str) -> np.ndarray:
    v = np.array(x, dtype=np.float64).ravel()
    if v.shape != (n,):
        raise ValueError(f"{what} has length {v.size}, expected {n}")
    if not np.all(np.isfinite(v)):
        raise ValueError(f"{what} contains non-finite values")
    return v


def _uniform(n: int) -> np.ndarray:
    return np.full(n, 1.0 / n) if n else np.zeros(0)


def _initial(cfg: RankConfig, p0, u0):
    if isinstance(cfg.init, str):
        if cfg.init == "query":
            return p0.copy(), u0.copy()
        return _uniform(len(p0)), _uniform(len(u0))
    p_init, u_init = cfg.init
    return _vec(p_init, len(p0), "initial p"), _vec(u_init, len(u0), "initial u")


def hyperparam_map(alpha: float, beta: float) -> tuple[float, float]:
    """Regularization weights ``(gamma, eta)`` matching damping ``(alpha, beta)``."""
    if not (0.0 < alpha <= 1.0 and 0.0 < beta <= 1.0):
        raise ValueError(f"alpha and beta must lie in (0, 1], got ({alpha}, {beta})")
    return (1.0 - alpha) / alpha, (1.0 - beta) / beta


def objective(graph: BipartiteGraph, p, u, gamma: float, eta: float, p0, u0) -> float:
    """Regularization value: degree-normalized smoothness plus weighted fit to the priors."""
    p = _vec(p, graph.p_count, "p")
    u = _vec(u, graph.u_count, "u")
    p0 = _vec(p0, graph.p_count, "p0")
    u0 = _vec(u0, graph.u_count, "u0")
    W = graph.W
    rows = np.repeat(np.arange(W.shape[0]), np.diff(W.indptr))
    cols = W.indices
    # stored entries imply both endpoint degrees are > 0
    gap = p[cols] / np.sqrt(graph.d_p[cols]) - u[rows] / np.sqrt(graph.d_u[rows])
    smooth = float(np.dot(W.data, gap * gap))
    return smooth + gamma * float(np.sum((p - p0) ** 2)) + eta * float(np.sum((u - u0) ** 2))


def birank(tp: TransitionPair, p0, u0, cfg: RankConfig | None = None) -> RankResult:
    """Run the alternating ranking iteration over ``tp``.

    Parameters
    ----------
    tp : TransitionPair
        Output of :func:`birank.normalize.normalize`.
    p0, u0 : array-like or QueryVector
        Priors over the P and U sides.
    cfg : RankConfig, optional

    Returns
    -------
    RankResult
        Final vectors and per-iteration traces. ``objective_trace`` is only
        filled for the ``birank`` scheme with ``alpha, beta > 0``.

    Notes
    -----
    A side whose damping is zero ignores the graph, so it is pinned to its
    prior from the start. The ``hits`` scheme L2-normalizes both vectors after
    each sweep since ``W`` itself is not contractive.
    """
    cfg = cfg or RankConfig()
    P, U = tp.p_count, tp.u_count
    p0 = _vec(p0, P, "p0")
    u0 = _vec(u0, U, "u0")
    a, b = cfg.alpha, cfg.beta
    p, u = _initial(cfg, p0, u0)
    if a == 0.0:
        p = p0.copy()
    if b == 0.0:
        u = u0.copy()

    F, B = tp.forward, tp.backward
    renorm = tp.scheme is Scheme.HITS
    track = cfg.track_objective and tp.scheme is Scheme.BIRANK and tp.graph is not None and a > 0 and b > 0
    if track:
        gamma, eta = hyperparam_map(a, b)

    result = RankResult(p=p, u=u, iterations=0, converged=False)
    for it in range(1, cfg.max_iters + 1):
        t0 = time.perf_counter()
        p_new = a * (B @ u) + (1.0 - a) * p0
        u_new = b * (F @ p_new) + (1.0 - b) * u0
        if renorm:
            for v in (p_new, u_new):
                n = np.linalg.norm(v)
                if n > 0 and np.isfinite(n):
                    v /= n
        dp = p_new - p
        du = u_new - u
        diff = float(np.dot(dp, dp) + np.dot(du, du))
        result.iter_times.append(time.perf_counter() - t0)
        if not np.isfinite(diff):
            raise NumericError(f"non-finite scores at iteration {it}")
        p, u = p_new, u_new
        result.diff_trace.append(diff)
        result.iterations = it
        if track:
            result.objective_trace.append(objective(tp.graph, p, u, gamma, eta, p0, u0))
        if diff <= cfg.tol:
            result.converged = True
            break
    else:
        logger.info("no convergence after %d iterations (last diff %.3g)", cfg.max_iters, diff)
    result.p, result.u = p, u
    return result


def _dense_guard(tp: TransitionPair, max_dense: int):
    if tp.p_count > max_dense or tp.u_count > max_dense:
        raise OracleSizeError(
            f"graph {tp.u_count}x{tp.p_count} exceeds the dense limit of {max_dense} vertices per side"
        )


def closed_form(tp: TransitionPair, p0, u0, alpha: float, beta: float, max_dense: int = DENSE_LIMIT):
    """Stationary ``(p*, u*)`` by a dense linear solve.

    Uses ``backward`` wherever the symmetric derivation has ``S^T``, so it is
    the fixed point of the iteration for every scheme; for ``birank`` it is
    the usual ``(I - ab S^T S)^-1 [a(1-b) S^T u0 + (1-a) p0]`` pair.
    """
    _dense_guard(tp, max_dense)
    if alpha * beta >= 1.0:
        raise NumericError("alpha * beta >= 1: the stationary system is singular")
    p0 = _vec(p0, tp.p_count, "p0")
    u0 = _vec(u0, tp.u_count, "u0")
    F = tp.forward.toarray()
    B = tp.backward.toarray()
    ab = alpha * beta
    try:
        p = np.linalg.solve(np.eye(tp.p_count) - ab * (B @ F), alpha * (1 - beta) * (B @ u0) + (1 - alpha) * p0)
        u = np.linalg.solve(np.eye(tp.u_count) - ab * (F @ B), beta * (1 - alpha) * (F @ p0) + (1 - beta) * u0)
    except np.linalg.LinAlgError as exc:
        raise NumericError(f"stationary system is singular: {exc}") from exc
    return p, u


def eigen_bound_check(tp: TransitionPair, alpha: float, beta: float, max_dense: int = DENSE_LIMIT):
    """Largest |eigenvalue| of ``alpha * beta * backward @ forward`` and whether it is <= alpha * beta."""
    _dense_guard(tp, max_dense)
    M = alpha * beta * (tp.backward @ tp.forward).toarray()
    if M.size == 0:
        lam = 0.0
    elif tp.scheme is Scheme.BIRANK:
        lam = float(np.max(np.abs(np.linalg.eigvalsh((M + M.T) / 2))))
    else:
        lam = float(np.max(np.abs(np.linalg.eigvals(M))))
    return lam, lam <= alpha * beta + 1e-9


class SpectralEstimate(NamedTuple):
    value: float
    reliable: bool
    method: str


def _power(matvec, n, rng, deflate=None, max_iters=1000, tol=1e-10):
    x = rng.standard_normal(n)
    if deflate is not None:
        x -= deflate * np.dot(deflate, x)
    x /= np.linalg.norm(x)
    lam = 0.0
    for _ in range(max_iters):
        y = matvec(x)
        if deflate is not None:
            y -= deflate * np.dot(deflate, y)
        lam_new = float(np.dot(x, y))
        ny = np.linalg.norm(y)
        if ny == 0:
            return 0.0, x, True
        y /= ny
        if abs(lam_new - lam) <= tol * max(1.0, abs(lam_new)):
            return lam_new, y, True
        x, lam = y, lam_new
    return lam, x, False


def second_eigenvalue_estimate(tp: TransitionPair, method: str = "auto", max_dense: int = DENSE_LIMIT,
                               max_iters: int = 5000, tol: float = 1e-12, seed: int = 0) -> SpectralEstimate:
    """Estimate ``|lambda_2|`` of ``S^T S``, the quantity governing convergence speed.

    ``method="dense"`` uses a symmetric eigensolver, ``"power"`` a deflated
    power iteration (flagged unreliable when it exhausts ``max_iters``).
    With fewer than two P vertices the result is 0.
    """
    n = tp.p_count
    if n < 2:
        return SpectralEstimate(0.0, True, "degenerate")
    if method == "auto":
        method = "dense" if n <= max_dense else "power"
    if method == "dense":
        M = (tp.backward @ tp.forward).toarray()
        ev = np.sort(np.abs(np.linalg.eigvalsh((M + M.T) / 2)))[::-1]
        return SpectralEstimate(float(ev[1]), True, "dense")
    if method != "power":
        raise ValueError(f"unknown method {method!r}")
    F, B = tp.forward, tp.backward

    def matvec(x):
        return B @ (F @ x)

    rng = np.random.default_rng(seed)
    _, v1, ok1 = _power(matvec, n, rng, max_iters=max_iters, tol=tol)
    lam2, _, ok2 = _power(matvec, n, rng, deflate=v1, max_iters=max_iters, tol=tol)
    return SpectralEstimate(abs(lam2), ok1 and ok2, "power")


# ---------------------------------------------------------------------------
# n-partite generalization


@dataclass
class NPartiteConfig:
    """``alphas[t, l]`` weights the pull of partition ``l`` on partition ``t``."""

    alphas: np.ndarray
    max_iters: int = 200
    tol: float = 1e-4

    def __post_init__(self):
        a = np.array(self.alphas, dtype=np.float64)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise ValueError("alphas must be a square matrix")
        if np.any(a < 0) or not np.all(np.isfinite(a)):
            raise ValueError("alphas must be finite and >= 0")
        if np.any(np.diag(a) != 0):
            raise ValueError("alphas[t, t] must be 0")
        if np.any(a.sum(axis=1) > 1.0 + 1e-12):
            raise ValueError("each row of alphas must sum to <= 1")
        self.alphas = a
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if not self.tol > 0:
            raise ValueError("tol must be > 0")


@dataclass
class NPartiteResult:
    vectors: list[np.ndarray]
    iterations: int
    converged: bool
    diff_trace: list[float] = field(default_factory=list)


def npartite_transitions(graph: NPartiteGraph) -> dict[tuple[int, int], sp.csr_matrix]:
    """``S_tl = D_t^-1/2 W_tl D_l^-1/2`` for every stored relation, degrees taken per relation."""
    return {
        (t, l): symmetric_normalize(W, graph.degrees[(t, l)], graph.degrees[(l, t)])
        for (t, l), W in graph.relations.items()
    }


def npartite_rank(graph: NPartiteGraph, queries: Sequence, cfg: NPartiteConfig) -> NPartiteResult:
    """Rank all partitions of ``graph`` jointly.

    Partitions are updated in index order within a sweep, each using the
    latest values of the others. With two partitions (0 = P, 1 = U) this is
    the bipartite solver step for step.
    """
    n = graph.n
    if len(queries) != n:
        raise ValueError(f"expected {n} query vectors, got {len(queries)}")
    alphas = cfg.alphas
    if alphas.shape != (n, n):
        raise ValueError(f"alphas has shape {alphas.shape}, expected {(n, n)}")
    q = [_vec(x, s, f"query {t}") for t, (x, s) in enumerate(zip(queries, graph.partition_sizes))]
    S = npartite_transitions(graph)
    terms = [[(alphas[t, l], S[(t, l)], l) for l in graph.neighbors_of(t) if alphas[t, l] > 0] for t in range(n)]
    keep = [1.0 - sum(a for a, _, _ in terms[t]) for t in range(n)]
    # rows with no pull from the graph are pinned to their prior from the start
    x = [q[t].copy() if not terms[t] else _uniform(len(q[t])) for t in range(n)]

    res = NPartiteResult(vectors=x, iterations=0, converged=False)
    for it in range(1, cfg.max_iters + 1):
        diff = 0.0
        for t in range(n):
            acc = None
            for a, S_tl, l in terms[t]:
                contrib = a * (S_tl @ x[l])
                acc = contrib if acc is None else acc + contrib
            new = keep[t] * q[t] if acc is None else acc + keep[t] * q[t]
            d = new - x[t]
            diff += float(np.dot(d, d))
            x[t] = new
        if not np.isfinite(diff):
            raise NumericError(f"non-finite scores at iteration {it}")
        res.diff_trace.append(diff)
        res.iterations = it
        if diff <= cfg.tol:
            res.converged = True
            break
    res.vectors = x
    return res


def npartite_objective(graph: NPartiteGraph, vectors, queries, gammas, etas) -> float:
    """Smoothness over every ordered relation pair plus per-partition fit terms.

    ``gammas[t, l]`` weights relation ``(t, l)``; ``etas[t]`` weights the fit of
    partition ``t``. Each undirected relation is visited in both directions,
    as in the double sum over ``t`` and ``l != t``.
    """
    total = 0.0
    for t, (x, x0) in enumerate(zip(vectors, queries)):
        d = np.asarray(x, dtype=np.float64) - np.asarray(x0, dtype=np.float64)
        total += etas[t] * float(np.dot(d, d))
    for (t, l), W in graph.relations.items():
        if gammas[t][l] == 0:
            continue
        rows = np.repeat(np.arange(W.shape[0]), np.diff(W.indptr))
        cols = W.indices
        xt = np.asarray(vectors[t])[rows] / np.sqrt(graph.degrees[(t, l)][rows])
        xl = np.asarray(vectors[l])[cols] / np.sqrt(graph.degrees[(l, t)][cols])
        total += gammas[t][l] * float(np.dot(W.data, (xt - xl) ** 2))
    return total
