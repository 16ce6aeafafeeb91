"""Ranking on bipartite and n-partite graphs with query-vector priors."""

__version__ = "0.1.0"

from .errors import BiRankError, GraphError, NumericError, OracleSizeError
from .graph import (
    BipartiteGraph,
    NPartiteGraph,
    QueryVector,
    VertexId,
    bipartite_to_npartite,
    build_bipartite,
    build_npartite,
    from_matrix,
    load_edge_list,
    write_edge_list,
)
from .normalize import Scheme, TransitionPair, apply_backward, apply_forward, normalize
from .rank_core import (
    NPartiteConfig,
    RankConfig,
    RankResult,
    birank,
    closed_form,
    eigen_bound_check,
    hyperparam_map,
    npartite_rank,
    objective,
    second_eigenvalue_estimate,
)
