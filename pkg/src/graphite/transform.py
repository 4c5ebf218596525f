"""Feature-node transformation and the naive all-pairs booster."""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.sparse as sp

from graphite.graph import Graph, GraphError, build_graph, shared_feature_pairs


@dataclass(frozen=True)
class TransformOptions:
    drop_unused_features: bool = True
    zero_graph_node_features: bool = False
    row_normalize_graph_node_features: bool = False


@dataclass(frozen=True, eq=False)
class TransformedGraph:
    """Graph nodes ``0..n-1`` followed by feature nodes ``n..n+F-1``.

    ``feature_edges`` holds ``(graph node, feature-node index)`` pairs with
    the feature-node index in ``0..F-1`` (not offset by ``n``). Column ``k``
    of ``x_star`` is the retained feature owned by feature node ``k``;
    ``column_map[k]`` is its column in the original feature matrix.
    """

    base: Graph
    num_feature_nodes: int
    feature_edges: np.ndarray
    x_star: sp.csr_matrix
    column_map: np.ndarray
    options: TransformOptions = TransformOptions()

    @property
    def num_graph_nodes(self) -> int:
        return self.base.num_nodes

    @property
    def num_nodes(self) -> int:
        return self.base.num_nodes + self.num_feature_nodes

    @property
    def num_edges(self) -> int:
        return self.base.num_edges + len(self.feature_edges)

    def feature_node_id(self, k: int) -> int:
        return self.base.num_nodes + k

    def all_edges(self) -> np.ndarray:
        """``E`` followed by ``E_X``, both in global ``V*`` indexing."""
        fe = self.feature_edges.copy()
        fe[:, 1] += self.base.num_nodes
        return np.concatenate([self.base.edges, fe]).astype(np.int64)

    @cached_property
    def _feature_sets(self) -> list[frozenset]:
        sets: list[set] = [set() for _ in range(self.base.num_nodes)]
        for v, k in self.feature_edges.tolist():
            sets[v].add(k)
        return [frozenset(s) for s in sets]

    @cached_property
    def binary_incidence(self) -> sp.csr_matrix:
        """``|V| x F`` 0/1 matrix whose ones are exactly the feature edges."""
        n, f = self.base.num_nodes, self.num_feature_nodes
        m = sp.csr_matrix(
            (np.ones(len(self.feature_edges)), (self.feature_edges[:, 0], self.feature_edges[:, 1])),
            shape=(n, f),
        )
        m.sort_indices()
        return m

    @cached_property
    def x_star_binary(self) -> sp.csr_matrix:
        """``x_star`` with graph-node rows replaced by the retained original
        features and feature-node rows thresholded at > 0."""
        fn = (self.x_star[self.base.num_nodes:] > 0).astype(np.float64)
        m = sp.vstack([self.binary_incidence, fn], format="csr")
        m.sort_indices()
        return m

    @classmethod
    def identity(cls, g: Graph) -> TransformedGraph:
        """``g`` wrapped without feature nodes, for running the model on the original graph."""
        x = g.features.astype(np.float64).tocsr()
        return cls(
            base=g, num_feature_nodes=0, feature_edges=np.empty((0, 2), dtype=np.int64),
            x_star=x, column_map=np.arange(g.num_features, dtype=np.int64),
        )

    def same_structure(self, other: TransformedGraph) -> bool:
        return (
            self.base.same_structure(other.base)
            and self.num_feature_nodes == other.num_feature_nodes
            and np.array_equal(self.feature_edges, other.feature_edges)
            and np.array_equal(self.column_map, other.column_map)
            and self.x_star.shape == other.x_star.shape
            and abs(self.x_star - other.x_star).sum() == 0
        )


@dataclass(frozen=True)
class SizeReport:
    nodes_before: int
    nodes_after: int
    edges_before: int
    edges_after: int
    nnz: int

    def as_dict(self) -> dict:
        return dict(self.__dict__)


def graphite_transform(g: Graph, opts: TransformOptions | None = None) -> TransformedGraph:
    """Add one hub node per used feature and connect it to every graph node having that feature.

    Feature-node rows of ``x_star`` are the mean feature rows of their
    neighbours; graph-node rows are the original features, zeroed or
    row-normalized afterwards when requested.
    """
    opts = opts or TransformOptions()
    x = g.features
    counts = np.bincount(x.indices, minlength=g.num_features)
    if opts.drop_unused_features:
        column_map = np.flatnonzero(counts > 0).astype(np.int64)
    else:
        if (counts == 0).any():
            raise GraphError(f"feature column {int(np.flatnonzero(counts == 0)[0])} is unused")
        column_map = np.arange(g.num_features, dtype=np.int64)
    xr = x[:, column_map].tocsr()
    xr.sort_indices()
    f = len(column_map)

    coo = xr.tocoo()
    order = np.lexsort((coo.col, coo.row))
    feature_edges = np.stack([coo.row[order], coo.col[order]], axis=1).astype(np.int64)

    # mean of member rows = co-occurrence counts divided (not multiplied by a
    # reciprocal) by the member count, so the own-column entry is exactly 1
    col_counts = counts[column_map].astype(np.float64)
    feature_rows = sp.csr_matrix((xr.T @ xr), shape=(f, f), dtype=np.float64)
    feature_rows.sort_indices()
    feature_rows.data /= np.repeat(col_counts, np.diff(feature_rows.indptr))

    graph_rows = xr.astype(np.float64)
    if opts.zero_graph_node_features:
        graph_rows = sp.csr_matrix(graph_rows.shape, dtype=np.float64)
    elif opts.row_normalize_graph_node_features:
        s = np.asarray(graph_rows.sum(axis=1)).ravel()
        s[s == 0] = 1.0
        graph_rows = sp.csr_matrix(graph_rows)
        graph_rows.data /= np.repeat(s, np.diff(graph_rows.indptr))
    x_star = sp.vstack([graph_rows, feature_rows], format="csr")
    x_star.sort_indices()
    feature_edges.setflags(write=False)
    return TransformedGraph(
        base=g, num_feature_nodes=f, feature_edges=feature_edges, x_star=x_star,
        column_map=column_map, options=opts,
    )


def nhb_transform(g: Graph, max_nodes: int = 10_000) -> Graph:
    """Connect every pair of graph nodes that share at least one feature.

    Cost grows quadratically with the node count, hence the ``max_nodes`` guard.
    """
    if g.num_nodes > max_nodes:
        raise GraphError(f"graph has {g.num_nodes} nodes, above the all-pairs cap of {max_nodes}")
    pairs = shared_feature_pairs(g.features)
    edges = np.concatenate([g.edges, pairs]) if len(pairs) else g.edges
    return build_graph(
        edges, g.features, None if g.labels is None else g.labels,
        num_nodes=g.num_nodes, num_classes=g.num_classes if g.labels is not None else None,
        num_features=g.num_features, label_mask=g.label_mask,
    )


def two_hop_witness(t: TransformedGraph, u: int, v: int) -> int | None:
    """Smallest feature node ``k`` with a path ``u - x_k - v``, or ``None``."""
    n = t.base.num_nodes
    if not (0 <= u < n and 0 <= v < n):
        raise IndexError(f"graph node index out of range [0, {n})")
    if u == v:
        raise ValueError("witness requires two distinct nodes")
    common = t._feature_sets[u] & t._feature_sets[v]
    return min(common) if common else None


def size_report(g: Graph, t: TransformedGraph) -> SizeReport:
    if t.base is not g and not t.base.same_structure(g):
        raise ValueError("transformed graph was not produced from this graph")
    return SizeReport(
        nodes_before=g.num_nodes,
        nodes_after=t.num_nodes,
        edges_before=g.num_edges,
        edges_after=t.num_edges,
        nnz=len(t.feature_edges),
    )
