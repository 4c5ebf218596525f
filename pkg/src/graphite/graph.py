"""Undirected graphs with binary discrete node features."""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np
import scipy.sparse as sp

from graphite import kernels


class GraphError(ValueError):
    """Raised when graph input violates a structural invariant."""


@dataclass(frozen=True, eq=False)
class Graph:
    """Undirected graph ``(V, E, X)`` plus optional node labels.

    ``edges`` is an ``(|E|, 2)`` int64 array with ``u < v`` in every row,
    sorted lexicographically. ``features`` is a CSR matrix of 0/1 float64
    values with sorted column indices. Unlabelled nodes carry label -1 and
    are excluded from ``label_mask``.
    """

    num_nodes: int
    edges: np.ndarray
    features: sp.csr_matrix
    labels: np.ndarray | None = None
    num_classes: int = 0
    label_mask: np.ndarray | None = field(default=None)

    @property
    def num_edges(self) -> int:
        return len(self.edges)

    @property
    def num_features(self) -> int:
        return self.features.shape[1]

    @property
    def feature_nnz(self) -> int:
        return int(self.features.nnz)

    @cached_property
    def degrees(self) -> np.ndarray:
        return np.bincount(self.edges.ravel(), minlength=self.num_nodes)

    @cached_property
    def edge_set(self) -> frozenset:
        return frozenset(map(tuple, self.edges.tolist()))

    def has_edge(self, u: int, v: int) -> bool:
        if u > v:
            u, v = v, u
        return (u, v) in self.edge_set

    def feature_sets(self) -> list[frozenset]:
        x = self.features
        return [frozenset(x.indices[x.indptr[i]:x.indptr[i + 1]].tolist()) for i in range(self.num_nodes)]

    def same_structure(self, other: Graph) -> bool:
        if self.num_nodes != other.num_nodes or self.num_classes != other.num_classes:
            return False
        if not np.array_equal(self.edges, other.edges):
            return False
        if self.features.shape != other.features.shape or (self.features != other.features).nnz:
            return False
        if (self.labels is None) != (other.labels is None):
            return False
        return self.labels is None or np.array_equal(self.labels, other.labels)


@dataclass(frozen=True)
class CsrAdjacency:
    indptr: np.ndarray
    indices: np.ndarray
    weights: np.ndarray

    @property
    def num_nodes(self) -> int:
        return len(self.indptr) - 1

    @property
    def nnz(self) -> int:
        return len(self.indices)

    def degree(self, u: int) -> int:
        return int(self.indptr[u + 1] - self.indptr[u])

    def is_symmetric(self) -> bool:
        m = sp.csr_matrix((self.weights, self.indices, self.indptr), shape=(self.num_nodes,) * 2)
        return (m != m.T).nnz == 0


@dataclass(frozen=True)
class AssumptionReport:
    hom_lt_one: bool
    exists_similar_nonadjacent_pair: bool
    feature_count_ratio: float
    feature_nnz_ratio: float
    every_feature_used: bool
    feature_count_ok: bool = True
    feature_nnz_ok: bool = True

    @property
    def heterophilic(self) -> bool:
        return self.hom_lt_one and self.exists_similar_nonadjacent_pair

    @property
    def holds(self) -> bool:
        """Heterophily plus both density bounds. Unused columns are reported
        separately because the transformation drops them."""
        return self.heterophilic and self.feature_count_ok and self.feature_nnz_ok


def canonical_edges(raw_edges, num_nodes: int) -> np.ndarray:
    e = np.asarray(raw_edges, dtype=np.int64).reshape(-1, 2)
    if len(e) and (e.min() < 0 or e.max() >= num_nodes):
        raise GraphError(f"edge endpoint out of range [0, {num_nodes})")
    e = np.sort(e, axis=1)
    e = e[e[:, 0] != e[:, 1]]
    if len(e) == 0:
        return np.empty((0, 2), dtype=np.int64)
    return np.unique(e, axis=0)


def _binary_features(features, num_nodes: int | None, num_features: int | None) -> sp.csr_matrix:
    if features is None:
        n = num_nodes or 0
        return sp.csr_matrix((n, num_features or 0), dtype=np.float64)
    if sp.issparse(features):
        coo = sp.coo_matrix(features)
    elif isinstance(features, np.ndarray):
        coo = sp.coo_matrix(features.reshape(features.shape[0], -1) if features.ndim else features)
    else:
        # list of per-node column-index collections
        rows, cols = [], []
        for i, cs in enumerate(features):
            for c in cs:
                rows.append(i)
                cols.append(int(c))
        if len(features) == 0 and num_nodes is None:
            raise GraphError("cannot infer node count from empty feature list")
        n = num_nodes if num_nodes is not None else len(features)
        f = num_features if num_features is not None else (max(cols) + 1 if cols else 0)
        if cols and (min(cols) < 0 or max(cols) >= f):
            raise GraphError(f"feature index out of range [0, {f})")
        coo = sp.coo_matrix((np.ones(len(rows)), (rows, cols)), shape=(max(n, len(features)), f))
    bad = (coo.data != 0) & (coo.data != 1)
    if bad.any():
        i = int(np.flatnonzero(bad)[0])
        raise GraphError(f"non-binary feature value {coo.data[i]!r} at ({coo.row[i]}, {coo.col[i]})")
    shape = coo.shape
    if num_features is not None and num_features != shape[1]:
        if num_features < shape[1]:
            raise GraphError("feature column index exceeds declared feature count")
        shape = (shape[0], num_features)
    keep = coo.data != 0
    x = sp.csr_matrix((np.ones(int(keep.sum())), (coo.row[keep], coo.col[keep])), shape=shape)
    x.sum_duplicates()
    x.data[:] = 1.0
    x.sort_indices()
    return x


def build_graph(
    raw_edges: Iterable[Sequence[int]],
    features=None,
    labels=None,
    *,
    num_nodes: int | None = None,
    num_classes: int | None = None,
    num_features: int | None = None,
    label_mask=None,
) -> Graph:
    """Validate and canonicalize a raw graph.

    Edges are stored lower-endpoint-first, sorted and deduplicated with
    self-loops dropped. ``features`` may be a scipy sparse matrix, a dense
    array, or a list of per-node column-index collections; duplicate sparse
    entries collapse to a single 1. Labels use -1 for "unlabelled".
    """
    e = np.asarray(list(raw_edges) if not isinstance(raw_edges, np.ndarray) else raw_edges, dtype=np.int64)
    e = e.reshape(-1, 2)
    x = _binary_features(features, num_nodes, num_features)
    n = num_nodes
    if n is None:
        n = max(x.shape[0], int(e.max()) + 1 if len(e) else 0, len(labels) if labels is not None else 0)
    if x.shape[0] > n:
        raise GraphError(f"feature matrix has {x.shape[0]} rows but graph has {n} nodes")
    if x.shape[0] < n:
        x = sp.vstack([x, sp.csr_matrix((n - x.shape[0], x.shape[1]))], format="csr")
        x.sort_indices()
    edges = canonical_edges(e, n)

    y = None
    mask = None
    c = num_classes or 0
    if labels is not None:
        y = np.asarray(labels, dtype=np.int64)
        if y.shape != (n,):
            raise GraphError(f"expected {n} labels, got {y.shape[0]}")
        mask = y >= 0 if label_mask is None else np.asarray(label_mask, dtype=bool).copy()
        if num_classes is None:
            c = int(y[mask].max()) + 1 if mask.any() else 0
        if (y[mask] < 0).any() or (y[mask] >= c).any():
            raise GraphError(f"label out of class range [0, {c})")
        y = y.copy()
        y[~mask] = -1
        y.setflags(write=False)
        mask.setflags(write=False)
    edges.setflags(write=False)
    return Graph(num_nodes=n, edges=edges, features=x, labels=y, num_classes=c, label_mask=mask)


def to_csr(g: Graph, weight: float = 1.0) -> CsrAdjacency:
    n = g.num_nodes
    src = np.concatenate([g.edges[:, 0], g.edges[:, 1]])
    dst = np.concatenate([g.edges[:, 1], g.edges[:, 0]])
    order = np.lexsort((dst, src))
    src, dst = src[order], dst[order]
    indptr = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(np.bincount(src, minlength=n), out=indptr[1:])
    return CsrAdjacency(indptr=indptr, indices=dst.astype(np.int64), weights=np.full(len(dst), float(weight)))


def and_similarity_edges(x: sp.csr_matrix, edges: np.ndarray) -> np.ndarray:
    """Per-edge ``||x[u] AND x[v]||_inf`` for a 0/1 sparse matrix."""
    if len(edges) == 0:
        return np.zeros(0, dtype=np.uint8)
    x = x.tocsr()
    x.sort_indices()
    return kernels.rows_intersect(
        x.indptr.astype(np.int64), x.indices.astype(np.int64),
        np.ascontiguousarray(edges[:, 0]), np.ascontiguousarray(edges[:, 1]),
    )


def shared_feature_pairs(x: sp.csr_matrix) -> np.ndarray:
    """All node pairs ``u < v`` sharing at least one feature, sorted."""
    x = x.tocsr()
    x.sort_indices()
    xt = x.T.tocsr()
    xt.sort_indices()
    return kernels.cooccurrence_pairs(
        x.indptr.astype(np.int64), x.indices.astype(np.int64),
        xt.indptr.astype(np.int64), xt.indices.astype(np.int64),
    )


def check_assumptions(g: Graph, c_features: float = 10.0, c_nnz: float = 10.0) -> AssumptionReport:
    """Evaluate the heterophily and sparse-feature assumptions on ``g``."""
    if g.num_edges == 0:
        raise GraphError("assumptions require a nonempty edge set")
    sims = and_similarity_edges(g.features, g.edges)
    similar_edges = int(sims.sum())
    similar_pairs = len(shared_feature_pairs(g.features))
    col_counts = np.bincount(g.features.indices, minlength=g.num_features)
    count_ratio = g.num_features / g.num_nodes
    nnz_ratio = g.feature_nnz / g.num_edges
    return AssumptionReport(
        hom_lt_one=similar_edges < g.num_edges,
        # every similar edge is also a similar pair, so a surplus means a non-adjacent one
        exists_similar_nonadjacent_pair=similar_pairs > similar_edges,
        feature_count_ratio=count_ratio,
        feature_nnz_ratio=nnz_ratio,
        every_feature_used=bool((col_counts > 0).all()),
        feature_count_ok=count_ratio <= c_features,
        feature_nnz_ok=nnz_ratio <= c_nnz,
    )
