"""Feature, edge, adjusted and AND-similarity homophily."""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np
import scipy.sparse as sp

from graphite import kernels
from graphite.graph import Graph, and_similarity_edges
from graphite.transform import TransformedGraph


class SimilarityKind(enum.Enum):
    COSINE = "cosine"
    BINARY_AND_INF = "and"
    LABEL_MATCH = "label"


class UndefinedMetric(ArithmeticError):
    """A metric whose defining ratio has a zero denominator."""


@dataclass(frozen=True)
class HomophilyReport:
    h_feature: float
    h_edge: float
    h_adjusted: float
    h_and: float
    edge_universe: str

    def as_dict(self) -> dict:
        return dict(self.__dict__)


@dataclass(frozen=True)
class ImprovementRatio:
    """``after / before`` ratios; a ratio is ``None`` when ``before == 0``.

    ``adjusted_baseline_nonpositive`` flags that the adjusted ratio should be
    read alongside ``abs_adjusted`` since its sign is not meaningful.
    """

    delta_feature: float | None
    delta_adjusted: float | None
    abs_feature: float
    abs_adjusted: float
    adjusted_baseline_nonpositive: bool


def _dense(row) -> np.ndarray:
    if sp.issparse(row):
        return np.asarray(row.todense()).ravel().astype(np.float64)
    return np.asarray(row, dtype=np.float64).ravel()


def similarity(kind: SimilarityKind, row_u, row_v) -> float:
    """Similarity of two feature rows, or of two labels / class distributions.

    For ``LABEL_MATCH`` integer labels are compared for equality and class
    distributions are combined by dot product, which is the probability
    that independent draws agree.
    """
    if kind is SimilarityKind.LABEL_MATCH and np.ndim(row_u) == 0 and np.ndim(row_v) == 0:
        return float(int(row_u) == int(row_v))
    u, v = _dense(row_u), _dense(row_v)
    if u.shape != v.shape:
        raise ValueError(f"dimension mismatch: {u.shape[0]} vs {v.shape[0]}")
    if kind is SimilarityKind.COSINE:
        nu, nv = math.sqrt(float(u @ u)), math.sqrt(float(v @ v))
        if nu == 0 or nv == 0:
            return 0.0
        return float(u @ v) / (nu * nv)
    if kind is SimilarityKind.BINARY_AND_INF:
        return float(np.max(np.minimum(u, v), initial=0.0))
    return float(u @ v)


def _as_csr(rows) -> sp.csr_matrix:
    m = sp.csr_matrix(rows, dtype=np.float64)
    m.eliminate_zeros()
    m.sort_indices()
    return m


def edge_similarities(edges: np.ndarray, rows, kind: SimilarityKind) -> np.ndarray:
    """Vectorized per-edge similarity; ``rows`` is indexed by edge endpoints."""
    edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
    eu = np.ascontiguousarray(edges[:, 0])
    ev = np.ascontiguousarray(edges[:, 1])
    if kind is SimilarityKind.LABEL_MATCH and np.ndim(rows) == 1 and not sp.issparse(rows):
        y = np.asarray(rows)
        return (y[eu] == y[ev]).astype(np.float64)
    m = _as_csr(rows)
    ip, ix = m.indptr.astype(np.int64), m.indices.astype(np.int64)
    if kind is SimilarityKind.BINARY_AND_INF:
        if m.nnz and not np.all(m.data == 1):
            # max_k min(u_k, v_k) for general nonnegative rows
            lo = m[eu].minimum(m[ev])
            return np.asarray(lo.max(axis=1).todense()).ravel()
        return kernels.rows_intersect(ip, ix, eu, ev).astype(np.float64)
    dots = kernels.rows_dot(ip, ix, m.data.astype(np.float64), eu, ev)
    if kind is SimilarityKind.LABEL_MATCH:
        return dots
    norms = np.sqrt(np.asarray(m.multiply(m).sum(axis=1)).ravel())
    denom = norms[eu] * norms[ev]
    out = np.zeros(len(edges))
    nz = denom > 0
    out[nz] = dots[nz] / denom[nz]
    return out


def graph_homophily(edges: np.ndarray, rows, kind: SimilarityKind) -> float:
    """Mean similarity over an undirected edge set, each edge counted once."""
    if len(edges) == 0:
        raise UndefinedMetric("homophily of an empty edge set")
    # fsum keeps the result independent of edge order
    return math.fsum(edge_similarities(edges, rows, kind).tolist()) / len(edges)


def and_hom_counts(edges: np.ndarray, binary_rows: sp.csr_matrix) -> tuple[int, int]:
    """``(similar edges, total edges)`` so the AND-homophily can be compared exactly."""
    return int(and_similarity_edges(binary_rows, edges).sum()), len(edges)


def one_hot(labels: np.ndarray, num_classes: int) -> np.ndarray:
    labels = np.asarray(labels)
    out = np.zeros((len(labels), num_classes))
    ok = labels >= 0
    out[np.flatnonzero(ok), labels[ok]] = 1.0
    return out


def soft_labels(t: TransformedGraph) -> np.ndarray:
    """Class distribution of each feature node's labelled neighbours (uniform if none)."""
    g = t.base
    if g.labels is None:
        raise ValueError("soft labels need graph-node labels")
    c = g.num_classes
    f = t.num_feature_nodes
    v, k = t.feature_edges[:, 0], t.feature_edges[:, 1]
    keep = g.label_mask[v]
    counts = np.zeros((f, c))
    np.add.at(counts, (k[keep], g.labels[v[keep]]), 1.0)
    tot = counts.sum(axis=1, keepdims=True)
    out = np.full((f, c), 1.0 / c) if c else counts
    has = tot[:, 0] > 0
    out[has] = counts[has] / tot[has]
    return out


def adjusted_homophily(edges: np.ndarray, label_dists: np.ndarray, num_nodes: int | None = None) -> float:
    """Adjusted homophily from per-node class distributions (one-hot for hard labels).

    Degree mass of each node is split across classes by its distribution,
    so soft-labelled feature nodes contribute fractionally to ``D_c``.
    """
    edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
    p = np.asarray(label_dists, dtype=np.float64)
    if len(edges) == 0:
        raise UndefinedMetric("adjusted homophily of an empty edge set")
    n = num_nodes or len(p)
    h_edge = math.fsum(np.einsum("ij,ij->i", p[edges[:, 0]], p[edges[:, 1]]).tolist()) / len(edges)
    deg = np.bincount(edges.ravel(), minlength=n).astype(np.float64)
    d_c = deg @ p
    two_e = 2.0 * len(edges)
    s = math.fsum(((d_c / two_e) ** 2).tolist())
    if 1.0 - s == 0.0:
        raise UndefinedMetric("all degree mass lies in one class")
    return (h_edge - s) / (1.0 - s)


def adjusted_homophily_graph(g: Graph) -> float:
    if g.labels is None or not g.label_mask.all():
        raise ValueError("adjusted homophily needs every graph node labelled")
    return adjusted_homophily(g.edges, one_hot(g.labels, g.num_classes), g.num_nodes)


def _node_label_dists(t: TransformedGraph) -> np.ndarray:
    g = t.base
    return np.vstack([one_hot(g.labels, g.num_classes), soft_labels(t)])


def homophily_report(g: Graph, universe: str = "E") -> HomophilyReport:
    """All metrics of a plain graph (``universe`` names its edge set, e.g. E or E†)."""
    labelled = g.labels is not None and g.label_mask.all()
    return HomophilyReport(
        h_feature=graph_homophily(g.edges, g.features, SimilarityKind.COSINE),
        h_edge=graph_homophily(g.edges, g.labels, SimilarityKind.LABEL_MATCH) if labelled else math.nan,
        h_adjusted=adjusted_homophily_graph(g) if labelled else math.nan,
        h_and=graph_homophily(g.edges, g.features, SimilarityKind.BINARY_AND_INF),
        edge_universe=universe,
    )


def transformed_homophily_report(t: TransformedGraph) -> HomophilyReport:
    """Metrics over ``E*``; feature nodes use their mean rows for cosine,
    thresholded rows for AND-similarity, and soft labels for label metrics."""
    edges = t.all_edges()
    g = t.base
    labelled = g.labels is not None and g.label_mask.all()
    if labelled:
        dists = _node_label_dists(t)
        h_edge = graph_homophily(edges, dists, SimilarityKind.LABEL_MATCH)
        h_adj = adjusted_homophily(edges, dists, t.num_nodes)
    else:
        h_edge = h_adj = math.nan
    return HomophilyReport(
        h_feature=graph_homophily(edges, t.x_star, SimilarityKind.COSINE),
        h_edge=h_edge,
        h_adjusted=h_adj,
        h_and=graph_homophily(edges, t.x_star_binary, SimilarityKind.BINARY_AND_INF),
        edge_universe="E*",
    )


def improvement_ratio(before: HomophilyReport, after: HomophilyReport) -> ImprovementRatio:
    def ratio(a, b):
        return None if b == 0 or math.isnan(b) else a / b

    return ImprovementRatio(
        delta_feature=ratio(after.h_feature, before.h_feature),
        delta_adjusted=ratio(after.h_adjusted, before.h_adjusted),
        abs_feature=after.h_feature - before.h_feature,
        abs_adjusted=after.h_adjusted - before.h_adjusted,
        adjusted_baseline_nonpositive=not before.h_adjusted > 0,
    )


def appended_mean_rises(base, added) -> bool:
    """Whether appending ``added`` (every element above ``mean(base)``) raises the mean.

    Evaluated in exact rational arithmetic; the answer must always be True.
    """
    a = [Fraction(z) for z in base]
    b = [Fraction(z) for z in added]
    if not a or not b:
        raise ValueError("both multisets must be nonempty")
    mu = sum(a) / len(a)
    if min(b) <= mu:
        raise ValueError("every added element must exceed the base mean")
    return (sum(a) + sum(b)) / (len(a) + len(b)) > mu
