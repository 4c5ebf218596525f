"""Dataset files, synthetic heterophilic graphs and report emission.

A dataset directory holds three tab-separated files, each starting with a
``# key=value ...`` header line:

* ``edges.tsv``    -- ``u<TAB>v`` per undirected edge (header: nodes, edges)
* ``features.tsv`` -- ``node<TAB>feature[<TAB>value]`` per nonzero entry
  (header: nodes, features, nnz)
* ``labels.tsv``   -- ``node<TAB>class`` (header: nodes, classes); nodes
  without a line are unlabelled

A transformed-graph directory adds ``feature_edges.tsv``, ``x_star.tsv``,
``column_map.tsv``, ``options.json`` and ``size_report.json``.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from graphite import serialize
from graphite.graph import Graph, GraphError, build_graph, check_assumptions
from graphite.homophily import SimilarityKind, graph_homophily
from graphite.transform import TransformedGraph, TransformOptions, size_report
from graphite.serialize import fmt_float

# statistics of the public benchmark copies, used only for warnings
KNOWN_STATS = {
    "actor": dict(nodes=7600, edges=33544, features=931, classes=5),
    "squirrel-f": dict(nodes=2223, edges=46998, features=2089, classes=5),
    "chameleon-f": dict(nodes=890, edges=8854, features=2325, classes=5),
    "minesweeper": dict(nodes=10000, edges=39402, features=7, classes=2),
    "cora": dict(nodes=2708, edges=5429, features=1433, classes=7),
    "citeseer": dict(nodes=3327, edges=4732, features=3703, classes=6),
}


class DatasetFormatError(GraphError):
    pass


@dataclass(frozen=True)
class DatasetBundle:
    graph_path: Path
    feature_path: Path
    label_path: Path | None
    num_classes: int | None = None
    name: str = ""

    @classmethod
    def from_dir(cls, path, name: str | None = None) -> DatasetBundle:
        p = Path(path)
        labels = p / "labels.tsv"
        return cls(p / "edges.tsv", p / "features.tsv", labels if labels.exists() else None,
                   name=name if name is not None else p.name)


# -- parsing ------------------------------------------------------------------

def _read_table(path: Path, min_cols: int, max_cols: int, kinds) -> tuple[dict, list[tuple]]:
    header: dict = {}
    rows = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            text = line.strip()
            if not text:
                continue
            if text.startswith("#"):
                for tok in text[1:].split():
                    if "=" in tok:
                        k, v = tok.split("=", 1)
                        header[k] = v
                continue
            parts = text.split()
            if not min_cols <= len(parts) <= max_cols:
                raise DatasetFormatError(f"{path.name}:{lineno}: expected {min_cols}-{max_cols} columns, got {len(parts)}")
            try:
                rows.append(tuple(kind(x) for kind, x in zip(kinds, parts)))
            except ValueError:
                raise DatasetFormatError(f"{path.name}:{lineno}: cannot parse {text!r}") from None
    return header, rows


def _int_header(header: dict, key: str) -> int | None:
    return int(header[key]) if key in header else None


def _binarize(rows, num_features: int | None, mode: str | None):
    """Return (rows with binary values, feature count)."""
    if mode == "onehot":
        # every distinct (column, value) pair with a nonzero value becomes its own indicator column
        pairs = sorted({(c, v) for _, c, v in rows if v != 0})
        index = {pv: i for i, pv in enumerate(pairs)}
        return [(n, index[(c, v)], 1.0) for n, c, v in rows if v != 0], len(pairs)
    if mode == "threshold":
        return [(n, c, 1.0 if v > 0 else 0.0) for n, c, v in rows], num_features
    if mode is not None:
        raise ValueError(f"unknown binarize mode {mode!r}")
    return rows, num_features


def load_dataset(bundle: DatasetBundle | str | Path, binarize: str | None = None,
                 expected: dict | None = None) -> Graph:
    """Parse a dataset directory into a validated :class:`Graph`.

    Non-binary feature values are rejected unless ``binarize`` is
    ``"threshold"`` (value > 0 becomes 1) or ``"onehot"`` (each distinct
    value of a column gets its own indicator column). Mismatches against
    ``expected`` (or the known statistics of a recognised dataset name)
    only warn.
    """
    if not isinstance(bundle, DatasetBundle):
        bundle = DatasetBundle.from_dir(bundle)
    eh, edges = _read_table(Path(bundle.graph_path), 2, 2, (int, int))
    fh, feats = _read_table(Path(bundle.feature_path), 2, 3, (int, int, float))
    feats = [(r[0], r[1], r[2] if len(r) == 3 else 1.0) for r in feats]
    labels = None
    lh: dict = {}
    num_nodes = _int_header(eh, "nodes") or _int_header(fh, "nodes")
    num_features = _int_header(fh, "features")
    feats, num_features = _binarize(feats, num_features, binarize)
    if bundle.label_path is not None:
        lh, lrows = _read_table(Path(bundle.label_path), 2, 2, (int, int))
        n_lab = num_nodes if num_nodes is not None else (max(r[0] for r in lrows) + 1 if lrows else 0)
        labels = np.full(n_lab, -1, dtype=np.int64)
        for node, cls in lrows:
            if not 0 <= node < n_lab:
                raise DatasetFormatError(f"labels.tsv: node {node} out of range")
            labels[node] = cls
    if num_nodes is None:
        cands = [max(max(e) for e in edges) + 1 if edges else 0, max((r[0] for r in feats), default=-1) + 1]
        num_nodes = max(cands)
        if labels is not None and len(labels) < num_nodes:
            labels = np.concatenate([labels, np.full(num_nodes - len(labels), -1)])
    if num_features is None:
        num_features = max((r[1] for r in feats), default=-1) + 1
    if feats:
        arr = np.array(feats, dtype=np.float64)
        if arr[:, 0].max() >= num_nodes or arr[:, 1].max() >= num_features or arr[:, :2].min() < 0:
            raise DatasetFormatError("features.tsv: index out of range")
        x = sp.coo_matrix((arr[:, 2], (arr[:, 0].astype(int), arr[:, 1].astype(int))), shape=(num_nodes, num_features))
    else:
        x = sp.coo_matrix((num_nodes, num_features))
    num_classes = bundle.num_classes or _int_header(lh, "classes")
    g = build_graph(np.array(edges, dtype=np.int64).reshape(-1, 2), x, labels, num_nodes=num_nodes,
                    num_classes=num_classes, num_features=num_features)
    exp = expected if expected is not None else KNOWN_STATS.get(bundle.name.lower())
    if exp:
        got = dict(nodes=g.num_nodes, edges=g.num_edges, features=g.num_features, classes=g.num_classes)
        for key, want in exp.items():
            if key in got and got[key] != want:
                warnings.warn(f"{bundle.name}: {key}={got[key]}, expected {want}", stacklevel=2)
    return g


# -- writing ------------------------------------------------------------------

def _write(path: Path, header: dict, lines) -> None:
    head = "# " + " ".join(f"{k}={v}" for k, v in header.items())
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(head + "\n")
        for line in lines:
            fh.write(line + "\n")


def save_dataset(g: Graph, path) -> None:
    p = Path(path)
    p.mkdir(parents=True, exist_ok=True)
    _write(p / "edges.tsv", {"nodes": g.num_nodes, "edges": g.num_edges},
           (f"{u}\t{v}" for u, v in g.edges.tolist()))
    coo = g.features.tocoo()
    order = np.lexsort((coo.col, coo.row))
    _write(p / "features.tsv", {"nodes": g.num_nodes, "features": g.num_features, "nnz": g.feature_nnz},
           (f"{r}\t{c}" for r, c in zip(coo.row[order].tolist(), coo.col[order].tolist())))
    if g.labels is not None:
        _write(p / "labels.tsv", {"nodes": g.num_nodes, "classes": g.num_classes},
               (f"{i}\t{y}" for i, y in enumerate(g.labels.tolist()) if y >= 0))


def write_json(path, obj) -> None:
    Path(path).write_text(serialize.dumps(obj) + "\n", encoding="utf-8")


def save_transformed(t: TransformedGraph, path) -> None:
    p = Path(path)
    save_dataset(t.base, p)
    n = t.num_graph_nodes
    _write(p / "feature_edges.tsv",
           {"graph_nodes": n, "feature_nodes": t.num_feature_nodes, "edges": len(t.feature_edges)},
           (f"{v}\t{k}" for v, k in t.feature_edges.tolist()))
    coo = t.x_star.tocoo()
    order = np.lexsort((coo.col, coo.row))
    _write(p / "x_star.tsv", {"rows": t.x_star.shape[0], "cols": t.x_star.shape[1], "nnz": len(order)},
           (f"{r}\t{c}\t{fmt_float(v)}" for r, c, v in
            zip(coo.row[order].tolist(), coo.col[order].tolist(), coo.data[order].tolist())))
    _write(p / "column_map.tsv", {"feature_nodes": t.num_feature_nodes},
           (f"{k}\t{c}" for k, c in enumerate(t.column_map.tolist())))
    write_json(p / "options.json", asdict(t.options))
    write_json(p / "size_report.json", size_report(t.base, t).as_dict())


def load_transformed(path) -> TransformedGraph:
    p = Path(path)
    g = load_dataset(DatasetBundle.from_dir(p), expected={})
    fh, fe = _read_table(p / "feature_edges.tsv", 2, 2, (int, int))
    f = int(fh["feature_nodes"])
    xh, xs = _read_table(p / "x_star.tsv", 3, 3, (int, int, float))
    rows, cols = int(xh["rows"]), int(xh["cols"])
    if xs:
        arr = np.array(xs)
        x_star = sp.csr_matrix((arr[:, 2], (arr[:, 0].astype(int), arr[:, 1].astype(int))), shape=(rows, cols))
    else:
        x_star = sp.csr_matrix((rows, cols))
    x_star.sort_indices()
    _, cm = _read_table(p / "column_map.tsv", 2, 2, (int, int))
    opts = TransformOptions(**serialize.loads((p / "options.json").read_text()))
    feature_edges = np.array(fe, dtype=np.int64).reshape(-1, 2)
    column_map = np.array([c for _, c in sorted(cm)], dtype=np.int64)
    return TransformedGraph(base=g, num_feature_nodes=f, feature_edges=feature_edges, x_star=x_star,
                            column_map=column_map, options=opts)


def homophily_svg(rows: list[tuple[str, float, float]], title: str = "homophily before / after") -> str:
    """Grouped bar chart: one group per metric, bars for before and after."""
    width, height, pad, bar = 120 + 160 * len(rows), 260, 40, 50
    vals = [v for _, b, a in rows for v in (b, a) if not math.isnan(v)]
    top = max([1e-12] + [abs(v) for v in vals])
    base_y = height - pad
    scale = (height - 2 * pad - 20) / top
    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}">',
           f'<text x="{pad}" y="20" font-family="sans-serif" font-size="14">{title}</text>',
           f'<line x1="{pad}" y1="{base_y}" x2="{width - pad}" y2="{base_y}" stroke="black"/>']
    for i, (name, before, after) in enumerate(rows):
        x0 = pad + 20 + i * 160
        for j, (val, color, tag) in enumerate(((before, "#9ca3af", "before"), (after, "#2563eb", "after"))):
            v = 0.0 if math.isnan(val) else val
            h = abs(v) * scale
            y = base_y - h if v >= 0 else base_y
            x = x0 + j * (bar + 5)
            out.append(f'<rect x="{x}" y="{y:.3f}" width="{bar}" height="{h:.3f}" fill="{color}"><title>{tag} {fmt_float(val)}</title></rect>')
            out.append(f'<text x="{x}" y="{base_y + 14}" font-family="sans-serif" font-size="10">{tag}</text>')
        out.append(f'<text x="{x0}" y="{base_y + 28}" font-family="sans-serif" font-size="12">{name}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


# -- synthetic graphs ---------------------------------------------------------

@dataclass(frozen=True)
class SynthParams:
    """Planted-partition graph with class-indicative feature blocks.

    Class ``c`` owns feature columns ``[c*features_per_class, (c+1)*features_per_class)``.
    A node keeps each own-block feature with probability ``1 - feature_noise_prob``
    and switches on every other column with probability ``background_prob``.
    """

    num_nodes: int = 200
    num_classes: int = 4
    num_features: int = 40
    p_in: float = 0.0
    p_out: float = 0.05
    features_per_class: int = 10
    feature_noise_prob: float = 0.0
    background_prob: float = 0.0
    seed: int = 0
    max_retries: int = 50

    def __post_init__(self):
        for name in ("p_in", "p_out", "feature_noise_prob", "background_prob"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1]")
        if self.num_classes * self.features_per_class > self.num_features:
            raise ValueError("class feature blocks exceed the feature count")
        if self.num_nodes < 2 or self.num_classes < 1:
            raise ValueError("need at least two nodes and one class")

    @property
    def heterophilic(self) -> bool:
        return self.p_out > self.p_in


class RetryBudgetExhausted(RuntimeError):
    pass


def _synth_once(p: SynthParams, rng: np.random.Generator) -> Graph:
    n, c = p.num_nodes, p.num_classes
    labels = rng.permutation(np.arange(n) % c)
    chunks = []
    for u in range(n - 1):
        others = np.arange(u + 1, n)
        prob = np.where(labels[others] == labels[u], p.p_in, p.p_out)
        hit = others[rng.random(n - u - 1) < prob]
        if len(hit):
            chunks.append(np.stack([np.full(len(hit), u), hit], axis=1))
    edges = np.concatenate(chunks) if chunks else np.empty((0, 2), dtype=np.int64)

    fpc = p.features_per_class
    col_class = np.full(p.num_features, -1)
    col_class[: c * fpc] = np.repeat(np.arange(c), fpc)
    own = col_class[None, :] == labels[:, None]
    r = rng.random((n, p.num_features))
    x = np.where(own, r >= p.feature_noise_prob, r < p.background_prob)
    return build_graph(edges, sp.csr_matrix(x.astype(np.float64)), labels,
                       num_nodes=n, num_classes=c, num_features=p.num_features)


def synth_heterophilic(p: SynthParams) -> Graph:
    """Seeded planted-partition graph; regenerated until the heterophily assumptions hold.

    In the heterophilic regime (``p_out > p_in``) an accepted graph also has
    AND-similarity homophily below 0.5.
    """
    for attempt in range(p.max_retries):
        g = _synth_once(p, np.random.default_rng([p.seed, attempt]))
        if g.num_edges == 0:
            continue
        if not p.heterophilic:
            return g
        if check_assumptions(g).heterophilic and graph_homophily(g.edges, g.features, SimilarityKind.BINARY_AND_INF) < 0.5:
            return g
    raise RetryBudgetExhausted(f"no acceptable graph after {p.max_retries} attempts")


# frozen after a pilot run; used by the accuracy comparison and the CLI default
STANDARD_FIXTURE = SynthParams(
    num_nodes=200, num_classes=4, num_features=60, p_in=0.005, p_out=0.05,
    features_per_class=10, feature_noise_prob=0.7, background_prob=0.05, seed=0,
)

# small graph for finite-difference gradient checks
GRADCHECK_FIXTURE = SynthParams(
    num_nodes=20, num_classes=3, num_features=9, p_in=0.0, p_out=0.3,
    features_per_class=3, feature_noise_prob=0.3, background_prob=0.1, seed=0,
)


def standard_fixture() -> Graph:
    return synth_heterophilic(STANDARD_FIXTURE)
