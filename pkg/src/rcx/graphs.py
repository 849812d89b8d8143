"""Graph containers, adjacency normalization, and dataset serialization.

All numeric state is float64. Graphs are undirected: adjacency and weight
matrices are symmetric with a zero diagonal, and an undirected edge {i, j}
is represented by both (i, j) and (j, i) entries.
"""

from __future__ import annotations

import json
import hashlib
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ValidationError


# ---------------------------------------------------------------------------
# containers


def _as_float_matrix(a, name: str) -> np.ndarray:
    arr = np.asarray(a, dtype=np.float64)
    if arr.ndim != 2:
        raise ValidationError(f"{name} must be 2-D, got shape {arr.shape}")
    return arr


def _check_symmetric_binary(adj: np.ndarray, name: str) -> None:
    if adj.shape[0] != adj.shape[1]:
        raise ValidationError(f"{name} must be square, got {adj.shape}")
    if not np.array_equal(adj, adj.T):
        raise ValidationError(f"{name} must be symmetric")
    if np.any(np.diag(adj) != 0):
        raise ValidationError(f"{name} must have a zero diagonal")
    if not np.all((adj == 0) | (adj == 1)):
        raise ValidationError(f"{name} entries must be 0 or 1")


@dataclass
class Graph:
    """An undirected attributed graph with optional labels and ground truth.

    features:     (n, d_in) node feature matrix
    adjacency:    (n, n) symmetric 0/1 matrix, zero diagonal
    graph_label:  class id for graph-level tasks, else None
    node_labels:  (n,) int array for node-level tasks, else None
    gt_edge_mask: (n, n) symmetric 0/1 matrix marking ground-truth
                  explanation edges; must be a subset of adjacency
    """

    features: np.ndarray
    adjacency: np.ndarray
    graph_label: int | None = None
    node_labels: np.ndarray | None = None
    gt_edge_mask: np.ndarray | None = None

    def __post_init__(self):
        self.features = _as_float_matrix(self.features, "features")
        self.adjacency = _as_float_matrix(self.adjacency, "adjacency")
        _check_symmetric_binary(self.adjacency, "adjacency")
        if self.features.shape[0] != self.adjacency.shape[0]:
            raise ValidationError(
                f"features rows ({self.features.shape[0]}) != node count "
                f"({self.adjacency.shape[0]})"
            )
        if self.node_labels is not None:
            self.node_labels = np.asarray(self.node_labels, dtype=np.int64)
            if self.node_labels.shape != (self.n,):
                raise ValidationError("node_labels must have one entry per node")
        if self.gt_edge_mask is not None:
            self.gt_edge_mask = _as_float_matrix(self.gt_edge_mask, "gt_edge_mask")
            _check_symmetric_binary(self.gt_edge_mask, "gt_edge_mask")
            if self.gt_edge_mask.shape != self.adjacency.shape:
                raise ValidationError("gt_edge_mask shape must match adjacency")
            if np.any(self.gt_edge_mask > self.adjacency):
                raise ValidationError("gt_edge_mask must be a subset of adjacency")

    @property
    def n(self) -> int:
        return self.adjacency.shape[0]

    @property
    def num_edges(self) -> int:
        """Undirected edge count."""
        return int(self.adjacency.sum()) // 2

    def edge_list(self) -> np.ndarray:
        """(E, 2) array of undirected edges (i, j) with i < j, row-sorted."""
        i, j = np.nonzero(np.triu(self.adjacency, k=1))
        return np.stack([i, j], axis=1)


@dataclass
class WeightedGraph:
    """A graph plus per-edge weights in [0, 1] on its adjacency support."""

    graph: Graph
    edge_weights: np.ndarray

    def __post_init__(self):
        self.edge_weights = _as_float_matrix(self.edge_weights, "edge_weights")
        adj = self.graph.adjacency
        if self.edge_weights.shape != adj.shape:
            raise ValidationError("edge_weights shape must match adjacency")
        if not np.array_equal(self.edge_weights, self.edge_weights.T):
            raise ValidationError("edge_weights must be symmetric")
        if np.any(self.edge_weights[adj == 0] != 0):
            raise ValidationError("edge_weights must be zero off the edge support")
        if np.any(self.edge_weights < 0) or np.any(self.edge_weights > 1):
            raise ValidationError("edge_weights must lie in [0, 1]")

    @property
    def n(self) -> int:
        return self.graph.n


def unit_weights(g: Graph) -> WeightedGraph:
    """The weighted view of a plain graph: weight 1 on every edge."""
    return WeightedGraph(graph=g, edge_weights=g.adjacency.copy())


@dataclass
class Split:
    """Disjoint train/val/test sample-index lists covering all samples."""

    train: np.ndarray
    val: np.ndarray
    test: np.ndarray

    def __post_init__(self):
        self.train = np.asarray(self.train, dtype=np.int64)
        self.val = np.asarray(self.val, dtype=np.int64)
        self.test = np.asarray(self.test, dtype=np.int64)

    def validate(self, num_samples: int) -> None:
        parts = [self.train, self.val, self.test]
        merged = np.concatenate(parts)
        if len(np.unique(merged)) != len(merged):
            raise ValidationError("split parts must be disjoint")
        if not np.array_equal(np.sort(merged), np.arange(num_samples)):
            raise ValidationError(
                f"split must cover all {num_samples} samples exactly once"
            )


TASK_GRAPH = "graph-classification"
TASK_NODE = "node-classification"


@dataclass
class Dataset:
    """A list of graphs plus task metadata and a sample split.

    Samples are graphs for graph-level tasks and nodes of the single graph
    for node-level tasks.
    """

    graphs: list[Graph]
    task: str
    num_classes: int
    split: Split
    generator: dict = field(default_factory=dict)
    seed: int = 0

    def __post_init__(self):
        if self.task not in (TASK_GRAPH, TASK_NODE):
            raise ValidationError(f"unknown task {self.task!r}")
        if self.task == TASK_NODE and len(self.graphs) != 1:
            raise ValidationError("node-classification datasets hold one graph")
        if self.num_classes < 2:
            raise ValidationError("need at least two classes")
        self.split.validate(self.num_samples)
        for g in self.graphs:
            if self.task == TASK_GRAPH and g.graph_label is None:
                raise ValidationError("graph task requires graph labels")
            if self.task == TASK_NODE and g.node_labels is None:
                raise ValidationError("node task requires node labels")

    @property
    def num_samples(self) -> int:
        if self.task == TASK_GRAPH:
            return len(self.graphs)
        return self.graphs[0].n

    @property
    def d_in(self) -> int:
        return self.graphs[0].features.shape[1]

    def sample_label(self, sid: int) -> int:
        if self.task == TASK_GRAPH:
            return int(self.graphs[sid].graph_label)
        return int(self.graphs[0].node_labels[sid])


# ---------------------------------------------------------------------------
# normalization and its gradient


def normalize_adjacency(weights: np.ndarray, add_self_loops: bool = True) -> np.ndarray:
    """Symmetrically normalized adjacency D^-1/2 (W + I) D^-1/2.

    Degrees are row sums of the self-looped weight matrix; zero-degree rows
    normalize to zero rather than dividing by zero.
    """
    w = _as_float_matrix(weights, "weights")
    if w.shape[0] != w.shape[1]:
        raise ValidationError(f"weights must be square, got {w.shape}")
    if not np.array_equal(w, w.T):
        raise ValidationError("weights must be symmetric")
    if np.any(w < 0):
        raise ValidationError("weights must be non-negative")
    s = w + np.eye(w.shape[0]) if add_self_loops else w
    deg = s.sum(axis=1)
    dinv = np.where(deg > 0, deg, 1.0) ** -0.5
    dinv[deg <= 0] = 0.0
    return dinv[:, None] * s * dinv[None, :]


def normalize_adjacency_vjp(
    weights: np.ndarray, grad_out: np.ndarray, add_self_loops: bool = True
) -> np.ndarray:
    """Pull a gradient w.r.t. the normalized matrix back to raw entry space.

    Returns dL/dS where S is the (self-looped) weight matrix treated
    entrywise, so callers owning an undirected parameterization must fold
    (i, j) and (j, i) together; `edge_weight_grad` does that.

    With A = D^-1/2 S D^-1/2, d_i = deg_i^-1/2:
      dL/dS_ij = d_i G_ij d_j
                 - 1/2 deg_i^-3/2 sum_l G_il S_il d_l      (row degree term)
                 - 1/2 deg_j^-3/2 sum_k G_kj S_kj d_k      (col degree term)
    """
    w = _as_float_matrix(weights, "weights")
    g = _as_float_matrix(grad_out, "grad_out")
    if g.shape != w.shape:
        raise ValidationError("grad_out shape must match weights")
    s = w + np.eye(w.shape[0]) if add_self_loops else w
    deg = s.sum(axis=1)
    pos = deg > 0
    dinv = np.where(pos, deg, 1.0) ** -0.5
    dinv[~pos] = 0.0
    dinv3 = np.where(pos, deg, 1.0) ** -1.5
    dinv3[~pos] = 0.0
    gs = g * s
    row = -0.5 * dinv3 * (gs @ dinv)
    col = -0.5 * dinv3 * (gs.T @ dinv)
    return dinv[:, None] * g * dinv[None, :] + row[:, None] + col[None, :]


def edge_weight_grad(wg: WeightedGraph, grad_out: np.ndarray) -> np.ndarray:
    """Gradient w.r.t. the undirected edge weights of a weighted graph.

    Each undirected weight appears at (i, j) and (j, i), so the entry
    gradients are folded: result[i, j] = dS[i, j] + dS[j, i], restricted to
    the edge support with a zero diagonal (the unit self-loop is fixed, not
    a parameter). The result is symmetric by construction.
    """
    ds = normalize_adjacency_vjp(wg.edge_weights, grad_out, add_self_loops=True)
    folded = ds + ds.T
    folded[wg.graph.adjacency == 0] = 0.0
    np.fill_diagonal(folded, 0.0)
    return folded


# ---------------------------------------------------------------------------
# structural ops


def remove_edges(g: Graph, edges) -> Graph:
    """Remainder graph after deleting the given undirected edges.

    Each (i, j) must be an existing edge; both directions are zeroed.
    Features and labels are unchanged; ground-truth marks on removed edges
    are dropped to keep the subset invariant.
    """
    adj = g.adjacency.copy()
    gt = g.gt_edge_mask.copy() if g.gt_edge_mask is not None else None
    for i, j in edges:
        i, j = int(i), int(j)
        if i == j or not (0 <= i < g.n and 0 <= j < g.n) or adj[i, j] == 0:
            raise ValidationError(f"({i}, {j}) is not an edge of the graph")
        adj[i, j] = adj[j, i] = 0.0
        if gt is not None:
            gt[i, j] = gt[j, i] = 0.0
    return Graph(
        features=g.features,
        adjacency=adj,
        graph_label=g.graph_label,
        node_labels=g.node_labels,
        gt_edge_mask=gt,
    )


def khop_subgraph(g: Graph, node: int, k: int) -> tuple[Graph, np.ndarray]:
    """Induced subgraph on nodes within k hops of `node`.

    Returns (subgraph, mapping) where mapping[new_id] = old_id; node ids are
    relabeled in ascending original order, so the center sits at
    int(np.searchsorted(mapping, node)).
    """
    if not 0 <= node < g.n:
        raise ValidationError(f"node {node} out of range")
    if k < 0:
        raise ValidationError("k must be non-negative")
    reached = np.zeros(g.n, dtype=bool)
    reached[node] = True
    frontier = np.array([node])
    for _ in range(k):
        if frontier.size == 0:
            break
        nbrs = np.nonzero(g.adjacency[frontier].any(axis=0))[0]
        new = nbrs[~reached[nbrs]]
        reached[new] = True
        frontier = new
    mapping = np.nonzero(reached)[0]
    sub = Graph(
        features=g.features[mapping],
        adjacency=g.adjacency[np.ix_(mapping, mapping)],
        graph_label=g.graph_label,
        node_labels=g.node_labels[mapping] if g.node_labels is not None else None,
        gt_edge_mask=(
            g.gt_edge_mask[np.ix_(mapping, mapping)]
            if g.gt_edge_mask is not None
            else None
        ),
    )
    return sub, mapping


# ---------------------------------------------------------------------------
# serialization

_META_NAME = "meta.json"
_GRAPHS_NAME = "graphs.jsonl"


def _graph_record(g: Graph) -> dict:
    edges = g.edge_list()
    rec = {
        "n": g.n,
        "features": [float(x) for x in g.features.ravel()],
        "edges": [[int(i), int(j)] for i, j in edges],
        "graph_label": None if g.graph_label is None else int(g.graph_label),
        "node_labels": (
            None if g.node_labels is None else [int(x) for x in g.node_labels]
        ),
        "gt_edges": None,
    }
    if g.gt_edge_mask is not None:
        gi, gj = np.nonzero(np.triu(g.gt_edge_mask, k=1))
        rec["gt_edges"] = [[int(i), int(j)] for i, j in zip(gi, gj)]
    return rec


def _graph_from_record(rec: dict) -> Graph:
    n = int(rec["n"])
    feats = np.asarray(rec["features"], dtype=np.float64)
    if feats.size % n != 0:
        raise ValidationError("feature array length is not a multiple of n")
    feats = feats.reshape(n, -1)
    adj = np.zeros((n, n))
    for i, j in rec["edges"]:
        if not (0 <= i < j < n):
            raise ValidationError(f"bad edge ({i}, {j}) in record")
        adj[i, j] = adj[j, i] = 1.0
    gt = None
    if rec.get("gt_edges") is not None:
        gt = np.zeros((n, n))
        for i, j in rec["gt_edges"]:
            gt[i, j] = gt[j, i] = 1.0
    return Graph(
        features=feats,
        adjacency=adj,
        graph_label=rec.get("graph_label"),
        node_labels=rec.get("node_labels"),
        gt_edge_mask=gt,
    )


def save_dataset(ds: Dataset, out_dir: str | Path) -> None:
    """Write meta.json and graphs.jsonl (one record per line, fixed key order)."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    meta = {
        "task": ds.task,
        "num_classes": ds.num_classes,
        "d_in": ds.d_in,
        "split": {
            "train": [int(x) for x in ds.split.train],
            "val": [int(x) for x in ds.split.val],
            "test": [int(x) for x in ds.split.test],
        },
        "generator": ds.generator,
        "seed": ds.seed,
    }
    (out / _META_NAME).write_text(json.dumps(meta, indent=2) + "\n")
    with open(out / _GRAPHS_NAME, "w") as fh:
        for g in ds.graphs:
            fh.write(json.dumps(_graph_record(g), separators=(",", ":")) + "\n")


def load_dataset(path: str | Path) -> Dataset:
    """Load a dataset directory written by save_dataset, re-validating it."""
    root = Path(path)
    meta_path = root / _META_NAME
    graphs_path = root / _GRAPHS_NAME
    if not meta_path.is_file() or not graphs_path.is_file():
        raise ValidationError(f"{root} is not a dataset directory")
    meta = json.loads(meta_path.read_text())
    graphs = []
    with open(graphs_path) as fh:
        for line in fh:
            line = line.strip()
            if line:
                graphs.append(_graph_from_record(json.loads(line)))
    ds = Dataset(
        graphs=graphs,
        task=meta["task"],
        num_classes=int(meta["num_classes"]),
        split=Split(
            train=meta["split"]["train"],
            val=meta["split"]["val"],
            test=meta["split"]["test"],
        ),
        generator=meta.get("generator", {}),
        seed=int(meta.get("seed", 0)),
    )
    if ds.d_in != int(meta["d_in"]):
        raise ValidationError("meta d_in does not match stored features")
    return ds


def file_digest(path: str | Path) -> str:
    """Hex sha256 of a file, used to pin pipeline inputs in run manifests."""
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()
