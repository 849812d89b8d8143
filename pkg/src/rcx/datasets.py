"""Synthetic motif benchmark generators.

Node-classification sets plant labeled motifs (houses, cycles, grids) on a
random base graph (Barabasi-Albert or balanced binary tree) and add a small
fraction of random noise edges. Graph-classification sets attach one motif
(or a motif pair) per graph to a small BA base. Motif edges form the
ground-truth explanation mask; attachment and noise edges do not.

Every stage draws from its own named substream of the root seed, so outputs
are byte-reproducible and insensitive to draw-count changes elsewhere.
"""

from __future__ import annotations

from dataclasses import dataclass

import networkx as nx
import numpy as np

from .errors import ConfigurationError, ValidationError
from .graphs import TASK_GRAPH, TASK_NODE, Dataset, Graph, Split
from .rng import substream

DATASET_NAMES = (
    "ba-shapes",
    "ba-community",
    "tree-cycles",
    "tree-grid",
    "ba-2motifs",
    "tri-motifs",
)

FEATURE_DIM = 10


@dataclass
class GenConfig:
    """Generator knobs; None picks the dataset's published default.

    base_nodes is the BA base size, except for tree-based sets where it is
    the balanced-tree height. noise_rate applies to node-level sets only.
    """

    dataset: str
    seed: int
    base_nodes: int | None = None
    motif_count: int | None = None
    graph_count: int | None = None
    noise_rate: float = 0.01


# ---------------------------------------------------------------------------
# motif shapes: (edge list on local ids, role id per local node)

HOUSE_EDGES = [(0, 1), (1, 2), (2, 3), (3, 0), (4, 0), (4, 1)]
HOUSE_ROLES = [1, 1, 2, 2, 3]  # roof-adjacent pair, bottom pair, roof


def cycle_motif(length: int):
    edges = [(i, (i + 1) % length) for i in range(length)]
    return [(min(a, b), max(a, b)) for a, b in edges], [1] * length


def grid_motif(side: int = 3):
    edges = []
    for r in range(side):
        for c in range(side):
            v = r * side + c
            if c + 1 < side:
                edges.append((v, v + 1))
            if r + 1 < side:
                edges.append((v, v + side))
    return edges, [1] * (side * side)


MOTIFS = {
    "house": (HOUSE_EDGES, HOUSE_ROLES),
    "cycle5": cycle_motif(5),
    "cycle6": cycle_motif(6),
    "grid": grid_motif(3),
}


# ---------------------------------------------------------------------------
# assembly helpers


class _Builder:
    """Incrementally assembles an undirected graph with gt and role marks."""

    def __init__(self, n: int):
        self.adj = np.zeros((n, n))
        self.gt = np.zeros((n, n))
        self.roles = np.zeros(n, dtype=np.int64)
        self.motif_ids = np.full(n, -1, dtype=np.int64)

    def add_edge(self, i: int, j: int, gt: bool = False) -> None:
        if i == j or self.adj[i, j]:
            raise ValidationError(f"cannot add edge ({i}, {j})")
        self.adj[i, j] = self.adj[j, i] = 1.0
        if gt:
            self.gt[i, j] = self.gt[j, i] = 1.0

    def add_base(self, nxg: nx.Graph, offset: int = 0) -> None:
        for a, b in nxg.edges():
            self.add_edge(offset + int(a), offset + int(b))

    def add_motif(self, name: str, start: int, role_offset: int, motif_id: int,
                  attach_to: int, rng: np.random.Generator) -> None:
        edges, roles = MOTIFS[name]
        for a, b in edges:
            self.add_edge(start + a, start + b, gt=True)
        for k, r in enumerate(roles):
            self.roles[start + k] = r + role_offset
            self.motif_ids[start + k] = motif_id
        anchor = start + int(rng.integers(len(roles)))
        self.add_edge(attach_to, anchor)

    def add_noise(self, count: int, rng: np.random.Generator) -> None:
        n = len(self.adj)
        attempts = 0
        added = 0
        while added < count:
            attempts += 1
            if attempts > 200 * max(count, 1):
                raise ValidationError("could not place noise edges")
            i, j = int(rng.integers(n)), int(rng.integers(n))
            if i == j or self.adj[i, j]:
                continue
            self.add_edge(i, j)
            added += 1


def _split(num_samples: int, seed: int) -> Split:
    order = substream(seed, "split").permutation(num_samples)
    n_tr = int(num_samples * 0.8)
    n_val = int(num_samples * 0.1)
    return Split(
        train=np.sort(order[:n_tr]),
        val=np.sort(order[n_tr : n_tr + n_val]),
        test=np.sort(order[n_tr + n_val :]),
    )


def _ba(n: int, m: int, rng: np.random.Generator) -> nx.Graph:
    return nx.barabasi_albert_graph(n, m, seed=int(rng.integers(2**31 - 1)))


def _const_features(n: int) -> np.ndarray:
    return np.ones((n, FEATURE_DIM))


# ---------------------------------------------------------------------------
# node-classification sets


def _planted_node_graph(
    seed: int,
    base_graph: nx.Graph,
    motif: str,
    motif_count: int,
    role_offset: int,
    noise_rate: float,
):
    """Base graph + motifs, each attached by one random edge, plus noise."""
    motif_size = len(MOTIFS[motif][1])
    n_base = base_graph.number_of_nodes()
    n = n_base + motif_count * motif_size
    b = _Builder(n)
    b.add_base(base_graph)
    attach_rng = substream(seed, "attach")
    for k in range(motif_count):
        start = n_base + k * motif_size
        target = int(attach_rng.integers(n_base))
        b.add_motif(motif, start, role_offset, k, target, attach_rng)
    b.add_noise(round(noise_rate * n), substream(seed, "noise"))
    return b


def _ba_shapes(cfg: GenConfig) -> Dataset:
    base_nodes = cfg.base_nodes or 300
    motif_count = cfg.motif_count or 80
    base = _ba(base_nodes, 5, substream(cfg.seed, "base"))
    b = _planted_node_graph(cfg.seed, base, "house", motif_count, 0, cfg.noise_rate)
    g = Graph(
        features=_const_features(len(b.adj)),
        adjacency=b.adj,
        node_labels=b.roles,
        gt_edge_mask=b.gt,
    )
    return Dataset(
        graphs=[g],
        task=TASK_NODE,
        num_classes=4,
        split=_split(g.n, cfg.seed),
        generator={
            "name": "ba-shapes",
            "base_nodes": base_nodes,
            "motif_count": motif_count,
            "noise_rate": cfg.noise_rate,
            "feature_dim": FEATURE_DIM,
        },
        seed=cfg.seed,
    )


def _ba_community(cfg: GenConfig) -> Dataset:
    base_nodes = cfg.base_nodes or 300
    motif_count = cfg.motif_count or 80
    size = base_nodes + motif_count * 5
    n = 2 * size
    rng_base = substream(cfg.seed, "base")
    parts = []
    for _ in range(2):
        base = _ba(base_nodes, 5, rng_base)
        parts.append(base)
    b = _Builder(n)
    attach_rng = substream(cfg.seed, "attach")
    for comm in range(2):
        offset = comm * size
        b.add_base(parts[comm], offset=offset)
        for k in range(motif_count):
            start = offset + base_nodes + k * 5
            target = offset + int(attach_rng.integers(base_nodes))
            b.add_motif("house", start, 0, comm * motif_count + k, target, attach_rng)
        # base role 0 within the community, then shift community 1 by 4
        lo, hi = offset, offset + size
        b.roles[lo:hi] += comm * 4
    inter_rng = substream(cfg.seed, "inter")
    placed = 0
    while placed < round(0.01 * n):
        i = int(inter_rng.integers(size))
        j = size + int(inter_rng.integers(size))
        if b.adj[i, j]:
            continue
        b.add_edge(i, j)
        placed += 1
    b.add_noise(round(cfg.noise_rate * n), substream(cfg.seed, "noise"))
    feats = substream(cfg.seed, "features").normal(size=(n, FEATURE_DIM))
    half = FEATURE_DIM // 2
    feats[:size, :half] += 1.0  # community 0 mean block
    feats[size:, half:] += 1.0  # community 1 mean block
    g = Graph(
        features=feats, adjacency=b.adj, node_labels=b.roles, gt_edge_mask=b.gt
    )
    return Dataset(
        graphs=[g],
        task=TASK_NODE,
        num_classes=8,
        split=_split(g.n, cfg.seed),
        generator={
            "name": "ba-community",
            "base_nodes": base_nodes,
            "motif_count": motif_count,
            "noise_rate": cfg.noise_rate,
            "inter_edge_rate": 0.01,
            "feature_dim": FEATURE_DIM,
        },
        seed=cfg.seed,
    )


def _tree_planted(cfg: GenConfig, name: str, motif: str, default_count: int) -> Dataset:
    motif_count = cfg.motif_count or default_count
    height = 8 if cfg.base_nodes is None else cfg.base_nodes
    tree = nx.balanced_tree(2, height)
    b = _planted_node_graph(cfg.seed, tree, motif, motif_count, 0, cfg.noise_rate)
    g = Graph(
        features=_const_features(len(b.adj)),
        adjacency=b.adj,
        node_labels=b.roles,
        gt_edge_mask=b.gt,
    )
    return Dataset(
        graphs=[g],
        task=TASK_NODE,
        num_classes=2,
        split=_split(g.n, cfg.seed),
        generator={
            "name": name,
            "tree_height": height,
            "motif_count": motif_count,
            "noise_rate": cfg.noise_rate,
            "feature_dim": FEATURE_DIM,
        },
        seed=cfg.seed,
    )


# ---------------------------------------------------------------------------
# graph-classification sets


def _one_motif_graph(seed: int, idx: int, motifs: list[str], base_n: int = 20) -> tuple:
    rng = substream(seed, "graph", idx)
    sizes = [len(MOTIFS[m][1]) for m in motifs]
    n = base_n + sum(sizes)
    b = _Builder(n)
    b.add_base(_ba(base_n, 1, rng))
    start = base_n
    for mid, (m, sz) in enumerate(zip(motifs, sizes)):
        target = int(rng.integers(base_n))
        b.add_motif(m, start, 0, mid, target, rng)
        start += sz
    return b


def _ba_2motifs(cfg: GenConfig) -> Dataset:
    count = cfg.graph_count or 700
    if count % 2:
        raise ConfigurationError("ba-2motifs graph count must be even")
    base_n = cfg.base_nodes or 20
    graphs = []
    for idx in range(count):
        label = 0 if idx < count // 2 else 1
        motif = "house" if label == 0 else "cycle5"
        b = _one_motif_graph(cfg.seed, idx, [motif], base_n)
        roles = np.where(b.motif_ids >= 0, 1, 0)
        graphs.append(
            Graph(
                features=_const_features(len(b.adj)),
                adjacency=b.adj,
                graph_label=label,
                node_labels=roles,
                gt_edge_mask=b.gt,
            )
        )
    return Dataset(
        graphs=graphs,
        task=TASK_GRAPH,
        num_classes=2,
        split=_split(count, cfg.seed),
        generator={
            "name": "ba-2motifs",
            "graph_count": count,
            "base_nodes": base_n,
            "feature_dim": FEATURE_DIM,
        },
        seed=cfg.seed,
    )


TRI_MOTIF_PAIRS = [("house", "cycle6"), ("cycle6", "grid"), ("grid", "house")]
TRI_MOTIF_ROLE = {"house": 1, "cycle6": 2, "grid": 3}


def _tri_motifs(cfg: GenConfig) -> Dataset:
    """Three classes, each a *pair* of planted motifs; every single motif is
    shared by two classes, so only the pair identifies the class."""
    count = cfg.graph_count or 300
    if count % 3:
        raise ConfigurationError("tri-motifs graph count must divide by 3")
    base_n = cfg.base_nodes or 20
    graphs = []
    per = count // 3
    for idx in range(count):
        label = idx // per
        motifs = list(TRI_MOTIF_PAIRS[label])
        rng = substream(cfg.seed, "graph", idx)
        sizes = [len(MOTIFS[m][1]) for m in motifs]
        b = _Builder(base_n + sum(sizes))
        b.add_base(_ba(base_n, 1, rng))
        start = base_n
        roles = np.zeros(base_n + sum(sizes), dtype=np.int64)
        for mid, (m, sz) in enumerate(zip(motifs, sizes)):
            target = int(rng.integers(base_n))
            b.add_motif(m, start, 0, mid, target, rng)
            roles[start : start + sz] = TRI_MOTIF_ROLE[m]
            start += sz
        graphs.append(
            Graph(
                features=_const_features(len(b.adj)),
                adjacency=b.adj,
                graph_label=label,
                node_labels=roles,
                gt_edge_mask=b.gt,
            )
        )
    return Dataset(
        graphs=graphs,
        task=TASK_GRAPH,
        num_classes=3,
        split=_split(count, cfg.seed),
        generator={
            "name": "tri-motifs",
            "graph_count": count,
            "base_nodes": base_n,
            "feature_dim": FEATURE_DIM,
        },
        seed=cfg.seed,
    )


# ---------------------------------------------------------------------------


def generate(cfg: GenConfig) -> Dataset:
    """Build the named dataset from its root seed."""
    if cfg.dataset == "ba-shapes":
        return _ba_shapes(cfg)
    if cfg.dataset == "ba-community":
        return _ba_community(cfg)
    if cfg.dataset == "tree-cycles":
        return _tree_planted(cfg, "tree-cycles", "cycle6", 60)
    if cfg.dataset == "tree-grid":
        return _tree_planted(cfg, "tree-grid", "grid", 57)
    if cfg.dataset == "ba-2motifs":
        return _ba_2motifs(cfg)
    if cfg.dataset == "tri-motifs":
        return _tri_motifs(cfg)
    raise ConfigurationError(
        f"unknown dataset {cfg.dataset!r}; choose from {', '.join(DATASET_NAMES)}"
    )
