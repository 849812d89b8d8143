"""Edge-mask explanations trained against the classifier's decision regions.

A small MLP scores every undirected edge from the frozen network's node
embeddings, giving a soft mask M. The mask splits the input into two weighted
proxy graphs: one keeping each edge with weight M_ij (the explanation) and
one keeping the complement 1 - M_ij (the remainder). Training pushes the
explanation proxy to stay on the original side of every boundary of the
sample's decision region while pushing the remainder proxy across at least
one boundary, so the kept edges are those that hold the prediction inside
its region and removing them is a counterfactual.

Two ablation modes ship alongside: a confidence-only objective that ignores
regions entirely, and a contrastive objective that trains against the single
boundary separating one chosen class pair.

The classifier is frozen throughout; only the mask MLP's parameters receive
gradients, which are assembled by hand (sigmoid/entropy terms are combined
at the logit level so saturated masks keep finite gradients).
"""

from __future__ import annotations

import json
import logging
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np
from scipy.special import entr, expit

from .boundaries import DecisionRegion, LinearBoundary, RegionSet
from .errors import ConfigurationError, TrainingError, ValidationError
from .gnn import (
    Adam,
    GnnModel,
    backward,
    backward_from_alpha,
    forward,
    node_embeddings,
)
from .graphs import (
    TASK_GRAPH,
    TASK_NODE,
    Dataset,
    Graph,
    WeightedGraph,
    khop_subgraph,
    remove_edges,
    unit_weights,
)
from .rng import substream

logger = logging.getLogger(__name__)

MLP_HIDDEN = 64  # fixed mask-network width

MODE_RCEXPLAINER = "rcexplainer"
MODE_NOLDB = "rcexp-noldb"
MODE_CONTRASTIVE = "contrastive"
MODES = (MODE_RCEXPLAINER, MODE_NOLDB, MODE_CONTRASTIVE)

_P_LO = 1e-12
_P_HI = 1.0 - 1e-12


# ---------------------------------------------------------------------------
# mask network


@dataclass
class ExplainerNet:
    """Per-edge scoring MLP: concat(z_i, z_j) -> ReLU(64) -> sigmoid scalar."""

    fc1_w: np.ndarray  # (2h, 64)
    fc1_b: np.ndarray  # (64,)
    fc2_w: np.ndarray  # (64, 1)
    fc2_b: np.ndarray  # (1,)

    def params(self) -> list[np.ndarray]:
        return [self.fc1_w, self.fc1_b, self.fc2_w, self.fc2_b]

    def validate(self) -> None:
        d = self.fc1_w.shape[0]
        want = [(d, MLP_HIDDEN), (MLP_HIDDEN,), (MLP_HIDDEN, 1), (1,)]
        got = [p.shape for p in self.params()]
        if d % 2 != 0 or got != want:
            raise ValidationError(f"inconsistent explainer shapes {got}")
        for p in self.params():
            if not np.all(np.isfinite(p)):
                raise ValidationError("explainer parameters must be finite")


def init_explainer(hidden: int, seed: int) -> ExplainerNet:
    """Glorot-uniform weights, zero biases, for embeddings of width `hidden`."""
    rng = substream(seed, "explainer-init")

    def glorot(fan_in, fan_out):
        limit = np.sqrt(6.0 / (fan_in + fan_out))
        return rng.uniform(-limit, limit, size=(fan_in, fan_out))

    net = ExplainerNet(
        fc1_w=glorot(2 * hidden, MLP_HIDDEN),
        fc1_b=np.zeros(MLP_HIDDEN),
        fc2_w=glorot(MLP_HIDDEN, 1),
        fc2_b=np.zeros(1),
    )
    net.validate()
    return net


@dataclass
class EdgeMask:
    """Soft edge scores: (n, n) symmetric, in [0, 1], zero off the support."""

    M: np.ndarray


def _edge_scores(net: ExplainerNet, x: np.ndarray):
    """MLP forward on stacked edge inputs; returns (pre-ReLU, hidden, logit)."""
    pre1 = x @ net.fc1_w + net.fc1_b
    h1 = np.maximum(pre1, 0.0)
    ell = (h1 @ net.fc2_w).ravel() + net.fc2_b[0]
    return pre1, h1, ell


def _edge_inputs(z: np.ndarray, edges: np.ndarray, hidden: int) -> np.ndarray:
    if len(edges) == 0:
        return np.zeros((0, 2 * hidden))
    return np.concatenate([z[edges[:, 0]], z[edges[:, 1]]], axis=1)


def predict_mask(net: ExplainerNet, model: GnnModel, g: Graph) -> EdgeMask:
    """Score every undirected edge of g from the frozen model's embeddings.

    Each edge (i, j) with i < j is scored once on concat(z_i, z_j), where z
    is the final-layer embedding of the unweighted forward pass; the score is
    written to both (i, j) and (j, i). Non-edges stay zero.
    """
    net.validate()
    if net.fc1_w.shape[0] != 2 * model.hidden:
        raise ValidationError(
            f"explainer expects embeddings of width {net.fc1_w.shape[0] // 2}, "
            f"model produces {model.hidden}"
        )
    z = node_embeddings(model, unit_weights(g))
    edges = g.edge_list()
    m_mat = np.zeros((g.n, g.n))
    if len(edges):
        _, _, ell = _edge_scores(net, _edge_inputs(z, edges, model.hidden))
        vals = expit(ell)
        m_mat[edges[:, 0], edges[:, 1]] = vals
        m_mat[edges[:, 1], edges[:, 0]] = vals
    return EdgeMask(M=m_mat)


def build_proxies(g: Graph, mask: EdgeMask) -> tuple[WeightedGraph, WeightedGraph]:
    """Split g into the explanation proxy (weights M) and its complement.

    The two weight matrices sum to the adjacency elementwise: every edge's
    unit weight is shared between the proxies.
    """
    kept = WeightedGraph(graph=g, edge_weights=np.asarray(mask.M, dtype=float))
    removed = WeightedGraph(graph=g, edge_weights=(1.0 - mask.M) * g.adjacency)
    return kept, removed


# ---------------------------------------------------------------------------
# losses


def _unit_normals(boundaries: list[LinearBoundary]):
    """Stacked (w, b) rescaled to unit normals, so w @ x + b is the signed
    Euclidean distance from the hyperplane."""
    w = np.stack([np.asarray(ldb.w, dtype=float) for ldb in boundaries])
    b = np.array([float(ldb.b) for ldb in boundaries])
    norms = np.linalg.norm(w, axis=1)
    if np.any(norms == 0.0):
        raise ValidationError("zero-norm boundary normal")
    return w / norms[:, None], b / norms


def _anchored_normals(boundaries: list[LinearBoundary], alpha_g: np.ndarray):
    """Stacked (w, b) rescaled so each boundary value is the signed distance
    in units of the original sample's own distance to that boundary.

    A boundary is scale-free as a hyperplane (any positive multiple of
    (w, b) describes the same one), but the sigmoid losses below are not:
    raw extracted normals carry the magnitude of a logit-gap gradient, so
    their products saturate the sigmoids, while bare Euclidean distances on
    these embeddings are so small the sigmoids go flat. Dividing each
    boundary's distance by the anchor sample's own distance makes the
    anchor's value exactly +-1 and a proxy's value its relative
    displacement, which keeps every product in the responsive range of the
    sigmoid regardless of how the hyperplanes were parameterized.
    """
    w, b = _unit_normals(boundaries)
    anchor = w @ np.asarray(alpha_g, dtype=float) + b
    scale = 1.0 / np.maximum(np.abs(anchor), 1e-12)
    return w * scale[:, None], b * scale


def _boundary_values(
    region: DecisionRegion, alpha_g: np.ndarray, alpha: np.ndarray
) -> np.ndarray:
    if not region.boundaries:
        raise ValidationError("region has no boundaries to score against")
    w, b = _anchored_normals(region.boundaries, alpha_g)
    return w @ np.asarray(alpha, dtype=float) + b


def loss_same(
    region: DecisionRegion, alpha_g: np.ndarray, alpha_kept: np.ndarray
) -> float:
    """Mean sigmoid(-B_i(a_G) * B_i(a_kept)) over the region's boundaries.

    Small when the explanation proxy lands on the original side of every
    boundary (products positive), large when it crosses.
    """
    a = _boundary_values(region, alpha_g, alpha_g)
    t = _boundary_values(region, alpha_g, alpha_kept)
    return float(expit(-a * t).mean())


def loss_opp(
    region: DecisionRegion, alpha_g: np.ndarray, alpha_removed: np.ndarray
) -> float:
    """Min sigmoid(B_i(a_G) * B_i(a_removed)) over the region's boundaries.

    Small once the remainder proxy has crossed at least one boundary; the
    minimum (ties to the lowest boundary index) carries the subgradient.
    """
    a = _boundary_values(region, alpha_g, alpha_g)
    r = _boundary_values(region, alpha_g, alpha_removed)
    p = a * r
    return float(expit(p[int(np.argmin(p))]))


def contrastive_losses(
    boundary: LinearBoundary,
    alpha_g: np.ndarray,
    alpha_kept: np.ndarray,
    alpha_removed: np.ndarray,
) -> tuple[float, float]:
    """Same/opposite-side losses against one chosen boundary only."""
    w, b = _anchored_normals([boundary], alpha_g)
    bg = float(w[0] @ np.asarray(alpha_g, dtype=float) + b[0])
    bk = float(w[0] @ np.asarray(alpha_kept, dtype=float) + b[0])
    br = float(w[0] @ np.asarray(alpha_removed, dtype=float) + b[0])
    return float(expit(-bg * bk)), float(expit(bg * br))


def find_contrastive_boundary(
    region_set: RegionSet, c_i: int, c_j: int
) -> LinearBoundary:
    """First stored boundary whose source separated classes c_i and c_j."""
    for pair in ((c_i, c_j), (c_j, c_i)):
        for region in region_set.regions:
            for ldb in region.boundaries:
                if (ldb.cls_pos, ldb.cls_neg) == pair:
                    return ldb
    raise ConfigurationError(
        f"no stored boundary separates classes {c_i} and {c_j}"
    )


def regularizers(mask: EdgeMask) -> tuple[float, float]:
    """(L1 mass, mean binary entropy) of the full mask matrix.

    Both (i, j) and (j, i) entries count, so the L1 term is twice the
    per-undirected-edge mass; the entropy is averaged over all n^2 entries
    with 0*log(0) = 0, so off-support zeros contribute nothing.
    """
    m = np.asarray(mask.M, dtype=float)
    if not np.all(np.isfinite(m)) or np.any(m < 0.0) or np.any(m > 1.0):
        raise ValidationError("mask entries must lie in [0, 1]")
    r_sparse = float(np.abs(m).sum())
    n = m.shape[0]
    r_disc = float((entr(m) + entr(1.0 - m)).sum() / (n * n))
    return r_sparse, r_disc


# ---------------------------------------------------------------------------
# configuration


@dataclass
class ExplainerConfig:
    """Loss weights, optimizer settings, and objective mode.

    lam balances the same-side and opposite-side terms; beta and mu weight
    the sparsity and discreteness regularizers; the whole objective is
    multiplied by loss_scale. eta weights the remainder term of the
    confidence-only mode; contrast_pair picks the class pair for the
    contrastive mode.
    """

    lam: float = 0.85
    beta: float = 0.006
    mu: float = 0.66
    loss_scale: float = 15.0
    lr: float = 1e-3
    epochs: int = 600
    mode: str = MODE_RCEXPLAINER
    eta: float = 1.0
    contrast_pair: tuple[int, int] | None = None
    seed: int = 0
    k_hops: int = 3
    batch_size: int = 32
    log_every: int = 50

    def validate(self) -> None:
        if not 0.0 <= self.lam <= 1.0:
            raise ValidationError(f"lam must lie in [0, 1], got {self.lam}")
        if self.beta < 0.0:
            raise ValidationError(f"beta must be >= 0, got {self.beta}")
        if self.mu < 0.0:
            raise ValidationError(f"mu must be >= 0, got {self.mu}")
        if self.loss_scale <= 0.0:
            raise ValidationError("loss_scale must be positive")
        if self.lr <= 0.0 or self.epochs < 0:
            raise ValidationError("lr must be positive and epochs non-negative")
        if self.mode not in MODES:
            raise ConfigurationError(f"unknown explainer mode {self.mode!r}")
        if self.k_hops < 1 or self.batch_size < 1:
            raise ValidationError("k_hops and batch_size must be >= 1")


def default_config(task: str) -> ExplainerConfig:
    """Published loss weights per task family."""
    if task == TASK_NODE:
        return ExplainerConfig(lam=0.85, beta=0.006, mu=0.66)
    if task == TASK_GRAPH:
        return ExplainerConfig(lam=0.1, beta=6e-5, mu=0.66)
    raise ValidationError(f"unknown task {task!r}")


# ---------------------------------------------------------------------------
# loss assembly

# Node-task samples are explained inside the center node's k-hop computation
# graph: three conv layers see exactly 3 hops, so everything (embeddings,
# mask, proxies, losses) is computed on that subgraph.


def _computation_graph(
    model: GnnModel, g: Graph, node: int | None, k_hops: int
):
    """(graph to operate on, center node or None, new->old id map or None)."""
    if model.task == TASK_NODE:
        if node is None:
            raise ValidationError("node-task explanations need a node id")
        sub, mapping = khop_subgraph(g, node, k_hops)
        return sub, int(np.searchsorted(mapping, node)), mapping
    if node is not None:
        raise ValidationError("graph-task explanations take no node id")
    return g, None, None


def total_loss(
    cfg: ExplainerConfig,
    region: DecisionRegion,
    g: Graph,
    net: ExplainerNet,
    model: GnnModel,
    node: int | None = None,
) -> float:
    """Region-mode objective assembled from the public pieces.

    loss_scale * [lam*L_same + (1-lam)*L_opp + beta*R_sparse + mu*R_discrete].
    """
    cfg.validate()
    if cfg.mode == MODE_NOLDB:
        raise ConfigurationError(
            "total_loss covers the region modes; use baseline_loss_conf"
        )
    graph_used, center, _ = _computation_graph(model, g, node, cfg.k_hops)
    mask = predict_mask(net, model, graph_used)
    kept, removed = build_proxies(graph_used, mask)
    alpha_g = forward(model, unit_weights(graph_used), node=center).alpha
    alpha_k = forward(model, kept, node=center).alpha
    alpha_r = forward(model, removed, node=center).alpha
    l_same = loss_same(region, alpha_g, alpha_k)
    l_opp = loss_opp(region, alpha_g, alpha_r)
    r_sparse, r_disc = regularizers(mask)
    return float(
        cfg.loss_scale
        * (
            cfg.lam * l_same
            + (1.0 - cfg.lam) * l_opp
            + cfg.beta * r_sparse
            + cfg.mu * r_disc
        )
    )


def baseline_loss_conf(
    cfg: ExplainerConfig,
    g: Graph,
    net: ExplainerNet,
    model: GnnModel,
    node: int | None = None,
) -> float:
    """Confidence-only objective: keep P(c | kept) high, P(c | removed) low.

    loss_scale * [-log P(c|kept) - eta / log P(c|removed) + regularizers],
    with probabilities clamped away from 0 and 1 so both logs stay usable.
    """
    cfg.validate()
    if cfg.mode != MODE_NOLDB:
        raise ConfigurationError("baseline_loss_conf requires mode rcexp-noldb")
    graph_used, center, _ = _computation_graph(model, g, node, cfg.k_hops)
    mask = predict_mask(net, model, graph_used)
    kept, removed = build_proxies(graph_used, mask)
    c = int(np.argmax(forward(model, unit_weights(graph_used), node=center).probs))
    p_k = float(np.clip(forward(model, kept, node=center).probs[c], _P_LO, _P_HI))
    p_r = float(np.clip(forward(model, removed, node=center).probs[c], _P_LO, _P_HI))
    r_sparse, r_disc = regularizers(mask)
    core = -np.log(p_k) - cfg.eta / np.log(p_r)
    return float(
        cfg.loss_scale * (core + cfg.beta * r_sparse + cfg.mu * r_disc)
    )


@dataclass
class _SampleCtx:
    """Frozen per-sample state reused across epochs (model never changes)."""

    sid: int
    graph: Graph
    center: int | None
    edges: np.ndarray  # (E, 2), i < j
    x: np.ndarray  # (E, 2h) mask-MLP inputs
    probs_g: np.ndarray
    c: int
    # region-mode constants: stacked boundary normals/offsets and the
    # boundary values at the original embedding
    w_mat: np.ndarray | None = None
    b_vec: np.ndarray | None = None
    a_vals: np.ndarray | None = None


def _make_ctx(
    model: GnnModel,
    g: Graph,
    node: int | None,
    k_hops: int,
    boundaries: list[LinearBoundary] | None,
    sid: int = -1,
) -> _SampleCtx:
    graph_used, center, _ = _computation_graph(model, g, node, k_hops)
    tr = forward(model, unit_weights(graph_used), node=center)
    z = node_embeddings(model, unit_weights(graph_used))
    edges = graph_used.edge_list()
    x = _edge_inputs(z, edges, model.hidden)
    w_mat = b_vec = a_vals = None
    if boundaries is not None:
        if not boundaries:
            raise ValidationError("region has no boundaries to score against")
        w_mat, b_vec = _anchored_normals(boundaries, tr.alpha)
        a_vals = w_mat @ tr.alpha + b_vec
    return _SampleCtx(
        sid=sid,
        graph=graph_used,
        center=center,
        edges=edges,
        x=x,
        probs_g=tr.probs,
        c=int(np.argmax(tr.probs)),
        w_mat=w_mat,
        b_vec=b_vec,
        a_vals=a_vals,
    )


def _loss_grads_ctx(
    cfg: ExplainerConfig, ctx: _SampleCtx, net: ExplainerNet, model: GnnModel
) -> tuple[float, list[np.ndarray]]:
    """One sample's loss and its gradient w.r.t. the mask-MLP parameters."""
    g = ctx.graph
    n = g.n
    edges = ctx.edges
    num_e = len(edges)
    scale = cfg.loss_scale

    pre1, h1, ell = _edge_scores(net, ctx.x)
    m = expit(ell)
    m_mat = np.zeros((n, n))
    if num_e:
        m_mat[edges[:, 0], edges[:, 1]] = m
        m_mat[edges[:, 1], edges[:, 0]] = m
    kept = WeightedGraph(graph=g, edge_weights=m_mat)
    removed = WeightedGraph(graph=g, edge_weights=(1.0 - m_mat) * g.adjacency)
    tr_k = forward(model, kept, node=ctx.center)
    tr_r = forward(model, removed, node=ctx.center)

    if cfg.mode == MODE_NOLDB:
        c = ctx.c
        num_c = len(ctx.probs_g)
        p_k_raw = float(tr_k.probs[c])
        p_r_raw = float(tr_r.probs[c])
        p_k = min(max(p_k_raw, _P_LO), _P_HI)
        p_r = min(max(p_r_raw, _P_LO), _P_HI)
        core = -np.log(p_k) - cfg.eta / np.log(p_r)
        dl_k = np.zeros(num_c)
        if _P_LO < p_k_raw < _P_HI:
            dl_k = tr_k.probs.copy()
            dl_k[c] -= 1.0
        dl_r = np.zeros(num_c)
        if cfg.eta != 0.0 and _P_LO < p_r_raw < _P_HI:
            dl_r = -tr_r.probs * (cfg.eta / np.log(p_r) ** 2)
            dl_r[c] += cfg.eta / np.log(p_r) ** 2
        bun_k = backward(model, kept, tr_k, scale * dl_k, need_param_grads=False)
        bun_r = backward(model, removed, tr_r, scale * dl_r, need_param_grads=False)
    else:
        a = ctx.a_vals
        t = ctx.w_mat @ tr_k.alpha + ctx.b_vec
        r = ctx.w_mat @ tr_r.alpha + ctx.b_vec
        s_same = expit(-a * t)
        l_same = float(s_same.mean())
        p = a * r
        k_star = int(np.argmin(p))
        s_opp = float(expit(p[k_star]))
        core = cfg.lam * l_same + (1.0 - cfg.lam) * s_opp
        dt = (cfg.lam / len(a)) * s_same * (1.0 - s_same) * (-a)
        dalpha_k = scale * (ctx.w_mat.T @ dt)
        dalpha_r = (
            scale
            * (1.0 - cfg.lam)
            * s_opp
            * (1.0 - s_opp)
            * a[k_star]
            * ctx.w_mat[k_star]
        )
        bun_k = backward_from_alpha(
            model, kept, tr_k, dalpha_k, need_param_grads=False
        )
        bun_r = backward_from_alpha(
            model, removed, tr_r, dalpha_r, need_param_grads=False
        )

    r_sparse = 2.0 * float(m.sum())
    r_disc = 2.0 * float((entr(m) + entr(1.0 - m)).sum()) / (n * n)
    loss = float(scale * (core + cfg.beta * r_sparse + cfg.mu * r_disc))

    # gradient w.r.t. each edge's mask value, then back through the sigmoid;
    # the entropy term is folded in at the logit level (its mask-space
    # derivative is exactly -logit(m), so dR_disc/dlogit = -(2/n^2) * ell *
    # sig'(ell), which stays finite when m saturates to 0 or 1)
    if num_e:
        dm = (
            bun_k.edge_weights[edges[:, 0], edges[:, 1]]
            - bun_r.edge_weights[edges[:, 0], edges[:, 1]]
        )
        dm = dm + scale * cfg.beta * 2.0
        dell = (dm - scale * cfg.mu * (2.0 / (n * n)) * ell) * m * (1.0 - m)
    else:
        dell = np.zeros(0)

    dfc2_w = (h1.T @ dell[:, None]) if num_e else np.zeros_like(net.fc2_w)
    dfc2_b = np.array([dell.sum()])
    dh1 = dell[:, None] @ net.fc2_w.T if num_e else np.zeros((0, MLP_HIDDEN))
    dpre1 = dh1 * (pre1 > 0)
    dfc1_w = ctx.x.T @ dpre1
    dfc1_b = dpre1.sum(axis=0)
    return loss, [dfc1_w, dfc1_b, dfc2_w, dfc2_b]


def loss_and_grads(
    cfg: ExplainerConfig,
    g: Graph,
    net: ExplainerNet,
    model: GnnModel,
    region: DecisionRegion | None = None,
    boundary: LinearBoundary | None = None,
    node: int | None = None,
) -> tuple[float, list[np.ndarray]]:
    """Loss and mask-MLP gradients for one sample under the configured mode."""
    cfg.validate()
    net.validate()
    if cfg.mode == MODE_RCEXPLAINER:
        if region is None:
            raise ValidationError("rcexplainer mode needs the sample's region")
        boundaries = region.boundaries
    elif cfg.mode == MODE_CONTRASTIVE:
        if boundary is None:
            raise ValidationError("contrastive mode needs the chosen boundary")
        boundaries = [boundary]
    else:
        boundaries = None
    ctx = _make_ctx(model, g, node, cfg.k_hops, boundaries)
    return _loss_grads_ctx(cfg, ctx, net, model)


# ---------------------------------------------------------------------------
# training


def _train_pool(dataset: Dataset) -> tuple[list[int], list[int]]:
    """(train ids, val ids) the explainer works over.

    Node tasks explain motif nodes only (label != 0): base nodes have no
    explanation structure and evaluation never asks about them.
    """
    train = [int(s) for s in dataset.split.train]
    val = [int(s) for s in dataset.split.val]
    if dataset.task == TASK_NODE:
        labels = dataset.graphs[0].node_labels
        train = [s for s in train if labels[s] != 0]
        val = [s for s in val if labels[s] != 0]
    return train, val


def _val_confidence_drop(
    net: ExplainerNet,
    model: GnnModel,
    dataset: Dataset,
    val_ids: list[int],
    cfg: ExplainerConfig,
) -> float:
    """Mean drop in predicted-class confidence after deleting the
    threshold-selected edges, over the validation pool."""
    if not val_ids:
        return float("nan")
    drops = []
    for sid in val_ids:
        if dataset.task == TASK_GRAPH:
            g, node = dataset.graphs[sid], None
        else:
            g, node = dataset.graphs[0], sid
        selected = explain(net, model, g, threshold=0.5, node=node, k_hops=cfg.k_hops)
        tr = forward(model, unit_weights(g), node=node)
        c = int(np.argmax(tr.probs))
        if len(selected) == 0:
            drops.append(0.0)
            continue
        reduced = remove_edges(g, selected)
        tr2 = forward(model, unit_weights(reduced), node=node)
        drops.append(float(tr.probs[c] - tr2.probs[c]))
    return float(np.mean(drops))


def train_explainer(
    dataset: Dataset,
    regions: RegionSet | None,
    model: GnnModel,
    cfg: ExplainerConfig,
) -> tuple[ExplainerNet, dict]:
    """Train the mask MLP against the frozen model.

    Adam over the MLP parameters only, fixed-order minibatches (no shuffle,
    so runs are bitwise reproducible), per-sample objective set by cfg.mode.
    Returns (net, metrics) with a per-epoch loss history and periodic
    validation confidence-drop logs. Raises TrainingError if the loss goes
    non-finite.
    """
    cfg.validate()
    model.validate()
    if cfg.mode != MODE_NOLDB and regions is None:
        raise ValidationError(f"mode {cfg.mode} needs extracted regions")

    train_ids, val_ids = _train_pool(dataset)
    boundary = None
    contrast_class = None
    if cfg.mode == MODE_CONTRASTIVE:
        if cfg.contrast_pair is None:
            raise ConfigurationError("contrastive mode needs contrast_pair=(c_i, c_j)")
        c_i, c_j = cfg.contrast_pair
        boundary = find_contrastive_boundary(regions, c_i, c_j)
        contrast_class = c_i

    ctxs: list[_SampleCtx] = []
    skipped = 0
    for sid in train_ids:
        if dataset.task == TASK_GRAPH:
            g, node = dataset.graphs[sid], None
        else:
            g, node = dataset.graphs[0], sid
        if cfg.mode == MODE_RCEXPLAINER:
            ridx = regions.assignment.get(sid)
            if ridx is None:
                skipped += 1
                continue
            boundaries = regions.regions[ridx].boundaries
        elif cfg.mode == MODE_CONTRASTIVE:
            boundaries = [boundary]
        else:
            boundaries = None
        ctx = _make_ctx(model, g, node, cfg.k_hops, boundaries, sid=sid)
        if contrast_class is not None and ctx.c != contrast_class:
            continue
        ctxs.append(ctx)
    if skipped:
        logger.warning("%d training samples lack a region; skipped", skipped)
    if not ctxs:
        raise ConfigurationError("no training samples available for the explainer")

    net = init_explainer(model.hidden, cfg.seed)
    params = net.params()
    opt = Adam(params, lr=cfg.lr)
    history: list[float] = []
    val_log: list[dict] = []
    for epoch in range(cfg.epochs):
        total = 0.0
        for start in range(0, len(ctxs), cfg.batch_size):
            chunk = ctxs[start : start + cfg.batch_size]
            acc = [np.zeros_like(p) for p in params]
            batch_loss = 0.0
            for ctx in chunk:
                loss, grads = _loss_grads_ctx(cfg, ctx, net, model)
                batch_loss += loss
                for slot, grad in zip(acc, grads):
                    slot += grad
            if not np.isfinite(batch_loss):
                raise TrainingError(
                    f"explainer loss went non-finite (mode {cfg.mode}, "
                    f"batch starting at sample {chunk[0].sid})",
                    epoch=epoch,
                )
            opt.step([slot / len(chunk) for slot in acc])
            total += batch_loss
        history.append(total / len(ctxs))
        if cfg.log_every and (
            epoch % cfg.log_every == 0 or epoch == cfg.epochs - 1
        ):
            val_log.append(
                {
                    "epoch": epoch,
                    "confidence_drop": _val_confidence_drop(
                        net, model, dataset, val_ids, cfg
                    ),
                }
            )
    metrics = {
        "loss_history": history,
        "final_loss": history[-1] if history else float("nan"),
        "val_log": val_log,
        "num_samples": len(ctxs),
    }
    return net, metrics


# ---------------------------------------------------------------------------
# inference


def explain(
    net: ExplainerNet,
    model: GnnModel,
    g: Graph,
    top_k: int | None = None,
    threshold: float = 0.5,
    node: int | None = None,
    k_hops: int = 3,
) -> np.ndarray:
    """Select explanation edges: mask value > threshold, or the top_k edges.

    Returns an (k, 2) array of undirected edges (i < j, original node ids).
    Top-k ranks by descending mask value with ties broken by lexicographic
    edge id; asking for more edges than exist returns all of them with a
    warning. Node-task explanations are restricted to the center's k-hop
    computation graph. No region data is needed at inference time.
    """
    if top_k is not None and top_k < 0:
        raise ValidationError(f"top_k must be non-negative, got {top_k}")
    graph_used, _, mapping = _computation_graph(model, g, node, k_hops)
    mask = predict_mask(net, model, graph_used)
    edges = graph_used.edge_list()
    if len(edges) == 0:
        return np.zeros((0, 2), dtype=np.int64)
    vals = mask.M[edges[:, 0], edges[:, 1]]
    if top_k is None:
        out = edges[vals > threshold]
    else:
        if top_k > len(edges):
            logger.warning(
                "top_k=%d exceeds edge count %d; returning all edges",
                top_k,
                len(edges),
            )
            top_k = len(edges)
        order = np.lexsort((edges[:, 1], edges[:, 0], -vals))
        out = edges[order[:top_k]]
    if mapping is not None and len(out):
        out = mapping[out]  # ascending map keeps i < j
    return out.astype(np.int64)


# ---------------------------------------------------------------------------
# checkpoints

_FORMAT = "rcx-explainer-v1"


def save_explainer(
    net: ExplainerNet,
    cfg: ExplainerConfig,
    path: str | Path,
    regions_digest: str = "",
) -> None:
    """Write explainer.json: weights, config echo, seed, region-file digest."""
    net.validate()
    doc = {
        "format": _FORMAT,
        "hidden": net.fc1_w.shape[0] // 2,
        "fc1_w": [float(v) for v in net.fc1_w.ravel()],
        "fc1_b": [float(v) for v in net.fc1_b],
        "fc2_w": [float(v) for v in net.fc2_w.ravel()],
        "fc2_b": [float(v) for v in net.fc2_b],
        "config": asdict(cfg),
        "seed": cfg.seed,
        "regions_digest": regions_digest,
    }
    Path(path).write_text(json.dumps(doc, indent=1) + "\n")


def load_explainer(path: str | Path) -> tuple[ExplainerNet, dict, str]:
    """Read explainer.json; returns (net, config dict, regions digest)."""
    p = Path(path)
    if not p.is_file():
        raise ValidationError(f"no explainer checkpoint at {p}")
    doc = json.loads(p.read_text())
    if doc.get("format") != _FORMAT:
        raise ValidationError(f"unknown explainer format {doc.get('format')!r}")
    h = int(doc["hidden"])

    def restore(key, shape):
        arr = np.asarray(doc[key], dtype=np.float64)
        if arr.size != int(np.prod(shape)):
            raise ValidationError(f"{key} has {arr.size} values, wanted {shape}")
        return arr.reshape(shape)

    net = ExplainerNet(
        fc1_w=restore("fc1_w", (2 * h, MLP_HIDDEN)),
        fc1_b=restore("fc1_b", (MLP_HIDDEN,)),
        fc2_w=restore("fc2_w", (MLP_HIDDEN, 1)),
        fc2_b=restore("fc2_b", (1,)),
    )
    net.validate()
    return net, dict(doc["config"]), doc.get("regions_digest", "")
