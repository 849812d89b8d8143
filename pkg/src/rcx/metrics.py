"""Evaluation metrics and experiment protocols for edge explanations.

Fidelity (confidence drop when explanation edges are deleted) against
sparsity (fraction of edges kept out of the explanation), prediction-
preserving noise perturbation, rank-based ROC-AUC, robustness protocols
(edge AUC and node-overlap accuracy under noise), ground-truth motif
scoring, and inference timing. Everything is pure given (net, model,
dataset, seed); CSV writers serialize each protocol's rows.

Node-classification samples are evaluated inside the sample node's 3-hop
computation graph, which is exactly the receptive field of the three-layer
classifier; graph samples use the whole graph.
"""

from __future__ import annotations

import csv
import math
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.stats import rankdata

from .errors import ValidationError
from .explainer import EdgeMask, ExplainerNet, explain, predict_mask
from .gnn import GnnModel, forward, predict
from .graphs import (
    TASK_GRAPH,
    TASK_NODE,
    Dataset,
    Graph,
    khop_subgraph,
    remove_edges,
    unit_weights,
)
from .rng import substream


# ---------------------------------------------------------------------------
# fidelity and sparsity


def fidelity(
    model: GnnModel, g: Graph, edges, node: int | None = None
) -> float:
    """Drop in predicted-class confidence after deleting the given edges.

    P(c | G) - P(c | G without edges), where c is the class predicted on the
    intact graph. An empty selection scores exactly zero.
    """
    if len(edges) == 0:
        return 0.0
    before = forward(model, unit_weights(g), node=node)
    c = int(np.argmax(before.probs))
    after = forward(model, unit_weights(remove_edges(g, edges)), node=node)
    return float(before.probs[c] - after.probs[c])


def sparsity(edges, g: Graph) -> float:
    """Fraction of the graph's edges left out of the selection: 1 - |S|/|E|."""
    total = g.num_edges
    if total == 0:
        raise ValidationError("sparsity is undefined on an edgeless graph")
    if len(edges) > total:
        raise ValidationError(
            f"selection has {len(edges)} edges, graph only {total}"
        )
    return 1.0 - len(edges) / total


@dataclass
class CurvePoint:
    sparsity: float
    mean: float
    std: float
    n: int


@dataclass
class FidelityCurve:
    """Mean/std fidelity at each target sparsity over positive samples."""

    points: list[CurvePoint]


def _validate_grid(grid) -> list[float]:
    vals = [float(s) for s in grid]
    if not vals:
        raise ValidationError("sparsity grid is empty")
    for s in vals:
        if not 0.0 <= s <= 1.0:
            raise ValidationError(f"sparsity {s} outside [0, 1]")
    if any(b <= a for a, b in zip(vals, vals[1:])):
        raise ValidationError("sparsity grid must be strictly increasing")
    return vals


def _ceil_count(frac: float, total: int) -> int:
    # tolerate float fuzz like 0.3 * 20 = 6.000000000000001
    return min(total, max(0, int(math.ceil(frac * total - 1e-9))))


def _positive_ids(dataset: Dataset, split: str) -> list[int]:
    """Samples fidelity is reported over: motif nodes for node tasks, the
    positive class for binary graph tasks, everything otherwise."""
    ids = [int(s) for s in getattr(dataset.split, split)]
    if dataset.task == TASK_NODE:
        labels = dataset.graphs[0].node_labels
        return [s for s in ids if labels[s] != 0]
    if dataset.num_classes == 2:
        return [s for s in ids if dataset.sample_label(s) == 1]
    return ids


def explainer_ranker(net: ExplainerNet, model: GnnModel, k_hops: int = 3):
    """Ranker closure: full mask-descending edge ranking for one sample."""

    def rank(sid: int, g: Graph, node: int | None) -> np.ndarray:
        if node is None:
            count = g.num_edges
        else:
            sub, _ = khop_subgraph(g, node, k_hops)
            count = sub.num_edges
        if count == 0:
            return np.zeros((0, 2), dtype=np.int64)
        return explain(net, model, g, top_k=count, node=node, k_hops=k_hops)

    return rank


def random_ranker(seed: int, k_hops: int = 3):
    """Ranker closure: uniformly shuffled edges, one substream per sample."""

    def rank(sid: int, g: Graph, node: int | None) -> np.ndarray:
        if node is None:
            edges = g.edge_list()
        else:
            sub, mapping = khop_subgraph(g, node, k_hops)
            edges = mapping[sub.edge_list()] if sub.num_edges else sub.edge_list()
        if len(edges) == 0:
            return np.zeros((0, 2), dtype=np.int64)
        rng = substream(seed, "random-mask", sid)
        return edges[rng.permutation(len(edges))]

    return rank


def per_sample_fidelity(
    model: GnnModel,
    dataset: Dataset,
    ranker,
    target_sparsity: float,
    split: str = "test",
) -> np.ndarray:
    """Fidelity of the top-ceil((1-s)|E|) ranked edges, per positive sample."""
    s = float(target_sparsity)
    if not 0.0 <= s <= 1.0:
        raise ValidationError(f"sparsity {s} outside [0, 1]")
    pos = _positive_ids(dataset, split)
    if not pos:
        raise ValidationError("no positive-labelled samples to evaluate")
    out = []
    for sid in pos:
        if dataset.task == TASK_GRAPH:
            g, node = dataset.graphs[sid], None
        else:
            g, node = dataset.graphs[0], sid
        ranked = ranker(sid, g, node)
        count = len(ranked)
        if count == 0:
            continue
        take = _ceil_count(1.0 - s, count)
        out.append(fidelity(model, g, ranked[:take], node=node))
    return np.asarray(out)


def fidelity_sparsity_curve(
    model: GnnModel,
    net: ExplainerNet,
    dataset: Dataset,
    sparsity_grid,
    split: str = "test",
    k_hops: int = 3,
) -> FidelityCurve:
    """Fidelity of the mask's top edges at each target sparsity level."""
    grid = _validate_grid(sparsity_grid)
    ranker = explainer_ranker(net, model, k_hops)
    points = []
    for s in grid:
        vals = per_sample_fidelity(model, dataset, ranker, s, split)
        if len(vals) == 0:
            raise ValidationError("no samples with edges to evaluate")
        points.append(
            CurvePoint(
                sparsity=s, mean=float(vals.mean()), std=float(vals.std()), n=len(vals)
            )
        )
    return FidelityCurve(points=points)


# ---------------------------------------------------------------------------
# noise perturbation


@dataclass
class NoiseSpec:
    """Prediction-preserving noise: Gaussian feature noise on ceil(pct*n)
    nodes plus ceil(pct*|E|) edge toggles, resampled until the predicted
    class survives or max_retries candidates have been rejected."""

    pct: float
    feature_sigma: float | np.ndarray | None = None
    max_retries: int = 20
    seed: int = 0

    def validate(self) -> None:
        if not 0.0 <= self.pct <= 0.3:
            raise ValidationError(f"noise pct must lie in [0, 0.3], got {self.pct}")
        if self.max_retries < 0:
            raise ValidationError("max_retries must be non-negative")
        if self.feature_sigma is None:
            raise ValidationError(
                "feature_sigma is unresolved; compute it with feature_sigma_for"
            )


def feature_sigma_for(dataset: Dataset) -> np.ndarray:
    """Per-dimension noise scale: 0.1 x feature std over all nodes."""
    feats = np.concatenate([g.features for g in dataset.graphs], axis=0)
    return 0.1 * feats.std(axis=0)


def perturb(
    g: Graph,
    spec: NoiseSpec,
    model: GnnModel,
    rng: np.random.Generator | None = None,
    node: int | None = None,
) -> Graph | None:
    """One prediction-preserving perturbation of g, or None if every
    candidate within the retry budget changed the predicted class.

    Each candidate toggles distinct edge slots chosen uniformly over all
    node pairs (an existing edge is deleted, a missing one added; the
    diagonal is excluded), so add-vs-delete odds follow slot availability.
    Ground-truth marks on deleted edges are dropped.
    """
    spec.validate()
    if rng is None:
        rng = substream(spec.seed, "perturb")
    c = predict(model, g, node=node)
    if spec.pct == 0.0:
        return g
    n, d = g.features.shape
    num_rows = min(n, math.ceil(spec.pct * n))
    num_toggles = math.ceil(spec.pct * g.num_edges)
    iu, ju = np.triu_indices(n, k=1)
    sigma = np.asarray(spec.feature_sigma, dtype=float)
    for _ in range(spec.max_retries):
        feats = g.features.copy()
        rows = rng.choice(n, size=num_rows, replace=False)
        feats[rows] = feats[rows] + rng.normal(size=(num_rows, d)) * sigma
        adj = g.adjacency.copy()
        if num_toggles and len(iu):
            slots = rng.choice(len(iu), size=min(num_toggles, len(iu)), replace=False)
            flipped = 1.0 - adj[iu[slots], ju[slots]]
            adj[iu[slots], ju[slots]] = flipped
            adj[ju[slots], iu[slots]] = flipped
        gt = g.gt_edge_mask * adj if g.gt_edge_mask is not None else None
        cand = Graph(
            features=feats,
            adjacency=adj,
            graph_label=g.graph_label,
            node_labels=g.node_labels,
            gt_edge_mask=gt,
        )
        if predict(model, cand, node=node) == c:
            return cand
    return None


# ---------------------------------------------------------------------------
# rank-based AUC


def roc_auc(scores, labels) -> float:
    """Area under the ROC curve by rank statistic; ties contribute 0.5."""
    s = np.asarray(scores, dtype=float)
    y = np.asarray(labels)
    if s.ndim != 1 or s.shape != y.shape:
        raise ValidationError("scores and labels must be equal-length vectors")
    if not np.all((y == 0) | (y == 1)):
        raise ValidationError("labels must be binary")
    num_pos = int((y == 1).sum())
    num_neg = int((y == 0).sum())
    if num_pos == 0 or num_neg == 0:
        raise ValidationError("roc_auc needs both classes present")
    ranks = rankdata(s)
    return float(
        (ranks[y == 1].sum() - num_pos * (num_pos + 1) / 2.0) / (num_pos * num_neg)
    )


# ---------------------------------------------------------------------------
# robustness protocols


def _eval_samples(
    dataset: Dataset, split: str, k_hops: int = 3
) -> list[tuple[int, Graph, int | None]]:
    """(sample id, graph to evaluate on, center node) per evaluation sample.

    Node tasks turn each motif node into a standalone computation-graph
    sample; graph tasks use every split member as-is.
    """
    ids = [int(s) for s in getattr(dataset.split, split)]
    if dataset.task == TASK_GRAPH:
        return [(s, dataset.graphs[s], None) for s in ids]
    g = dataset.graphs[0]
    labels = g.node_labels
    out = []
    for s in ids:
        if labels[s] == 0:
            continue
        sub, mapping = khop_subgraph(g, s, k_hops)
        out.append((s, sub, int(np.searchsorted(mapping, s))))
    return out


def robustness_auc(
    net: ExplainerNet,
    model: GnnModel,
    dataset: Dataset,
    noise_pcts,
    k: int,
    num_seeds: int = 10,
    base_seed: int = 0,
    max_retries: int = 20,
    split: str = "test",
    k_hops: int = 3,
) -> list[dict]:
    """Explanation stability under noise, one row per noise level.

    Per sample: the top-k mask edges on the clean graph are the positives;
    every edge of the perturbed graph is scored by the mask recomputed
    there; the AUC of that labelling is averaged over samples, then the
    mean/std over num_seeds perturbation draws is reported. Samples whose
    perturbation fails or whose labels are single-class are skipped and
    counted.
    """
    samples = _eval_samples(dataset, split, k_hops)
    sigma = feature_sigma_for(dataset)
    rows = []
    for pct in noise_pcts:
        spec = NoiseSpec(pct=float(pct), feature_sigma=sigma, max_retries=max_retries)
        spec.validate()
        pct_key = int(round(1000 * float(pct)))
        per_seed = []
        skipped = 0
        for run in range(num_seeds):
            aucs = []
            for idx, (sid, g, center) in enumerate(samples):
                top = explain(
                    net,
                    model,
                    g,
                    top_k=min(k, g.num_edges),
                    node=center,
                    k_hops=k_hops,
                )
                top_set = {(int(i), int(j)) for i, j in top}
                noisy = perturb(
                    g,
                    spec,
                    model,
                    rng=substream(base_seed, "robust-perturb", pct_key, run, idx),
                    node=center,
                )
                if noisy is None:
                    skipped += 1
                    continue
                edges = noisy.edge_list()
                if len(edges) == 0:
                    skipped += 1
                    continue
                labels = np.array(
                    [1 if (int(i), int(j)) in top_set else 0 for i, j in edges]
                )
                if labels.min() == labels.max():
                    skipped += 1
                    continue
                mask = predict_mask(net, model, noisy)
                scores = mask.M[edges[:, 0], edges[:, 1]]
                aucs.append(roc_auc(scores, labels))
            per_seed.append(float(np.mean(aucs)) if aucs else float("nan"))
        rows.append(
            {
                "noise_pct": float(pct),
                "k": int(k),
                "mean_auc": float(np.mean(per_seed)),
                "std": float(np.std(per_seed)),
                "skipped": skipped,
                "n": len(samples) * num_seeds - skipped,
            }
        )
    return rows


def node_weights(mask: EdgeMask) -> np.ndarray:
    """Per-node importance: the maximum mask weight over incident edges."""
    return np.asarray(mask.M, dtype=float).max(axis=1)


def topk_nodes(weights, k: int) -> np.ndarray:
    """Ids of the k largest weights; ties go to the lowest node id."""
    w = np.asarray(weights, dtype=float)
    order = np.lexsort((np.arange(len(w)), -w))
    return order[: max(0, min(k, len(w)))]


def node_accuracy(
    net: ExplainerNet,
    model: GnnModel,
    dataset: Dataset,
    noise_pcts,
    k: int,
    num_seeds: int = 10,
    base_seed: int = 0,
    max_retries: int = 20,
    split: str = "test",
    k_hops: int = 3,
) -> list[dict]:
    """Top-k node overlap between clean and perturbed explanations.

    Node importances are row maxima of the mask; the score per sample is
    |topk(clean) intersect topk(noisy)| / k, averaged like robustness_auc.
    """
    samples = _eval_samples(dataset, split, k_hops)
    sigma = feature_sigma_for(dataset)
    rows = []
    for pct in noise_pcts:
        spec = NoiseSpec(pct=float(pct), feature_sigma=sigma, max_retries=max_retries)
        spec.validate()
        pct_key = int(round(1000 * float(pct)))
        per_seed = []
        skipped = 0
        for run in range(num_seeds):
            accs = []
            for idx, (sid, g, center) in enumerate(samples):
                clean = topk_nodes(node_weights(predict_mask(net, model, g)), k)
                noisy = perturb(
                    g,
                    spec,
                    model,
                    rng=substream(base_seed, "robust-perturb", pct_key, run, idx),
                    node=center,
                )
                if noisy is None:
                    skipped += 1
                    continue
                shifted = topk_nodes(
                    node_weights(predict_mask(net, model, noisy)), k
                )
                overlap = len(set(int(v) for v in clean) & set(int(v) for v in shifted))
                accs.append(overlap / k)
            per_seed.append(float(np.mean(accs)) if accs else float("nan"))
        rows.append(
            {
                "noise_pct": float(pct),
                "k": int(k),
                "mean_acc": float(np.mean(per_seed)),
                "std": float(np.std(per_seed)),
                "skipped": skipped,
                "n": len(samples) * num_seeds - skipped,
            }
        )
    return rows


# ---------------------------------------------------------------------------
# ground-truth evaluation


def gt_eval_from_scores(samples: list[tuple[np.ndarray, np.ndarray]]):
    """(AUC, accuracy) from per-sample (edge scores, binary gt labels).

    AUC pools every edge across samples; accuracy is the per-sample
    fraction of the top-|gt| scored edges that are ground truth (ties keep
    edge-list order), averaged over samples that have ground-truth edges.
    """
    if not samples:
        raise ValidationError("no samples to evaluate")
    all_scores = np.concatenate([s for s, _ in samples])
    all_labels = np.concatenate([y for _, y in samples])
    auc = roc_auc(all_scores, all_labels)
    accs = []
    for scores, labels in samples:
        k_gt = int(np.sum(labels))
        if k_gt == 0:
            continue
        order = np.argsort(-np.asarray(scores, dtype=float), kind="stable")
        accs.append(float(np.asarray(labels)[order[:k_gt]].mean()))
    if not accs:
        raise ValidationError("no samples with ground-truth edges")
    return float(auc), float(np.mean(accs))


def ground_truth_auc_acc(
    net: ExplainerNet,
    model: GnnModel,
    dataset: Dataset,
    split: str = "test",
    k_hops: int = 3,
):
    """Mask quality against motif ground truth: (pooled edge AUC, mean
    top-|gt| precision). Node tasks score within each computation graph."""
    samples = _eval_samples(dataset, split, k_hops)
    pairs = []
    for sid, g, center in samples:
        if g.gt_edge_mask is None:
            raise ValidationError("dataset has no ground-truth edge masks")
        edges = g.edge_list()
        if len(edges) == 0:
            continue
        mask = predict_mask(net, model, g)
        scores = mask.M[edges[:, 0], edges[:, 1]]
        labels = g.gt_edge_mask[edges[:, 0], edges[:, 1]].astype(np.int64)
        pairs.append((scores, labels))
    return gt_eval_from_scores(pairs)


# ---------------------------------------------------------------------------
# timing


def time_inference(
    net: ExplainerNet,
    model: GnnModel,
    dataset: Dataset,
    split: str = "test",
    top_k: int | None = None,
    k_hops: int = 3,
) -> dict:
    """Wall-clock seconds per explanation over the split's samples."""
    samples = _eval_samples(dataset, split, k_hops)
    times = []
    for sid, g, center in samples:
        t0 = time.perf_counter()
        explain(net, model, g, top_k=top_k, node=center, k_hops=k_hops)
        times.append(time.perf_counter() - t0)
    return {
        "mean_s": float(np.mean(times)),
        "std_s": float(np.std(times)),
        "n": len(times),
    }


# ---------------------------------------------------------------------------
# CSV output


def write_fidelity_csv(curve: FidelityCurve, path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["sparsity", "mean", "std", "n"])
        for p in curve.points:
            w.writerow([p.sparsity, p.mean, p.std, p.n])


def write_robustness_csv(rows: list[dict], path: str | Path) -> None:
    cols = ["noise_pct", "k", "mean_auc", "std", "skipped", "n"]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(cols)
        for row in rows:
            w.writerow([row[c] for c in cols])


def write_node_accuracy_csv(rows: list[dict], path: str | Path) -> None:
    cols = ["noise_pct", "k", "mean_acc", "std", "skipped", "n"]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(cols)
        for row in rows:
            w.writerow([row[c] for c in cols])


def write_gt_csv(auc: float, acc: float, n: int, path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["auc", "accuracy", "n"])
        w.writerow([auc, acc, n])


def write_timing_csv(result: dict, path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["mean_s", "std_s", "n"])
        w.writerow([result["mean_s"], result["std_s"], result["n"]])
