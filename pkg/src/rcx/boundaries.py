"""Linear decision boundaries, polytope coverage, and decision regions.

The trained network's head is piecewise linear in the final-layer embedding,
so around any sample the top-1-vs-top-2 margin is a linear function whose
zero set is a local facet of the decision surface. Sampling such facets at
many samples, then greedily picking a small subset whose joint sign pattern
isolates one class, yields convex decision regions that summarize the
model's logic for that class. Regions drive the counterfactual losses used
to train the edge-mask explainer.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DegenerateBoundaryError, StallError, ValidationError
from .gnn import GnnModel, fc_grad_to_alpha, forward, node_embeddings, node_logits
from .graphs import TASK_GRAPH, Dataset, Graph, unit_weights
from .rng import substream

logger = logging.getLogger(__name__)

EPSILON = 1e-6
DEDUP_TOL = 1e-9


@dataclass
class LinearBoundary:
    """Half-space facet B(alpha) = w . alpha + b of the head's decision
    surface, sampled at one training sample (the source lies strictly on
    the positive side). cls_pos/cls_neg record which two classes the facet
    separated at the source (positive side / runner-up side)."""

    w: np.ndarray
    b: float
    source_id: int = -1
    cls_pos: int = -1
    cls_neg: int = -1

    def values(self, embeddings: np.ndarray) -> np.ndarray:
        """B(alpha) for one embedding or a stack of them."""
        return np.asarray(embeddings) @ self.w + self.b


@dataclass
class DecisionRegion:
    """Convex polytope over a boundary subset that isolates class `cls`."""

    cls: int
    boundaries: list[LinearBoundary]
    sign_pattern: np.ndarray  # (k,) entries in {-1, +1}
    covered_ids: np.ndarray  # ascending sample ids of class cls inside
    impurity: int  # h(P, c) at selection time
    delta: int  # impurity tolerance the selection ran against
    # greedy steps as (picked candidate index, g after, h after)
    trace: list[tuple[int, int, int]] = field(default_factory=list)

    def contains(self, embeddings: np.ndarray) -> np.ndarray:
        """Boolean mask: which embedding rows satisfy the sign pattern."""
        emb = np.atleast_2d(np.asarray(embeddings, dtype=float))
        inside = np.ones(len(emb), dtype=bool)
        for ldb, sign in zip(self.boundaries, self.sign_pattern):
            vals = ldb.values(emb)
            side = np.where(vals >= 0, 1, -1)
            inside &= side == sign
        return inside


@dataclass
class SamplePool:
    """Embeddings and predicted classes for the samples regions are built
    over; `ids` are dataset sample ids (graph indices or node ids)."""

    ids: np.ndarray
    embeddings: np.ndarray
    preds: np.ndarray

    def __post_init__(self):
        if not (len(self.ids) == len(self.embeddings) == len(self.preds)):
            raise ValidationError("pool arrays must have equal length")


@dataclass
class RegionSet:
    """All regions extracted for a model plus the sample-to-region index."""

    task: str
    num_classes: int
    regions: list[DecisionRegion]
    assignment: dict[int, int]
    warnings: list[str]
    seed: int
    ldbs_per_class: int


# ---------------------------------------------------------------------------
# boundary sampling


def boundary_from_embedding(
    model: GnnModel, alpha: np.ndarray, source_id: int = -1
) -> LinearBoundary:
    """Extract the top-1-vs-top-2 facet of the FC head at embedding alpha.

    w is the gradient of (max1 - max2)(logits) w.r.t. alpha through the head
    only; b is chosen so B(alpha) equals the logit gap, which is positive, so
    the source sample sits strictly on the positive side.
    """
    alpha = np.asarray(alpha, dtype=float)
    fc_pre = alpha @ model.fc_weights[0] + model.fc_biases[0]
    fc_out = np.maximum(fc_pre, 0.0)
    logits = fc_out @ model.fc_weights[1] + model.fc_biases[1]
    top = int(np.argmax(logits))
    rest = np.delete(np.arange(len(logits)), top)
    second = int(rest[np.argmax(logits[rest])])
    gap = float(logits[top] - logits[second])
    if gap == 0.0:
        raise DegenerateBoundaryError(
            f"tied top-2 logits at sample {source_id}; boundary undefined"
        )
    dlogits = np.zeros(len(logits))
    dlogits[top] = 1.0
    dlogits[second] = -1.0
    w = fc_grad_to_alpha(model, fc_pre, dlogits)
    if not np.all(np.isfinite(w)):
        raise DegenerateBoundaryError(f"non-finite boundary normal at {source_id}")
    if np.all(w == 0.0):
        raise DegenerateBoundaryError(f"zero boundary normal at {source_id}")
    b = gap - float(w @ alpha)
    return LinearBoundary(w=w, b=b, source_id=source_id, cls_pos=top, cls_neg=second)


def sample_ldb(
    model: GnnModel, g: Graph, source_id: int = -1, node: int | None = None
) -> LinearBoundary:
    """Sample a boundary at a graph (or at one node for node tasks)."""
    trace = forward(model, unit_weights(g), node=node)
    return boundary_from_embedding(model, trace.alpha, source_id=source_id)


# ---------------------------------------------------------------------------
# coverage

# Sign patterns are folded left to right into dense group codes. Codes are
# re-ranked after every fold, so they stay < 2n and, crucially, numeric code
# order equals lexicographic pattern order with -1 < +1 at every step. That
# makes "lexicographically smallest pattern" a plain argmin over codes.


def _fold_columns(signs: np.ndarray) -> np.ndarray:
    codes = np.zeros(len(signs), dtype=np.int64)
    for k in range(signs.shape[1]):
        bits = (signs[:, k] > 0).astype(np.int64)
        _, codes = np.unique(codes * 2 + bits, return_inverse=True)
    return codes


def _best_group(codes: np.ndarray, preds: np.ndarray, c: int):
    """(g, h, member mask) of the densest class-c group, ties to the
    lexicographically smallest pattern (= smallest code)."""
    n_groups = int(codes.max()) + 1 if len(codes) else 0
    c_counts = np.bincount(codes[preds == c], minlength=n_groups)
    totals = np.bincount(codes, minlength=n_groups)
    best = int(np.argmax(c_counts))  # argmax returns the smallest index tie
    g = int(c_counts[best])
    h = int(totals[best] - c_counts[best])
    return g, h, codes == best


def _sign_matrix(boundaries: list[LinearBoundary], embeddings: np.ndarray) -> np.ndarray:
    emb = np.asarray(embeddings, dtype=float)
    vals = np.stack([ldb.values(emb) for ldb in boundaries], axis=1)
    return np.where(vals >= 0, 1, -1).astype(np.int8)


def coverage(
    boundaries: list[LinearBoundary],
    embeddings: np.ndarray,
    preds: np.ndarray,
    c: int,
) -> tuple[int, int, np.ndarray]:
    """Best-polytope coverage of class c over the given boundary set.

    Returns (g, h, sign_pattern): the class-c count of the sign pattern
    holding the most class-c samples, the non-c count sharing it, and the
    pattern itself. Ties go to the lexicographically smallest pattern
    (-1 before +1); samples exactly on a boundary count as +1.
    """
    preds = np.asarray(preds)
    if len(boundaries) == 0:
        g = int((preds == c).sum())
        return g, int((preds != c).sum()), np.zeros(0, dtype=np.int8)
    signs = _sign_matrix(boundaries, embeddings)
    codes = _fold_columns(signs)
    g, h, mask = _best_group(codes, preds, c)
    pattern = signs[int(np.argmax(mask))].copy()
    return g, h, pattern


# ---------------------------------------------------------------------------
# greedy SCSC selection


def greedy_select(
    candidates: list[LinearBoundary],
    pool: SamplePool,
    c: int,
    eps: float = EPSILON,
) -> DecisionRegion:
    """Greedily pick boundaries until the best polytope's impurity reaches
    the tolerance delta = h(all candidates, c).

    Each step adds the candidate minimizing (g_drop + eps) / h_drop over
    candidates with positive impurity drop; if none has one, the candidate
    with the smallest coverage drop among zero-impurity-drop candidates is
    taken (adding it can unlock later impurity drops). Candidates that would
    increase impurity are never taken; if only those remain while impurity
    still exceeds delta, a stall is raised.
    """
    if not candidates:
        raise ValidationError("greedy selection needs at least one candidate")
    signs = _sign_matrix(candidates, pool.embeddings)
    n_cands = len(candidates)

    delta = _best_group(_fold_columns(signs), pool.preds, c)[1]
    cur_g, cur_h, _ = coverage([], pool.embeddings, pool.preds, c)
    selected: list[int] = []
    codes = np.zeros(len(pool.ids), dtype=np.int64)
    trace: list[tuple[int, int, int]] = []

    while cur_h > delta:
        best_ratio: tuple[float, int, int, int] | None = None
        best_zero: tuple[int, int, int, int] | None = None
        for j in range(n_cands):
            if j in selected:
                continue
            bits = (signs[:, j] > 0).astype(np.int64)
            _, codes_j = np.unique(codes * 2 + bits, return_inverse=True)
            g2, h2, _ = _best_group(codes_j, pool.preds, c)
            g_dec, h_dec = cur_g - g2, cur_h - h2
            if h_dec > 0:
                ratio = (g_dec + eps) / h_dec
                if best_ratio is None or ratio < best_ratio[0]:
                    best_ratio = (ratio, j, g2, h2)
            elif h_dec == 0:
                if best_zero is None or g_dec < best_zero[0]:
                    best_zero = (g_dec, j, g2, h2)
        if best_ratio is not None:
            _, j, g2, h2 = best_ratio
        elif best_zero is not None:
            _, j, g2, h2 = best_zero
        else:
            raise StallError(
                f"no candidate lowers impurity: class {c}, g={cur_g}, h={cur_h}, "
                f"delta={delta}"
            )
        bits = (signs[:, j] > 0).astype(np.int64)
        _, codes = np.unique(codes * 2 + bits, return_inverse=True)
        selected.append(j)
        cur_g, cur_h = g2, h2
        trace.append((j, g2, h2))

    if not selected:
        # degenerate pool (impurity already at tolerance with no boundaries,
        # e.g. a single-class pool): keep one boundary anyway so downstream
        # losses have a facet to work with; pick the one losing least coverage
        best_zero = None
        for j in range(n_cands):
            g2, h2, _ = _best_group(
                _fold_columns(signs[:, [j]]), pool.preds, c
            )
            if best_zero is None or cur_g - g2 < best_zero[0]:
                best_zero = (cur_g - g2, j, g2, h2)
        _, j, g2, h2 = best_zero
        selected.append(j)
        codes = _fold_columns(signs[:, [j]])
        cur_g, cur_h = g2, h2
        trace.append((j, g2, h2))

    g, h, mask = _best_group(codes, pool.preds, c)
    pattern = signs[int(np.argmax(mask)), selected].copy()
    covered = np.sort(pool.ids[mask & (pool.preds == c)])
    return DecisionRegion(
        cls=c,
        boundaries=[candidates[j] for j in selected],
        sign_pattern=pattern.astype(np.int8),
        covered_ids=covered,
        impurity=int(h),
        delta=int(delta),
        trace=trace,
    )


# ---------------------------------------------------------------------------
# region extraction (peeling off)


def _train_pool(dataset: Dataset, model: GnnModel) -> SamplePool:
    ids = np.asarray(dataset.split.train)
    if dataset.task == TASK_GRAPH:
        emb = np.zeros((len(ids), model.hidden))
        preds = np.zeros(len(ids), dtype=int)
        for row, gid in enumerate(ids):
            tr = forward(model, unit_weights(dataset.graphs[gid]))
            emb[row] = tr.alpha
            preds[row] = int(np.argmax(tr.probs))
        return SamplePool(ids=ids, embeddings=emb, preds=preds)
    wg = unit_weights(dataset.graphs[0])
    emb_all = node_embeddings(model, wg)
    preds_all = np.argmax(node_logits(model, wg), axis=1)
    return SamplePool(ids=ids, embeddings=emb_all[ids], preds=preds_all[ids])


def _dedup(boundaries: list[LinearBoundary]) -> list[LinearBoundary]:
    seen = set()
    out = []
    for ldb in boundaries:
        key = (tuple(np.round(ldb.w / DEDUP_TOL).astype(np.int64).tolist()),
               int(round(ldb.b / DEDUP_TOL)))
        if key not in seen:
            seen.add(key)
            out.append(ldb)
    return out


def _sample_candidates(
    model: GnnModel,
    pool: SamplePool,
    member_rows: np.ndarray,
    count: int,
    rng: np.random.Generator,
) -> list[LinearBoundary]:
    """Draw `count` boundaries from the given pool rows; degenerate samples
    are skipped, and with-replacement draws are deduplicated."""
    replace = len(member_rows) < count
    rows = rng.choice(member_rows, size=count, replace=replace)
    out = []
    for row in rows:
        try:
            out.append(
                boundary_from_embedding(
                    model, pool.embeddings[row], source_id=int(pool.ids[row])
                )
            )
        except DegenerateBoundaryError:
            continue
    return _dedup(out) if replace else out


def extract_regions(
    dataset: Dataset,
    model: GnnModel,
    ldbs_per_class: int = 50,
    seed: int = 0,
    max_rounds: int = 20,
    redraw: bool = True,
) -> RegionSet:
    """Peel decision regions off every class of the training set.

    Per class: sample boundaries at class members, greedily select a region,
    remove its covered samples, repeat until the class is exhausted (or
    max_rounds passes). Samples left over get singleton regions built from
    their own boundary, with a warning recorded.
    """
    pool = _train_pool(dataset, model)
    regions: list[DecisionRegion] = []
    assignment: dict[int, int] = {}
    warnings: list[str] = []

    for c in range(dataset.num_classes):
        remaining = np.flatnonzero(pool.preds == c)  # row indices into pool
        other = np.flatnonzero(pool.preds != c)
        round_idx = 0
        candidates: list[LinearBoundary] = []
        while len(remaining) and round_idx < max_rounds:
            if redraw or not candidates:
                rng = substream(seed, "ldb-sources", c, round_idx)
                candidates = _sample_candidates(
                    model, pool, remaining, ldbs_per_class, rng
                )
            if not candidates:
                warnings.append(
                    f"class {c}: no valid boundary candidates at round {round_idx}"
                )
                break
            rows = np.concatenate([remaining, other])
            sub = SamplePool(
                ids=pool.ids[rows],
                embeddings=pool.embeddings[rows],
                preds=pool.preds[rows],
            )
            try:
                region = greedy_select(candidates, sub, c)
            except StallError as exc:
                warnings.append(f"class {c}: greedy stalled at round {round_idx}: {exc}")
                break
            regions.append(region)
            idx = len(regions) - 1
            covered = set(region.covered_ids.tolist())
            for sid in region.covered_ids:
                assignment[int(sid)] = idx
            remaining = np.array(
                [r for r in remaining if int(pool.ids[r]) not in covered], dtype=int
            )
            round_idx += 1
        # leftovers: one singleton region per sample from its own boundary
        for row in remaining:
            sid = int(pool.ids[row])
            ldb = boundary_from_embedding(model, pool.embeddings[row], source_id=sid)
            vals = ldb.values(pool.embeddings[other])
            impurity = int((vals >= 0).sum())
            regions.append(
                DecisionRegion(
                    cls=c,
                    boundaries=[ldb],
                    sign_pattern=np.array([1], dtype=np.int8),
                    covered_ids=np.array([sid]),
                    impurity=impurity,
                    delta=impurity,
                    trace=[],
                )
            )
            assignment[sid] = len(regions) - 1
            warnings.append(
                f"class {c}: sample {sid} got a singleton region after "
                f"{round_idx} rounds"
            )
    for w in warnings:
        logger.warning(w)
    logger.info(
        "extracted %d regions over %d samples (%d warnings)",
        len(regions),
        len(pool.ids),
        len(warnings),
    )
    return RegionSet(
        task=dataset.task,
        num_classes=dataset.num_classes,
        regions=regions,
        assignment=assignment,
        warnings=warnings,
        seed=seed,
        ldbs_per_class=ldbs_per_class,
    )


# ---------------------------------------------------------------------------
# serialization


def save_regions(region_set: RegionSet, path: str | Path) -> None:
    payload = {
        "format": "rcx-regions-v1",
        "task": region_set.task,
        "num_classes": region_set.num_classes,
        "seed": region_set.seed,
        "ldbs_per_class": region_set.ldbs_per_class,
        "regions": [
            {
                "class": r.cls,
                "boundaries": [
                    {
                        "w": [float(x) for x in ldb.w],
                        "b": float(ldb.b),
                        "classes": [int(ldb.cls_pos), int(ldb.cls_neg)],
                    }
                    for ldb in r.boundaries
                ],
                "sign_pattern": [int(s) for s in r.sign_pattern],
                "covered_ids": [int(i) for i in r.covered_ids],
                "impurity": int(r.impurity),
                "delta": int(r.delta),
            }
            for r in region_set.regions
        ],
        "warnings": list(region_set.warnings),
    }
    Path(path).write_text(json.dumps(payload, separators=(",", ":")) + "\n")


def load_regions(path: str | Path) -> RegionSet:
    payload = json.loads(Path(path).read_text())
    if payload.get("format") != "rcx-regions-v1":
        raise ValidationError(f"not a region file: {path}")
    regions = []
    assignment: dict[int, int] = {}
    for rec in payload["regions"]:
        region = DecisionRegion(
            cls=int(rec["class"]),
            boundaries=[
                LinearBoundary(
                    w=np.array(b["w"], dtype=float),
                    b=float(b["b"]),
                    cls_pos=int(b.get("classes", (-1, -1))[0]),
                    cls_neg=int(b.get("classes", (-1, -1))[1]),
                )
                for b in rec["boundaries"]
            ],
            sign_pattern=np.array(rec["sign_pattern"], dtype=np.int8),
            covered_ids=np.array(rec["covered_ids"], dtype=int),
            impurity=int(rec["impurity"]),
            delta=int(rec["delta"]),
        )
        for sid in region.covered_ids:
            assignment[int(sid)] = len(regions)
        regions.append(region)
    return RegionSet(
        task=payload["task"],
        num_classes=int(payload["num_classes"]),
        regions=regions,
        assignment=assignment,
        warnings=list(payload["warnings"]),
        seed=int(payload["seed"]),
        ldbs_per_class=int(payload["ldbs_per_class"]),
    )
