"""Tests for evaluation metrics: fidelity/sparsity, noise perturbation,
rank-based AUC, robustness protocols, ground-truth scoring, and timing.

Oracles: definitional re-computation for fidelity, brute-force pairwise
comparison for AUC, construction bounds for the perturbation, and exact
arithmetic for sparsity.
"""

import math

import numpy as np
import pytest

from rcx.errors import ValidationError
from rcx.explainer import init_explainer, predict_mask
from rcx.gnn import TrainConfig, forward, init_model, predict, train_gnn
from rcx.graphs import (
    TASK_GRAPH,
    TASK_NODE,
    Dataset,
    Graph,
    Split,
    khop_subgraph,
    remove_edges,
    unit_weights,
)
from rcx.metrics import (
    NoiseSpec,
    explainer_ranker,
    feature_sigma_for,
    fidelity,
    fidelity_sparsity_curve,
    ground_truth_auc_acc,
    gt_eval_from_scores,
    node_accuracy,
    node_weights,
    per_sample_fidelity,
    perturb,
    random_ranker,
    robustness_auc,
    roc_auc,
    sparsity,
    time_inference,
    topk_nodes,
    write_fidelity_csv,
    write_robustness_csv,
)
from rcx.rng import substream


def make_graph(rng, n=7, d=4, label=0):
    adj = np.zeros((n, n))
    for i in range(1, n):
        j = int(rng.integers(0, i))
        adj[i, j] = adj[j, i] = 1.0
    for i, j in rng.integers(0, n, size=(3, 2)):
        if i != j:
            adj[i, j] = adj[j, i] = 1.0
    feats = np.abs(rng.normal(size=(n, d))) + 0.1
    return Graph(features=feats, adjacency=adj, graph_label=label)


def cycle_graph(n, label=0, d=3):
    adj = np.zeros((n, n))
    for i in range(n):
        adj[i, (i + 1) % n] = adj[(i + 1) % n, i] = 1.0
    return Graph(features=np.ones((n, d)), adjacency=adj, graph_label=label)


class TestFidelity:
    def test_empty_selection_is_zero(self):
        rng = np.random.default_rng(0)
        g = make_graph(rng)
        model = init_model(4, 5, 2, TASK_GRAPH, seed=0)
        assert fidelity(model, g, []) == 0.0

    def test_matches_definitional_oracle(self):
        model = init_model(4, 5, 2, TASK_GRAPH, seed=1)
        for k in range(15):
            rng = np.random.default_rng(100 + k)
            g = make_graph(rng)
            edges = g.edge_list()
            take = rng.integers(1, len(edges) + 1)
            sel = edges[rng.choice(len(edges), size=take, replace=False)]
            before = forward(model, unit_weights(g))
            c = int(np.argmax(before.probs))
            after = forward(model, unit_weights(remove_edges(g, sel)))
            want = float(before.probs[c] - after.probs[c])
            assert fidelity(model, g, sel) == pytest.approx(want, abs=1e-12)

    def test_node_task_fidelity(self):
        rng = np.random.default_rng(2)
        g = make_graph(rng, n=9)
        g.node_labels = np.zeros(9, dtype=np.int64)
        model = init_model(4, 5, 2, TASK_NODE, seed=2)
        edges = g.edge_list()[:2]
        before = forward(model, unit_weights(g), node=3)
        c = int(np.argmax(before.probs))
        after = forward(model, unit_weights(remove_edges(g, edges)), node=3)
        want = float(before.probs[c] - after.probs[c])
        assert fidelity(model, g, edges, node=3) == pytest.approx(want)


class TestSparsity:
    def test_arithmetic(self):
        g = cycle_graph(20)
        assert g.num_edges == 20
        assert sparsity(g.edge_list()[:5], g) == pytest.approx(0.75)

    def test_boundary_values(self):
        g = cycle_graph(8)
        assert sparsity(g.edge_list(), g) == 0.0
        assert sparsity([], g) == 1.0

    def test_edgeless_graph_rejected(self):
        g = Graph(features=np.ones((3, 2)), adjacency=np.zeros((3, 3)))
        with pytest.raises(ValidationError):
            sparsity([], g)

    def test_topk_selection_identity(self):
        g = cycle_graph(16)
        for k in range(17):
            assert sparsity(g.edge_list()[:k], g) == 1.0 - k / 16


def binary_dataset(num=16, seed=7):
    """Half path graphs (label 0), half cycles (label 1), fixed features.

    Cycles rather than cliques: in a clique every conv layer averages the
    same all-node mean into every embedding, so all edges tie and rank
    tests become vacuous. With the positional channel, cycle nodes stay
    distinct.
    """
    graphs = []
    for i in range(num):
        label = i % 2
        n = 6
        adj = np.zeros((n, n))
        for a in range(n - 1):
            adj[a, a + 1] = adj[a + 1, a] = 1.0
        if label == 1:
            adj[0, n - 1] = adj[n - 1, 0] = 1.0
        feats = np.full((n, 3), 0.1)
        feats[:, label] = 1.0
        feats[:, 2] = 0.05 * np.arange(n)  # positional channel: breaks node ties
        graphs.append(Graph(features=feats, adjacency=adj, graph_label=label))
    third = num // 4
    split = Split(
        train=np.arange(0, num - 2 * third),
        val=np.arange(num - 2 * third, num - third),
        test=np.arange(num - third, num),
    )
    return Dataset(graphs=graphs, task=TASK_GRAPH, num_classes=2, split=split)


_CACHE = {}


def trained_toy():
    if "model" not in _CACHE:
        ds = binary_dataset(24)
        model, _ = train_gnn(
            ds, TrainConfig(hidden=8, lr=0.01, epochs=300, weight_decay=0.0, seed=0)
        )
        _CACHE["ds"] = ds
        _CACHE["model"] = model
    return _CACHE["ds"], _CACHE["model"]


class TestFidelityCurve:
    def test_structure_and_grid(self):
        ds, model = trained_toy()
        net = init_explainer(8, seed=0)
        curve = fidelity_sparsity_curve(model, net, ds, [0.0, 0.5, 0.9])
        svals = [p.sparsity for p in curve.points]
        assert svals == [0.0, 0.5, 0.9]
        for p in curve.points:
            assert p.n > 0 and np.isfinite(p.mean) and p.std >= 0.0

    def test_sparsity_zero_removes_everything(self):
        ds, model = trained_toy()
        net = init_explainer(8, seed=1)
        curve = fidelity_sparsity_curve(model, net, ds, [0.0])
        pos = [
            int(s) for s in ds.split.test if ds.graphs[int(s)].graph_label == 1
        ]
        want = np.mean(
            [fidelity(model, ds.graphs[s], ds.graphs[s].edge_list()) for s in pos]
        )
        assert curve.points[0].mean == pytest.approx(float(want))

    def test_monotone_up_to_tolerance(self):
        ds, model = trained_toy()
        net = init_explainer(8, seed=2)
        curve = fidelity_sparsity_curve(model, net, ds, [0.1, 0.3, 0.5, 0.7, 0.9])
        means = [p.mean for p in curve.points]
        for lo, hi in zip(means[1:], means):
            assert lo <= hi + 0.05

    def test_bad_grid_rejected(self):
        ds, model = trained_toy()
        net = init_explainer(8, seed=0)
        with pytest.raises(ValidationError):
            fidelity_sparsity_curve(model, net, ds, [0.5, 0.5])
        with pytest.raises(ValidationError):
            fidelity_sparsity_curve(model, net, ds, [0.2, 1.5])

    def test_no_positive_samples_rejected(self):
        graphs = [cycle_graph(5, label=0, d=3) for _ in range(4)]
        ds = Dataset(
            graphs=graphs,
            task=TASK_GRAPH,
            num_classes=2,
            split=Split(train=[0, 1], val=[2], test=[3]),
        )
        model = init_model(3, 5, 2, TASK_GRAPH, seed=3)
        net = init_explainer(5, seed=3)
        with pytest.raises(ValidationError):
            fidelity_sparsity_curve(model, net, ds, [0.5])

    def test_random_ranker_gives_per_sample_values(self):
        ds, model = trained_toy()
        vals = per_sample_fidelity(model, ds, random_ranker(seed=9), 0.5)
        pos = [
            int(s) for s in ds.split.test if ds.graphs[int(s)].graph_label == 1
        ]
        assert len(vals) == len(pos)
        assert np.all(np.isfinite(vals))
        again = per_sample_fidelity(model, ds, random_ranker(seed=9), 0.5)
        assert np.array_equal(vals, again)


class TestPerturb:
    def test_zero_pct_returns_graph_unchanged(self):
        ds, model = trained_toy()
        g = ds.graphs[0]
        spec = NoiseSpec(pct=0.0, feature_sigma=0.1)
        out = perturb(g, spec, model)
        assert np.array_equal(out.adjacency, g.adjacency)
        assert np.array_equal(out.features, g.features)

    def test_prediction_preserved(self):
        ds, model = trained_toy()
        sigma = feature_sigma_for(ds)
        spec = NoiseSpec(pct=0.1, feature_sigma=sigma, max_retries=30)
        for k, sid in enumerate([1, 3, 5, 7, 9, 11]):
            g = ds.graphs[sid]
            out = perturb(g, spec, model, rng=substream(50, "t", k))
            if out is None:
                continue
            assert predict(model, out) == predict(model, g)

    def test_change_budgets_respected(self):
        ds, model = trained_toy()
        spec = NoiseSpec(pct=0.2, feature_sigma=0.05, max_retries=50)
        budget_checked = 0
        for k in range(10):
            g = ds.graphs[k]
            out = perturb(g, spec, model, rng=substream(60, "t", k))
            if out is None:
                continue
            e0, e1 = g.num_edges, out.num_edges
            assert abs(e1 - e0) <= math.ceil(0.2 * e0)
            changed_rows = int(np.any(out.features != g.features, axis=1).sum())
            assert changed_rows <= math.ceil(0.2 * g.n)
            budget_checked += 1
        assert budget_checked >= 3

    def test_deterministic_under_seed(self):
        ds, model = trained_toy()
        g = ds.graphs[2]
        spec = NoiseSpec(pct=0.15, feature_sigma=0.1, max_retries=30, seed=4)
        a = perturb(g, spec, model)
        b = perturb(g, spec, model)
        assert (a is None) == (b is None)
        if a is not None:
            assert np.array_equal(a.adjacency, b.adjacency)
            assert np.array_equal(a.features, b.features)

    def test_invalid_pct_rejected(self):
        with pytest.raises(ValidationError):
            NoiseSpec(pct=0.5, feature_sigma=0.1).validate()
        with pytest.raises(ValidationError):
            NoiseSpec(pct=-0.1, feature_sigma=0.1).validate()

    def test_gt_mask_stays_subset(self):
        rng = np.random.default_rng(8)
        g = make_graph(rng, n=8)
        gt = np.zeros((8, 8))
        e = g.edge_list()[0]
        gt[e[0], e[1]] = gt[e[1], e[0]] = 1.0
        g = Graph(
            features=g.features,
            adjacency=g.adjacency,
            graph_label=0,
            gt_edge_mask=gt,
        )
        model = init_model(4, 5, 2, TASK_GRAPH, seed=5)
        spec = NoiseSpec(pct=0.3, feature_sigma=0.05, max_retries=20)
        out = perturb(g, spec, model, rng=substream(70, "t"))
        if out is not None and out.gt_edge_mask is not None:
            assert np.all(out.gt_edge_mask <= out.adjacency)


class TestRocAuc:
    def test_perfect_separation(self):
        assert roc_auc([0.9, 0.8, 0.2, 0.1], [1, 1, 0, 0]) == 1.0
        assert roc_auc([0.1, 0.2, 0.8, 0.9], [1, 1, 0, 0]) == 0.0

    def test_identical_scores_give_half(self):
        assert roc_auc([0.5] * 6, [1, 0, 1, 0, 1, 0]) == 0.5

    def test_matches_pairwise_oracle(self):
        rng = np.random.default_rng(10)
        for _ in range(200):
            n = int(rng.integers(4, 30))
            labels = rng.integers(0, 2, size=n)
            if labels.min() == labels.max():
                labels[0] = 1 - labels[0]
            scores = np.round(rng.normal(size=n), 1)  # coarse: forces ties
            pos = scores[labels == 1]
            neg = scores[labels == 0]
            wins = sum(
                1.0 if p > q else 0.5 if p == q else 0.0
                for p in pos
                for q in neg
            )
            want = wins / (len(pos) * len(neg))
            assert roc_auc(scores, labels) == pytest.approx(want, abs=1e-12)

    def test_monotone_transform_invariance(self):
        rng = np.random.default_rng(11)
        scores = rng.normal(size=20)
        labels = rng.integers(0, 2, size=20)
        labels[0], labels[1] = 0, 1
        base = roc_auc(scores, labels)
        assert roc_auc(3.0 * scores + 7.0, labels) == pytest.approx(base)
        assert roc_auc(np.exp(scores), labels) == pytest.approx(base)

    def test_single_class_rejected(self):
        with pytest.raises(ValidationError):
            roc_auc([0.1, 0.2], [1, 1])
        with pytest.raises(ValidationError):
            roc_auc([0.1, 0.2], [0, 0])


class TestNodeWeights:
    def test_row_maximum(self):
        m = np.array([[0.0, 0.1, 0.8], [0.1, 0.0, 0.3], [0.8, 0.3, 0.0]])
        from rcx.explainer import EdgeMask

        assert np.allclose(node_weights(EdgeMask(M=m)), [0.8, 0.3, 0.8])

    def test_isolated_node_gets_zero(self):
        m = np.zeros((4, 4))
        m[0, 1] = m[1, 0] = 0.6
        from rcx.explainer import EdgeMask

        w = node_weights(EdgeMask(M=m))
        assert w[2] == 0.0 and w[3] == 0.0

    def test_topk_ties_break_to_lowest_id(self):
        w = np.array([0.5, 0.9, 0.5, 0.9])
        assert list(topk_nodes(w, 2)) == [1, 3]
        assert list(topk_nodes(w, 3)) == [1, 3, 0]


class TestRobustness:
    def test_zero_noise_auc_is_one(self):
        ds, model = trained_toy()
        net = init_explainer(8, seed=4)
        rows = robustness_auc(
            net, model, ds, noise_pcts=[0.0], k=2, num_seeds=2, base_seed=0
        )
        assert len(rows) == 1
        assert rows[0]["mean_auc"] == pytest.approx(1.0)
        assert rows[0]["skipped"] == 0

    def test_max_retries_zero_skips_everything(self):
        ds, model = trained_toy()
        net = init_explainer(8, seed=4)
        rows = robustness_auc(
            net,
            model,
            ds,
            noise_pcts=[0.1],
            k=2,
            num_seeds=1,
            base_seed=0,
            max_retries=0,
        )
        n_test = len(ds.split.test)
        assert rows[0]["skipped"] == n_test
        assert math.isnan(rows[0]["mean_auc"])

    def test_node_accuracy_zero_noise_is_one(self):
        ds, model = trained_toy()
        net = init_explainer(8, seed=5)
        rows = node_accuracy(
            net, model, ds, noise_pcts=[0.0], k=2, num_seeds=2, base_seed=0
        )
        assert rows[0]["mean_acc"] == pytest.approx(1.0)


class TestGroundTruth:
    def test_scores_equal_labels_is_perfect(self):
        samples = [
            (np.array([1.0, 0.0, 1.0, 0.0]), np.array([1, 0, 1, 0])),
            (np.array([0.0, 1.0, 0.0]), np.array([0, 1, 0])),
        ]
        auc, acc = gt_eval_from_scores(samples)
        assert auc == 1.0 and acc == 1.0

    def test_anticorrelated_scores_score_zero(self):
        samples = [
            (np.array([0.0, 1.0, 0.0, 1.0]), np.array([1, 0, 1, 0])),
        ]
        auc, acc = gt_eval_from_scores(samples)
        assert auc == 0.0 and acc == 0.0

    def test_graph_task_full_path(self):
        graphs = []
        rng = np.random.default_rng(12)
        for i in range(6):
            g = make_graph(rng, n=6, label=i % 2)
            gt = np.zeros((6, 6))
            e = g.edge_list()[0]
            gt[e[0], e[1]] = gt[e[1], e[0]] = 1.0
            graphs.append(
                Graph(
                    features=g.features,
                    adjacency=g.adjacency,
                    graph_label=i % 2,
                    gt_edge_mask=gt,
                )
            )
        ds = Dataset(
            graphs=graphs,
            task=TASK_GRAPH,
            num_classes=2,
            split=Split(train=[0, 1], val=[2, 3], test=[4, 5]),
        )
        model = init_model(4, 5, 2, TASK_GRAPH, seed=6)
        net = init_explainer(5, seed=6)
        auc, acc = ground_truth_auc_acc(net, model, ds)
        assert 0.0 <= auc <= 1.0 and 0.0 <= acc <= 1.0

    def test_node_task_full_path(self):
        n = 12
        adj = np.zeros((n, n))
        for i in range(n - 1):
            adj[i, i + 1] = adj[i + 1, i] = 1.0
        adj[8, 10] = adj[10, 8] = 1.0
        labels = np.zeros(n, dtype=np.int64)
        labels[[8, 9, 10]] = 1
        gt = np.zeros((n, n))
        for i, j in [(8, 9), (9, 10), (8, 10)]:
            gt[i, j] = gt[j, i] = 1.0
        g = Graph(
            features=np.ones((n, 3)),
            adjacency=adj,
            node_labels=labels,
            gt_edge_mask=gt,
        )
        ds = Dataset(
            graphs=[g],
            task=TASK_NODE,
            num_classes=2,
            split=Split(
                train=np.arange(0, 6), val=np.arange(6, 8), test=np.arange(8, 12)
            ),
        )
        model = init_model(3, 5, 2, TASK_NODE, seed=7)
        net = init_explainer(5, seed=7)
        auc, acc = ground_truth_auc_acc(net, model, ds)
        assert 0.0 <= auc <= 1.0 and 0.0 <= acc <= 1.0

    def test_missing_gt_rejected(self):
        ds, model = trained_toy()
        net = init_explainer(8, seed=8)
        with pytest.raises(ValidationError):
            ground_truth_auc_acc(net, model, ds)


class TestTiming:
    def test_reports_positive_mean(self):
        ds, model = trained_toy()
        net = init_explainer(8, seed=9)
        out = time_inference(net, model, ds)
        assert out["mean_s"] > 0.0
        assert out["n"] == len(ds.split.test)


class TestCsvOutput:
    def test_fidelity_csv_roundtrip(self, tmp_path):
        ds, model = trained_toy()
        net = init_explainer(8, seed=0)
        curve = fidelity_sparsity_curve(model, net, ds, [0.3, 0.6])
        path = tmp_path / "fidelity.csv"
        write_fidelity_csv(curve, path)
        lines = path.read_text().strip().splitlines()
        assert lines[0] == "sparsity,mean,std,n"
        assert len(lines) == 3

    def test_robustness_csv(self, tmp_path):
        rows = [
            {
                "noise_pct": 0.1,
                "k": 8,
                "mean_auc": 0.9,
                "std": 0.01,
                "skipped": 2,
                "n": 38,
            }
        ]
        path = tmp_path / "robustness.csv"
        write_robustness_csv(rows, path)
        lines = path.read_text().strip().splitlines()
        assert lines[0] == "noise_pct,k,mean_auc,std,skipped,n"
        assert lines[1].startswith("0.1,8,")


class TestRankerHelpers:
    def test_explainer_ranker_returns_full_ranking(self):
        ds, model = trained_toy()
        net = init_explainer(8, seed=3)
        rank = explainer_ranker(net, model)
        g = ds.graphs[1]
        ranked = rank(1, g, None)
        assert len(ranked) == g.num_edges
        mask = predict_mask(net, model, g)
        vals = mask.M[ranked[:, 0], ranked[:, 1]]
        assert np.all(np.diff(vals) <= 1e-15)

    def test_random_ranker_covers_computation_graph(self):
        n = 10
        adj = np.zeros((n, n))
        for i in range(n - 1):
            adj[i, i + 1] = adj[i + 1, i] = 1.0
        g = Graph(
            features=np.ones((n, 2)),
            adjacency=adj,
            node_labels=np.zeros(n, dtype=np.int64),
        )
        rank = random_ranker(seed=13)
        ranked = rank(4, g, 4)
        sub, mapping = khop_subgraph(g, 4, 3)
        want = {(int(mapping[i]), int(mapping[j])) for i, j in sub.edge_list()}
        assert {(int(i), int(j)) for i, j in ranked} == want
