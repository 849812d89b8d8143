"""Command-line pipeline: data generation, training, explanation, evaluation.

Every subcommand writes its artifacts plus a ``run.json`` manifest next to
them (command name, resolved config, seed, sha256 digests of the inputs,
wall time, thread cap). Reruns with the same config and seed reproduce
every artifact byte-for-byte; the manifest itself carries the wall time
and is the one file that differs between reruns.

Configuration precedence, highest first: explicit flag, ``--config`` JSON
file, built-in default. The config file is one flat JSON object; keys a
subcommand does not use are ignored so a single file can drive a whole
pipeline. Thread cap precedence: ``--threads`` flag, then the RCX_THREADS
environment variable, then unlimited.

Exit codes: 0 success, 2 validation or usage error, 3 numeric failure
(divergent training, non-finite losses).
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from pathlib import Path

import numpy as np

from .boundaries import extract_regions, load_regions, save_regions
from .errors import (
    DegenerateBoundaryError,
    NumericError,
    StallError,
    TrainingError,
    ValidationError,
)
from .explainer import (
    MODES,
    ExplainerConfig,
    default_config,
    explain,
    load_explainer,
    predict_mask,
    save_explainer,
    train_explainer,
)
from .gnn import (
    DATASET_TRAIN_CONFIGS,
    TrainConfig,
    load_model,
    save_model,
    train_gnn,
)
from .graphs import (
    TASK_NODE,
    Dataset,
    file_digest,
    khop_subgraph,
    load_dataset,
    save_dataset,
)
from .datasets import DATASET_NAMES, GenConfig, generate
from .metrics import (
    feature_sigma_for,
    fidelity_sparsity_curve,
    ground_truth_auc_acc,
    node_accuracy,
    per_sample_fidelity,
    explainer_ranker,
    robustness_auc,
    time_inference,
    write_fidelity_csv,
    write_gt_csv,
    write_node_accuracy_csv,
    write_robustness_csv,
    write_timing_csv,
)

_DATA_FILES = ("meta.json", "graphs.jsonl")

# which ExplainerConfig field each sweepable name drives
_SWEEP_PARAMS = {
    "lambda": "lam",
    "beta": "beta",
    "mu": "mu",
    "eta": "eta",
    "lr": "lr",
    "epochs": "epochs",
}

_THREAD_LIMITER = None


# ---------------------------------------------------------------------------
# shared plumbing


def _apply_threads(args) -> int | None:
    """Resolve the BLAS thread cap (flag, then RCX_THREADS) and apply it."""
    global _THREAD_LIMITER
    threads = args.threads
    if threads is None:
        env = os.environ.get("RCX_THREADS")
        if env is not None:
            try:
                threads = int(env)
            except ValueError:
                raise ValidationError(f"RCX_THREADS is not an integer: {env!r}")
    if threads is not None:
        if threads < 1:
            raise ValidationError(f"thread cap must be positive, got {threads}")
        import threadpoolctl

        _THREAD_LIMITER = threadpoolctl.threadpool_limits(limits=threads)
    return threads


def _file_config(args) -> dict:
    if not args.config:
        return {}
    p = Path(args.config)
    if not p.is_file():
        raise ValidationError(f"no config file at {p}")
    doc = json.loads(p.read_text())
    if not isinstance(doc, dict):
        raise ValidationError("config file must hold one flat JSON object")
    return doc


def _resolve(args, file_cfg: dict, defaults: dict) -> dict:
    """Merge flag > config file > default for every key in defaults."""
    out = {}
    for key, default in defaults.items():
        val = getattr(args, key)
        if val is None:
            val = file_cfg.get(key, default)
            if val is not None and default is not None:
                val = type(default)(val)
        out[key] = val
    return out


def _require_file(path: str | Path, what: str) -> Path:
    p = Path(path)
    if not p.is_file():
        raise ValidationError(f"no {what} at {p}")
    return p


def _data_inputs(data_dir: str | Path) -> dict:
    root = Path(data_dir)
    if not root.is_dir():
        raise ValidationError(f"no dataset directory at {root}")
    return {
        str(root / name): file_digest(_require_file(root / name, "dataset file"))
        for name in _DATA_FILES
    }


def _check_overwrite(inputs: dict, outputs: list[Path]) -> None:
    taken = {Path(p).resolve() for p in inputs}
    for out in outputs:
        if Path(out).resolve() in taken:
            raise ValidationError(f"output {out} would overwrite an input")


def _write_manifest(
    out_dir: Path,
    command: str,
    config: dict,
    seed: int | None,
    inputs: dict,
    t0: float,
    threads: int | None,
) -> None:
    doc = {
        "command": command,
        "config": config,
        "seed": seed,
        "inputs": inputs,
        "threads": threads,
        "wall_time_s": time.perf_counter() - t0,
    }
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "run.json").write_text(json.dumps(doc, indent=2) + "\n")


def _load_explainer_checked(args, inputs: dict):
    """Load the explainer; verify --regions matches its training digest."""
    expl_path = _require_file(args.explainer, "explainer checkpoint")
    inputs[str(expl_path)] = file_digest(expl_path)
    net, cfg_doc, digest = load_explainer(expl_path)
    if getattr(args, "regions", None):
        reg_path = _require_file(args.regions, "regions file")
        inputs[str(reg_path)] = file_digest(reg_path)
        if file_digest(reg_path) != digest:
            raise ValidationError(
                "regions file does not match the one the explainer was "
                "trained on (digest mismatch)"
            )
    return net, cfg_doc


def _floats(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip() != ""]
    except ValueError:
        raise ValidationError(f"expected comma-separated numbers, got {text!r}")


# ---------------------------------------------------------------------------
# subcommands


def cmd_gen_data(args) -> int:
    t0 = time.perf_counter()
    threads = _apply_threads(args)
    file_cfg = _file_config(args)
    cfg = _resolve(
        args,
        file_cfg,
        {
            "dataset": None,
            "seed": 0,
            "base_nodes": None,
            "motif_count": None,
            "graph_count": None,
            "noise_rate": 0.01,
        },
    )
    if cfg["dataset"] is None:
        raise ValidationError("gen-data needs --dataset")
    if cfg["dataset"] not in DATASET_NAMES:
        raise ValidationError(
            f"unknown dataset {cfg['dataset']!r}; choose from {DATASET_NAMES}"
        )
    out = Path(args.out)
    ds = generate(
        GenConfig(
            dataset=cfg["dataset"],
            seed=cfg["seed"],
            base_nodes=cfg["base_nodes"],
            motif_count=cfg["motif_count"],
            graph_count=cfg["graph_count"],
            noise_rate=cfg["noise_rate"],
        )
    )
    save_dataset(ds, out)
    _write_manifest(out, "gen-data", cfg, cfg["seed"], {}, t0, threads)
    print(f"wrote {len(ds.graphs)} graph(s) to {out}")
    return 0


def cmd_train_gnn(args) -> int:
    t0 = time.perf_counter()
    threads = _apply_threads(args)
    file_cfg = _file_config(args)
    inputs = _data_inputs(args.data)
    out = Path(args.out)
    _check_overwrite(inputs, [out])
    ds = load_dataset(args.data)
    base = DATASET_TRAIN_CONFIGS.get(ds.generator.get("name"), TrainConfig())
    cfg = _resolve(
        args,
        file_cfg,
        {
            "hidden": base.hidden,
            "lr": base.lr,
            "epochs": base.epochs,
            "weight_decay": base.weight_decay,
            "seed": base.seed,
        },
    )
    model, metrics = train_gnn(
        ds,
        TrainConfig(
            hidden=cfg["hidden"],
            lr=cfg["lr"],
            epochs=cfg["epochs"],
            weight_decay=cfg["weight_decay"],
            seed=cfg["seed"],
        ),
    )
    save_model(model, out, training=metrics)
    _write_manifest(out.parent, "train-gnn", cfg, cfg["seed"], inputs, t0, threads)
    acc = metrics["accuracy"]
    print(
        "train/val/test accuracy: "
        f"{acc['train']:.3f}/{acc['val']:.3f}/{acc['test']:.3f}"
    )
    return 0


def cmd_extract_regions(args) -> int:
    t0 = time.perf_counter()
    threads = _apply_threads(args)
    file_cfg = _file_config(args)
    inputs = _data_inputs(args.data)
    model_path = _require_file(args.model, "model checkpoint")
    inputs[str(model_path)] = file_digest(model_path)
    out = Path(args.out)
    _check_overwrite(inputs, [out])
    cfg = _resolve(args, file_cfg, {"ldbs_per_class": 50, "seed": 0})
    ds = load_dataset(args.data)
    model = load_model(model_path)
    rs = extract_regions(
        ds, model, ldbs_per_class=cfg["ldbs_per_class"], seed=cfg["seed"]
    )
    save_regions(rs, out)
    _write_manifest(
        out.parent, "extract-regions", cfg, cfg["seed"], inputs, t0, threads
    )
    print(f"extracted {len(rs.regions)} region(s); {len(rs.warnings)} warning(s)")
    return 0


def cmd_train_explainer(args) -> int:
    t0 = time.perf_counter()
    threads = _apply_threads(args)
    file_cfg = _file_config(args)
    inputs = _data_inputs(args.data)
    model_path = _require_file(args.model, "model checkpoint")
    inputs[str(model_path)] = file_digest(model_path)
    out = Path(args.out)
    ds = load_dataset(args.data)
    model = load_model(model_path)
    base = default_config(ds.task)
    cfg = _resolve(
        args,
        file_cfg,
        {
            "mode": base.mode,
            "lam": base.lam,
            "beta": base.beta,
            "mu": base.mu,
            "eta": base.eta,
            "loss_scale": base.loss_scale,
            "lr": base.lr,
            "epochs": base.epochs,
            "batch_size": base.batch_size,
            "seed": base.seed,
            "contrast_pair": None,
        },
    )
    regions, digest = None, ""
    if args.regions:
        reg_path = _require_file(args.regions, "regions file")
        inputs[str(reg_path)] = file_digest(reg_path)
        digest = file_digest(reg_path)
        regions = load_regions(reg_path)
    _check_overwrite(inputs, [out])
    pair = cfg["contrast_pair"]
    if isinstance(pair, str):
        vals = _floats(pair)
        if len(vals) != 2:
            raise ValidationError(f"contrast pair needs two classes, got {pair!r}")
        pair = (int(vals[0]), int(vals[1]))
    ecfg = ExplainerConfig(
        lam=cfg["lam"],
        beta=cfg["beta"],
        mu=cfg["mu"],
        loss_scale=cfg["loss_scale"],
        lr=cfg["lr"],
        epochs=cfg["epochs"],
        mode=cfg["mode"],
        eta=cfg["eta"],
        contrast_pair=pair,
        seed=cfg["seed"],
        batch_size=cfg["batch_size"],
    )
    net, metrics = train_explainer(ds, regions, model, ecfg)
    save_explainer(net, ecfg, out, regions_digest=digest)
    cfg["contrast_pair"] = list(pair) if pair else None
    _write_manifest(
        out.parent, "train-explainer", cfg, cfg["seed"], inputs, t0, threads
    )
    print(f"final loss {metrics['final_loss']:.4f} over {metrics['num_samples']} samples")
    return 0


def cmd_explain(args) -> int:
    t0 = time.perf_counter()
    threads = _apply_threads(args)
    inputs = _data_inputs(args.data)
    model_path = _require_file(args.model, "model checkpoint")
    inputs[str(model_path)] = file_digest(model_path)
    out = Path(args.out)
    ds = load_dataset(args.data)
    model = load_model(model_path)
    net, _ = _load_explainer_checked(args, inputs)
    _check_overwrite(inputs, [out])

    sid = args.graph
    if not 0 <= sid < ds.num_samples:
        raise ValidationError(
            f"sample {sid} out of range for {ds.num_samples} samples"
        )
    if ds.task == TASK_NODE:
        g, node = ds.graphs[0], sid
        scope, mapping = khop_subgraph(g, node, args.k_hops)
    else:
        g, node = ds.graphs[sid], None
        scope, mapping = g, np.arange(g.n)
    selected = explain(
        net, model, g, top_k=args.top_k, threshold=args.threshold,
        node=node, k_hops=args.k_hops,
    )
    mask = predict_mask(net, model, scope)
    edges = scope.edge_list()
    doc = {
        "graph": sid,
        "node": node,
        "edges": [
            [int(mapping[i]), int(mapping[j]), float(mask.M[i, j])]
            for i, j in edges
        ],
        "selected": [[int(i), int(j)] for i, j in selected],
    }
    out.write_text(json.dumps(doc, indent=2) + "\n")
    cfg = {"graph": sid, "top_k": args.top_k, "threshold": args.threshold}
    _write_manifest(out.parent, "explain", cfg, None, inputs, t0, threads)
    print(f"selected {len(doc['selected'])} of {len(doc['edges'])} edge(s)")
    return 0


def _eval_setup(args):
    """Shared preamble for the eval commands."""
    inputs = _data_inputs(args.data)
    model_path = _require_file(args.model, "model checkpoint")
    inputs[str(model_path)] = file_digest(model_path)
    ds = load_dataset(args.data)
    model = load_model(model_path)
    net, _ = _load_explainer_checked(args, inputs)
    _check_overwrite(inputs, [Path(args.out)])
    return ds, model, net, inputs


def cmd_eval_fidelity(args) -> int:
    t0 = time.perf_counter()
    threads = _apply_threads(args)
    ds, model, net, inputs = _eval_setup(args)
    grid = _floats(args.grid)
    curve = fidelity_sparsity_curve(model, net, ds, grid, split=args.split)
    out = Path(args.out)
    write_fidelity_csv(curve, out)
    cfg = {"grid": grid, "split": args.split}
    _write_manifest(out.parent, "eval-fidelity", cfg, None, inputs, t0, threads)
    for p in curve.points:
        print(f"sparsity {p.sparsity:.2f}: fidelity {p.mean:.4f} +- {p.std:.4f}")
    return 0


def cmd_eval_robustness(args) -> int:
    t0 = time.perf_counter()
    threads = _apply_threads(args)
    ds, model, net, inputs = _eval_setup(args)
    pcts = _floats(args.noise_pcts)
    kwargs = dict(
        noise_pcts=pcts,
        k=args.k,
        num_seeds=args.num_seeds,
        base_seed=args.seed,
        max_retries=args.max_retries,
        split=args.split,
    )
    out = Path(args.out)
    if args.protocol == "edge-auc":
        rows = robustness_auc(net, model, ds, **kwargs)
        write_robustness_csv(rows, out)
        score_key = "mean_auc"
    else:
        rows = node_accuracy(net, model, ds, **kwargs)
        write_node_accuracy_csv(rows, out)
        score_key = "mean_acc"
    cfg = {"protocol": args.protocol, "k": args.k, "noise_pcts": pcts,
           "num_seeds": args.num_seeds, "split": args.split}
    _write_manifest(
        out.parent, "eval-robustness", cfg, args.seed, inputs, t0, threads
    )
    for row in rows:
        print(
            f"noise {row['noise_pct']:.2f}: {score_key} {row[score_key]:.4f} "
            f"({row['skipped']} skipped)"
        )
    return 0


def cmd_eval_gt(args) -> int:
    t0 = time.perf_counter()
    threads = _apply_threads(args)
    ds, model, net, inputs = _eval_setup(args)
    auc, acc = ground_truth_auc_acc(net, model, ds, split=args.split)
    ids = [int(s) for s in getattr(ds.split, args.split)]
    if ds.task == TASK_NODE:
        labels = ds.graphs[0].node_labels
        n = sum(1 for s in ids if labels[s] != 0)
    else:
        n = len(ids)
    out = Path(args.out)
    write_gt_csv(auc, acc, n, out)
    cfg = {"split": args.split}
    _write_manifest(out.parent, "eval-gt", cfg, None, inputs, t0, threads)
    print(f"ground-truth AUC {auc:.4f}, accuracy {acc:.4f} over {n} sample(s)")
    return 0


def cmd_eval_time(args) -> int:
    t0 = time.perf_counter()
    threads = _apply_threads(args)
    ds, model, net, inputs = _eval_setup(args)
    result = time_inference(net, model, ds, split=args.split, top_k=args.top_k)
    out = Path(args.out)
    write_timing_csv(result, out)
    cfg = {"split": args.split, "top_k": args.top_k}
    _write_manifest(out.parent, "eval-time", cfg, None, inputs, t0, threads)
    print(f"mean {result['mean_s']*1e3:.2f} ms over {result['n']} sample(s)")
    return 0


def cmd_sweep(args) -> int:
    t0 = time.perf_counter()
    threads = _apply_threads(args)
    file_cfg = _file_config(args)
    inputs = _data_inputs(args.data)
    model_path = _require_file(args.model, "model checkpoint")
    inputs[str(model_path)] = file_digest(model_path)
    reg_path = _require_file(args.regions, "regions file")
    inputs[str(reg_path)] = file_digest(reg_path)
    if args.param not in _SWEEP_PARAMS:
        raise ValidationError(
            f"unknown sweep parameter {args.param!r}; "
            f"choose from {sorted(_SWEEP_PARAMS)}"
        )
    values = _floats(args.values)
    if not values:
        raise ValidationError("sweep needs at least one value")
    ds = load_dataset(args.data)
    model = load_model(model_path)
    regions = load_regions(reg_path)
    base = default_config(ds.task)
    cfg = _resolve(
        args,
        file_cfg,
        {
            "epochs": base.epochs,
            "lr": base.lr,
            "seed": base.seed,
            "sparsity": 0.7,
            "split": "test",
        },
    )
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    field = _SWEEP_PARAMS[args.param]
    rows = []
    for value in values:
        ecfg = ExplainerConfig(
            lr=cfg["lr"], epochs=cfg["epochs"], seed=cfg["seed"],
            lam=base.lam, beta=base.beta, mu=base.mu,
        )
        setattr(ecfg, field, int(value) if field == "epochs" else value)
        ecfg.validate()
        net, metrics = train_explainer(ds, regions, model, ecfg)
        vals = per_sample_fidelity(
            model, ds, explainer_ranker(net, model), cfg["sparsity"],
            split=cfg["split"],
        )
        rows.append(
            {
                "param": args.param,
                "value": value,
                "mean_fidelity": float(vals.mean()),
                "std_fidelity": float(vals.std()),
                "n": int(len(vals)),
                "final_loss": float(metrics["final_loss"]),
            }
        )
        print(f"{args.param}={value}: fidelity {rows[-1]['mean_fidelity']:.4f}")
    import csv as _csv

    with open(out / "sweep.csv", "w", newline="") as fh:
        w = _csv.DictWriter(
            fh,
            fieldnames=[
                "param", "value", "mean_fidelity", "std_fidelity", "n",
                "final_loss",
            ],
        )
        w.writeheader()
        w.writerows(rows)
    cfg_echo = dict(cfg, param=args.param, values=values)
    _write_manifest(out, "sweep", cfg_echo, cfg["seed"], inputs, t0, threads)
    return 0


# ---------------------------------------------------------------------------
# parser


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rcx",
        description="Counterfactual edge explanations for graph classifiers.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="flat JSON config file")
    common.add_argument("--threads", type=int, default=None,
                        help="BLAS thread cap (default: RCX_THREADS, else unlimited)")
    common.add_argument("--out", required=True, help="output path")

    p = sub.add_parser("gen-data", parents=[common],
                       help="generate a synthetic motif dataset")
    p.add_argument("--dataset", choices=DATASET_NAMES)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--base-nodes", type=int, default=None)
    p.add_argument("--motif-count", type=int, default=None)
    p.add_argument("--graph-count", type=int, default=None)
    p.add_argument("--noise-rate", type=float, default=None)
    p.set_defaults(func=cmd_gen_data)

    p = sub.add_parser("train-gnn", parents=[common],
                       help="train the graph classifier")
    p.add_argument("--data", required=True)
    p.add_argument("--hidden", type=int, default=None)
    p.add_argument("--lr", type=float, default=None)
    p.add_argument("--epochs", type=int, default=None)
    p.add_argument("--weight-decay", type=float, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(func=cmd_train_gnn)

    p = sub.add_parser("extract-regions", parents=[common],
                       help="extract decision regions from a trained model")
    p.add_argument("--data", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--ldbs-per-class", type=int, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(func=cmd_extract_regions)

    p = sub.add_parser("train-explainer", parents=[common],
                       help="train the edge-mask explanation network")
    p.add_argument("--data", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--regions", default=None)
    p.add_argument("--mode", choices=MODES, default=None)
    p.add_argument("--lam", type=float, default=None)
    p.add_argument("--beta", type=float, default=None)
    p.add_argument("--mu", type=float, default=None)
    p.add_argument("--eta", type=float, default=None)
    p.add_argument("--loss-scale", type=float, default=None)
    p.add_argument("--lr", type=float, default=None)
    p.add_argument("--epochs", type=int, default=None)
    p.add_argument("--batch-size", type=int, default=None)
    p.add_argument("--contrast-pair", default=None,
                   help="class pair for contrastive mode, e.g. 0,1")
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(func=cmd_train_explainer)

    p = sub.add_parser("explain", parents=[common],
                       help="write the mask and selected edges for one sample")
    p.add_argument("--data", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--explainer", required=True)
    p.add_argument("--regions", default=None)
    p.add_argument("--graph", type=int, required=True,
                   help="sample id (graph index, or node id for node tasks)")
    p.add_argument("--top-k", type=int, default=None)
    p.add_argument("--threshold", type=float, default=0.5)
    p.add_argument("--k-hops", type=int, default=3)
    p.set_defaults(func=cmd_explain)

    def eval_parser(name, help_text):
        q = sub.add_parser(name, parents=[common], help=help_text)
        q.add_argument("--data", required=True)
        q.add_argument("--model", required=True)
        q.add_argument("--explainer", required=True)
        q.add_argument("--regions", default=None)
        q.add_argument("--split", default="test",
                       choices=("train", "val", "test"))
        return q

    p = eval_parser("eval-fidelity", "fidelity-sparsity curve")
    p.add_argument("--grid", required=True,
                   help="comma-separated sparsity levels, e.g. 0,0.5,0.9")
    p.set_defaults(func=cmd_eval_fidelity)

    p = eval_parser("eval-robustness", "explanation stability under noise")
    p.add_argument("--noise-pcts", required=True,
                   help="comma-separated noise levels, e.g. 0,0.1,0.2")
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--num-seeds", type=int, default=10)
    p.add_argument("--max-retries", type=int, default=20)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--protocol", choices=("edge-auc", "node-overlap"),
                   default="edge-auc")
    p.set_defaults(func=cmd_eval_robustness)

    p = eval_parser("eval-gt", "mask quality against motif ground truth")
    p.set_defaults(func=cmd_eval_gt)

    p = eval_parser("eval-time", "inference wall time per explanation")
    p.add_argument("--top-k", type=int, default=None)
    p.set_defaults(func=cmd_eval_time)

    p = sub.add_parser("sweep", parents=[common],
                       help="train one explainer per hyperparameter value")
    p.add_argument("--data", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--regions", required=True)
    p.add_argument("--param", required=True)
    p.add_argument("--values", required=True,
                   help="comma-separated values, e.g. 0.01,0.1,0.5,0.9")
    p.add_argument("--epochs", type=int, default=None)
    p.add_argument("--lr", type=float, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--sparsity", type=float, default=None)
    p.add_argument("--split", default=None, choices=("train", "val", "test"))
    p.set_defaults(func=cmd_sweep)

    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code in (0, None) else 2
    try:
        return args.func(args)
    except (TrainingError, NumericError, StallError, DegenerateBoundaryError) as exc:
        print(f"numeric error: {exc}", file=sys.stderr)
        return 3
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
