"""Command-line pipeline: pretrain -> compress / train-e2e -> eval.

Settings resolve as command-line flag > --config JSON file > built-in
default, and every effective setting is echoed in the run header so outputs
are reproducible from their logs alone.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

from . import evaluate, io
from .codebook import KD, MULTI_HOT, decode_codebook
from .compress import EmbeddingCompressor
from .end2end import GraphEmbedder
from .graph import load_edge_list, load_labels, split_edges
from .sgns import SkipGramEmbedding

PRETRAIN_DEFAULTS = {
    "edges": None,
    "dim": 32,
    "walks_per_node": 10,
    "walk_length": 40,
    "window": 5,
    "negatives": 5,
    "epochs": 5,
    "learning_rate": 0.025,
    "batch_pairs": 1024,
}

COMPRESS_DEFAULTS = {
    "embeddings": None,
    "n_basis": 128,
    "code_len": 8,
    "flavor": MULTI_HOT,
    "kd_k": None,
    "kd_d": None,
    "encoder_layers": 2,
    "hidden_width": None,
    "learning_rate": 0.001,
    "batch_size": 128,
    "epochs": 500,
    "tau_init": 1.0,
    "tau_min": 0.5,
    "tau_step_epochs": 100,
    "validation_fraction": 0.05,
}

TRAIN_E2E_DEFAULTS = {
    "edges": None,
    "n_basis": 128,
    "code_len": 8,
    "dim": 256,
    "gcn_layers": 2,
    "hidden_width": 1000,
    "recon_weight": 0.3,
    "flavor": MULTI_HOT,
    "kd_k": None,
    "kd_d": None,
    "learning_rate": 0.001,
    "batch_size": 128,
    "epochs": 500,
    "tau_init": 1.0,
    "tau_min": 0.5,
    "tau_step_epochs": 100,
    "linkpred_holdout": None,
}

EVAL_DEFAULTS = {
    "embeddings": None,
    "codebook": None,
    "labels": None,
    "n_labels": None,
    "train_fraction": 0.1,
    "runs": 5,
    "split": None,
    "float_bytes": 16,
    "int_bytes": 12,
}

REPORT_MEMORY_DEFAULTS = {
    "nodes": None,
    "dim": 256,
    "n_basis": 128,
    "code_len": 8,
    "kd_k": None,
    "kd_d": None,
    "float_bytes": 16,
    "int_bytes": 12,
}


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--seed", type=int, default=None)
    parser.add_argument("--config", type=str, default=None, help="JSON settings file")
    parser.add_argument("--out-dir", type=str, default=None)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="multihot", description="Compact multi-hot graph embeddings"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("pretrain", help="skip-gram embeddings from an edge list")
    _add_common(p)
    p.add_argument("--edges", type=str)
    p.add_argument("--dim", type=int)
    p.add_argument("--walks-per-node", type=int)
    p.add_argument("--walk-length", type=int)
    p.add_argument("--window", type=int)
    p.add_argument("--negatives", type=int)
    p.add_argument("--epochs", type=int)
    p.add_argument("--learning-rate", type=float)
    p.add_argument("--batch-pairs", type=int)

    p = sub.add_parser("compress", help="compress an embedding file into a codebook")
    _add_common(p)
    p.add_argument("--embeddings", type=str)
    p.add_argument("--n-basis", type=int)
    p.add_argument("--code-len", type=int)
    p.add_argument("--flavor", choices=[MULTI_HOT, KD])
    p.add_argument("--kd-k", type=int)
    p.add_argument("--kd-d", type=int)
    p.add_argument("--encoder-layers", type=int)
    p.add_argument("--hidden-width", type=int)
    p.add_argument("--learning-rate", type=float)
    p.add_argument("--batch-size", type=int)
    p.add_argument("--epochs", type=int)
    p.add_argument("--tau-init", type=float)
    p.add_argument("--tau-min", type=float)
    p.add_argument("--tau-step-epochs", type=int)
    p.add_argument("--validation-fraction", type=float)

    p = sub.add_parser("train-e2e", help="end-to-end codebook from an edge list")
    _add_common(p)
    p.add_argument("--edges", type=str)
    p.add_argument("--n-basis", type=int)
    p.add_argument("--code-len", type=int)
    p.add_argument("--dim", type=int)
    p.add_argument("--gcn-layers", type=int)
    p.add_argument("--hidden-width", type=int)
    p.add_argument("--recon-weight", type=float)
    p.add_argument("--flavor", choices=[MULTI_HOT, KD])
    p.add_argument("--kd-k", type=int)
    p.add_argument("--kd-d", type=int)
    p.add_argument("--learning-rate", type=float)
    p.add_argument("--batch-size", type=int)
    p.add_argument("--epochs", type=int)
    p.add_argument("--tau-init", type=float)
    p.add_argument("--tau-min", type=float)
    p.add_argument("--tau-step-epochs", type=int)
    p.add_argument("--linkpred-holdout", type=float)

    p = sub.add_parser("eval", help="classification / link-prediction / memory report")
    _add_common(p)
    p.add_argument("--embeddings", type=str)
    p.add_argument("--codebook", type=str)
    p.add_argument("--labels", type=str)
    p.add_argument("--n-labels", type=int)
    p.add_argument("--train-fraction", type=float)
    p.add_argument("--runs", type=int)
    p.add_argument("--split", type=str)
    p.add_argument("--float-bytes", type=int)
    p.add_argument("--int-bytes", type=int)

    p = sub.add_parser("report-memory", help="layout cost table for given sizes")
    _add_common(p)
    p.add_argument("--nodes", type=int)
    p.add_argument("--dim", type=int)
    p.add_argument("--n-basis", type=int)
    p.add_argument("--code-len", type=int)
    p.add_argument("--kd-k", type=int)
    p.add_argument("--kd-d", type=int)
    p.add_argument("--float-bytes", type=int)
    p.add_argument("--int-bytes", type=int)

    return parser


def resolve_settings(args: argparse.Namespace, defaults: dict) -> dict:
    """flag > config file > default, rejecting unknown config keys."""
    settings = dict(defaults)
    settings["seed"] = 0
    if args.config is not None:
        with open(args.config, "r", encoding="utf-8") as fh:
            loaded = json.load(fh)
        if not isinstance(loaded, dict):
            raise ValueError(f"{args.config}: config must be a JSON object")
        unknown = sorted(set(loaded) - set(settings))
        if unknown:
            raise ValueError(f"{args.config}: unknown config keys {unknown}")
        settings.update(loaded)
    for key in settings:
        value = getattr(args, key, None)
        if value is not None:
            settings[key] = value
    return settings


def _require(settings: dict, key: str) -> None:
    if settings.get(key) is None:
        raise ValueError(f"missing required setting --{key.replace('_', '-')}")


def _check_input_path(settings: dict, key: str) -> None:
    if settings.get(key) is not None and not Path(settings[key]).is_file():
        raise ValueError(f"--{key.replace('_', '-')}: no such file {settings[key]!r}")


def _print_header(command: str, settings: dict, out_dir: Path) -> None:
    rendered = " ".join(f"{k}={settings[k]}" for k in sorted(settings))
    print(f"[multihot {command}] out_dir={out_dir} {rendered}")


def _out_dir(args: argparse.Namespace) -> Path:
    out = Path(args.out_dir) if args.out_dir else Path(".")
    out.mkdir(parents=True, exist_ok=True)
    return out


def _kd_block_size(settings: dict) -> int | None:
    if settings["flavor"] != KD:
        return None
    _require(settings, "kd_k")
    _require(settings, "kd_d")
    k, d = settings["kd_k"], settings["kd_d"]
    if k * d != settings["n_basis"]:
        raise ValueError(
            f"kd sizes must satisfy kd_k * kd_d == n_basis, got {k} * {d} != {settings['n_basis']}"
        )
    if d != settings["code_len"]:
        raise ValueError(f"kd_d must equal code_len, got {d} != {settings['code_len']}")
    return k


def cmd_pretrain(args: argparse.Namespace) -> int:
    settings = resolve_settings(args, PRETRAIN_DEFAULTS)
    _require(settings, "edges")
    _check_input_path(settings, "edges")
    out_dir = _out_dir(args)
    _print_header("pretrain", settings, out_dir)
    started = time.perf_counter()
    graph = load_edge_list(settings["edges"])
    model = SkipGramEmbedding(
        dim=settings["dim"],
        walks_per_node=settings["walks_per_node"],
        walk_length=settings["walk_length"],
        window=settings["window"],
        negatives=settings["negatives"],
        epochs=settings["epochs"],
        learning_rate=settings["learning_rate"],
        batch_pairs=settings["batch_pairs"],
        seed=settings["seed"],
    )
    table = model.fit_transform(graph)
    out_path = out_dir / "embeddings.txt"
    io.save_embeddings(out_path, table)
    elapsed = time.perf_counter() - started
    print(f"wrote {out_path}: {graph.n_nodes} nodes, dim {settings['dim']}, {elapsed:.2f}s")
    return 0


def cmd_compress(args: argparse.Namespace) -> int:
    settings = resolve_settings(args, COMPRESS_DEFAULTS)
    _require(settings, "embeddings")
    _check_input_path(settings, "embeddings")
    out_dir = _out_dir(args)
    _print_header("compress", settings, out_dir)
    table = io.load_embeddings(settings["embeddings"])
    model = EmbeddingCompressor(
        n_basis=settings["n_basis"],
        code_len=settings["code_len"],
        flavor=settings["flavor"],
        block_size=_kd_block_size(settings),
        encoder_layers=settings["encoder_layers"],
        hidden_width=settings["hidden_width"],
        learning_rate=settings["learning_rate"],
        batch_size=settings["batch_size"],
        epochs=settings["epochs"],
        tau_init=settings["tau_init"],
        tau_min=settings["tau_min"],
        tau_step_epochs=settings["tau_step_epochs"],
        validation_fraction=settings["validation_fraction"],
        seed=settings["seed"],
    )
    model.fit(table)
    io.save_codebook(out_dir / "codebook.txt", model.codebook_)
    io.write_loss_log(
        out_dir / "training_log.csv",
        model.history_,
        ["epoch", "train_loss", "val_loss", "tau"],
    )
    print(
        f"wrote {out_dir / 'codebook.txt'}: best validation loss "
        f"{model.best_validation_loss_:.6f} over {len(model.history_)} epochs"
    )
    return 0


def cmd_train_e2e(args: argparse.Namespace) -> int:
    settings = resolve_settings(args, TRAIN_E2E_DEFAULTS)
    _require(settings, "edges")
    _check_input_path(settings, "edges")
    out_dir = _out_dir(args)
    _print_header("train-e2e", settings, out_dir)
    graph = load_edge_list(settings["edges"])
    holdout = settings["linkpred_holdout"]
    if holdout is not None:
        split = split_edges(graph, holdout, seed=settings["seed"])
        io.save_split(out_dir / "split.txt", split.positives, split.negatives)
        train_graph = split.train_graph
        print(
            f"holdout {holdout}: kept {train_graph.n_edges} edges, "
            f"removed {len(split.positives)}"
        )
    else:
        train_graph = graph
    model = GraphEmbedder(
        n_basis=settings["n_basis"],
        code_len=settings["code_len"],
        dim=settings["dim"],
        gcn_layers=settings["gcn_layers"],
        hidden_width=settings["hidden_width"],
        recon_weight=settings["recon_weight"],
        flavor=settings["flavor"],
        block_size=_kd_block_size(settings),
        learning_rate=settings["learning_rate"],
        batch_size=settings["batch_size"],
        epochs=settings["epochs"],
        tau_init=settings["tau_init"],
        tau_min=settings["tau_min"],
        tau_step_epochs=settings["tau_step_epochs"],
        seed=settings["seed"],
    )
    model.fit(train_graph)
    io.save_codebook(out_dir / "codebook.txt", model.codebook_)
    io.save_embeddings(out_dir / "embeddings.txt", model.embedding_)
    io.write_loss_log(
        out_dir / "training_log.csv",
        model.history_,
        ["epoch", "topology_loss", "reconstruction_loss", "combined_loss", "tau"],
    )
    best = model.best_training_loss_
    print(
        f"wrote {out_dir / 'codebook.txt'}: best training loss "
        f"{best if best is None else f'{best:.6f}'} over {len(model.history_)} epochs"
    )
    return 0


def cmd_eval(args: argparse.Namespace) -> int:
    settings = resolve_settings(args, EVAL_DEFAULTS)
    if settings["embeddings"] is None and settings["codebook"] is None:
        raise ValueError("need --embeddings or --codebook")
    for key in ("embeddings", "codebook", "labels", "split"):
        _check_input_path(settings, key)
    out_dir = _out_dir(args)
    _print_header("eval", settings, out_dir)

    memory = evaluate.MemoryModel(settings["float_bytes"], settings["int_bytes"])
    report: dict = {}
    codebook = None
    if settings["codebook"] is not None:
        codebook = io.load_codebook(settings["codebook"])
        features = decode_codebook(codebook)
    else:
        features = io.load_embeddings(settings["embeddings"])
    n_nodes, dim = features.shape

    base = evaluate.one_hot_cost(n_nodes, dim, memory)
    report["one_hot_params"] = base.params
    report["one_hot_bytes"] = base.bytes
    report["one_hot_param_millions"] = base.param_millions()
    report["one_hot_megabytes"] = base.megabytes()
    if codebook is not None:
        if codebook.flavor == KD:
            cost = evaluate.kd_cost(codebook.block_size, codebook.code_len, dim, n_nodes, memory)
        else:
            cost = evaluate.multi_hot_cost(
                codebook.n_basis, codebook.code_len, dim, n_nodes, memory
            )
        ratios = evaluate.compression_ratios(base, cost)
        report["param_count"] = cost.params
        report["byte_cost"] = cost.bytes
        report["param_millions"] = cost.param_millions()
        report["megabytes"] = cost.megabytes()
        report["compression_ratio_params"] = ratios["params"]
        report["compression_ratio_bytes"] = ratios["bytes"]
        report["table_ratio_params"] = ratios["params_display"]
        report["table_ratio_bytes"] = ratios["bytes_display"]
        counts = evaluate.basis_utilization(codebook)
        with open(out_dir / "utilization.csv", "w", encoding="utf-8") as fh:
            fh.write("basis_index,count\n")
            for i, c in enumerate(counts):
                fh.write(f"{i},{int(c)}\n")
        report["unused_basis_fraction"] = float((counts == 0).mean())
    else:
        report["param_count"] = base.params
        report["byte_cost"] = base.bytes

    if settings["labels"] is not None:
        labels = load_labels(settings["labels"], n_nodes=n_nodes)
        result = evaluate.run_classification_eval(
            features,
            labels,
            train_fraction=settings["train_fraction"],
            runs=settings["runs"],
            seed=settings["seed"],
            n_labels=settings["n_labels"],
        )
        report["micro_f1"] = result.micro_f1
        report["macro_f1"] = result.macro_f1
        report["runs"] = result.runs

    if settings["split"] is not None:
        positives, negatives = io.load_split(settings["split"])
        report["auc"] = evaluate.run_linkpred_eval(features, positives, negatives)

    io.write_report(out_dir / "report.csv", report)
    width = max(len(k) for k in report)
    for key, value in report.items():
        print(f"{key:<{width}}  {value}")
    print(f"wrote {out_dir / 'report.csv'}")
    return 0


def cmd_report_memory(args: argparse.Namespace) -> int:
    settings = resolve_settings(args, REPORT_MEMORY_DEFAULTS)
    _require(settings, "nodes")
    out_dir = _out_dir(args)
    _print_header("report-memory", settings, out_dir)
    memory = evaluate.MemoryModel(settings["float_bytes"], settings["int_bytes"])
    n, dim = settings["nodes"], settings["dim"]
    base = evaluate.one_hot_cost(n, dim, memory)
    rows = [("one_hot", base)]
    compressed = evaluate.multi_hot_cost(settings["n_basis"], settings["code_len"], dim, n, memory)
    rows.append((f"multi_hot(s={settings['n_basis']},t={settings['code_len']})", compressed))
    if settings["kd_k"] is not None and settings["kd_d"] is not None:
        rows.append(
            (
                f"kd(K={settings['kd_k']},D={settings['kd_d']})",
                evaluate.kd_cost(settings["kd_k"], settings["kd_d"], dim, n, memory),
            )
        )
    print(f"{'layout':<28} {'params':>14} {'params(M)':>10} {'bytes':>16} {'MB':>10}")
    for name, cost in rows:
        print(
            f"{name:<28} {cost.params:>14} {str(cost.param_millions()):>10} "
            f"{cost.bytes:>16} {str(cost.megabytes()):>10}"
        )
    ratios = evaluate.compression_ratios(base, compressed)
    print(
        f"ratios vs one_hot: params {ratios['params']:.2f} "
        f"(table convention {ratios['params_display']:.2f}), "
        f"bytes {ratios['bytes']:.2f} (table convention {ratios['bytes_display']:.2f})"
    )
    return 0


COMMANDS = {
    "pretrain": cmd_pretrain,
    "compress": cmd_compress,
    "train-e2e": cmd_train_e2e,
    "eval": cmd_eval,
    "report-memory": cmd_report_memory,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
