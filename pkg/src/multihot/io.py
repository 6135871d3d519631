"""Text persistence formats.

Embedding file: a header line "n_nodes dim", then one line of `dim` decimal
reals per node, printed with 17 significant digits so float64 round-trips are
exact.

Codebook file: a header line "n_basis code_len dim flavor" (the kd flavor
appends "block_size n_blocks"), then n_basis basis lines of `dim` reals, then
one line of `code_len` zero-based integers per node.

Split file: one "u v label" line per pair, label 1 for held-out edges and 0
for sampled non-edges. Loss logs and reports are comma-separated text.
"""

from __future__ import annotations

import csv

import numpy as np

from .codebook import KD, MULTI_HOT, Codebook


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def save_embeddings(path, table: np.ndarray) -> None:
    table = np.asarray(table, dtype=np.float64)
    if table.ndim != 2:
        raise ValueError(f"embedding table must be 2-D, got shape {table.shape}")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"{table.shape[0]} {table.shape[1]}\n")
        for row in table:
            fh.write(" ".join(_fmt(v) for v in row) + "\n")


def load_embeddings(path) -> np.ndarray:
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().split()
        if len(header) != 2:
            raise ValueError(f"{path}: expected header 'n_nodes dim', found {header!r}")
        n_nodes, dim = int(header[0]), int(header[1])
        rows = []
        for lineno, line in enumerate(fh, 2):
            if not line.strip():
                continue
            values = line.split()
            if len(values) != dim:
                raise ValueError(
                    f"{path}:{lineno}: expected {dim} values, found {len(values)}"
                )
            rows.append([float(v) for v in values])
    if len(rows) != n_nodes:
        raise ValueError(f"{path}: header promises {n_nodes} rows, found {len(rows)}")
    return np.array(rows, dtype=np.float64).reshape(n_nodes, dim)


def save_codebook(path, cb: Codebook) -> None:
    cb.validate()
    with open(path, "w", encoding="utf-8") as fh:
        header = f"{cb.n_basis} {cb.code_len} {cb.dim} {cb.flavor}"
        if cb.flavor == KD:
            header += f" {cb.block_size} {cb.code_len}"
        fh.write(header + "\n")
        for row in cb.basis:
            fh.write(" ".join(_fmt(v) for v in row) + "\n")
        for codes in cb.codes:
            fh.write(" ".join(str(int(c)) for c in codes) + "\n")


def load_codebook(path) -> Codebook:
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().split()
        if len(header) < 4:
            raise ValueError(f"{path}: malformed codebook header {header!r}")
        n_basis, code_len, dim = int(header[0]), int(header[1]), int(header[2])
        flavor = header[3]
        block_size = None
        if flavor == KD:
            if len(header) != 6:
                raise ValueError(f"{path}: kd header needs block sizes, found {header!r}")
            block_size = int(header[4])
            if int(header[5]) != code_len:
                raise ValueError(
                    f"{path}: kd block count {header[5]} != code length {code_len}"
                )
        elif flavor != MULTI_HOT or len(header) != 4:
            raise ValueError(f"{path}: malformed codebook header {header!r}")
        lines = [line.split() for line in fh if line.strip()]
    if len(lines) < n_basis:
        raise ValueError(
            f"{path}: expected {n_basis} basis rows, found only {len(lines)}"
        )
    basis_rows, code_rows = lines[:n_basis], lines[n_basis:]
    for i, row in enumerate(basis_rows):
        if len(row) != dim:
            raise ValueError(f"{path}: basis row {i} has {len(row)} values, expected {dim}")
    for i, row in enumerate(code_rows):
        if len(row) != code_len:
            raise ValueError(
                f"{path}: code row {i} has {len(row)} values, expected {code_len}"
            )
    cb = Codebook(
        basis=np.array([[float(v) for v in row] for row in basis_rows]).reshape(n_basis, dim),
        codes=np.array([[int(v) for v in row] for row in code_rows], dtype=np.int64).reshape(
            len(code_rows), code_len
        ),
        flavor=flavor,
        block_size=block_size,
    )
    cb.validate()
    return cb


def save_split(path, positives, negatives) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for u, v in positives:
            fh.write(f"{u} {v} 1\n")
        for u, v in negatives:
            fh.write(f"{u} {v} 0\n")


def load_split(path) -> tuple[list[tuple[int, int]], list[tuple[int, int]]]:
    positives, negatives = [], []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            if len(parts) != 3 or parts[2] not in ("0", "1"):
                raise ValueError(f"{path}:{lineno}: expected 'u v 0|1', found {raw.strip()!r}")
            pair = (int(parts[0]), int(parts[1]))
            (positives if parts[2] == "1" else negatives).append(pair)
    return positives, negatives


def save_edge_list(path, graph) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for u, v in graph.edges():
            fh.write(f"{u} {v}\n")


def save_labels(path, labels) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for node, labelset in enumerate(labels):
            for label in sorted(labelset):
                fh.write(f"{node} {label}\n")


def write_loss_log(path, history, fields) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=fields)
        writer.writeheader()
        for row in history:
            writer.writerow({k: row[k] for k in fields})


def read_loss_log(path) -> list[dict]:
    with open(path, "r", encoding="utf-8", newline="") as fh:
        return [
            {k: float(v) for k, v in row.items()} for row in csv.DictReader(fh)
        ]


def write_report(path, values: dict) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["metric", "value"])
        for key, value in values.items():
            writer.writerow([key, value])
