"""Undirected graphs: loading, synthetic block-model generation, adjacency
normalization, edge holdout splits, and uniform random walks."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp


class Graph:
    """Undirected graph over dense integer node ids [0, n_nodes).

    Self-loops are rejected, duplicate edges collapse, and neighbor lists are
    kept sorted. Instances are immutable after construction.
    """

    def __init__(self, n_nodes: int, edges=()):
        n_nodes = int(n_nodes)
        if n_nodes < 0:
            raise ValueError(f"n_nodes must be >= 0, got {n_nodes}")
        pairs = set()
        for u, v in edges:
            u, v = int(u), int(v)
            if u == v:
                raise ValueError(f"self-loop {u}-{v} is not allowed")
            if not (0 <= u < n_nodes and 0 <= v < n_nodes):
                raise ValueError(f"edge ({u}, {v}) out of range for {n_nodes} nodes")
            pairs.add((u, v) if u < v else (v, u))
        adj: list[list[int]] = [[] for _ in range(n_nodes)]
        for u, v in pairs:
            adj[u].append(v)
            adj[v].append(u)
        self.n_nodes = n_nodes
        self.n_edges = len(pairs)
        self._edge_set = frozenset(pairs)
        self._neighbors = [np.array(sorted(a), dtype=np.int64) for a in adj]

    def neighbors(self, u: int) -> np.ndarray:
        return self._neighbors[u]

    def degree(self, u: int) -> int:
        return int(self._neighbors[u].size)

    def has_edge(self, u: int, v: int) -> bool:
        return ((u, v) if u < v else (v, u)) in self._edge_set

    def edges(self) -> list[tuple[int, int]]:
        """All edges as (min, max) pairs in sorted order."""
        return sorted(self._edge_set)

    def __repr__(self):
        return f"Graph(n_nodes={self.n_nodes}, n_edges={self.n_edges})"


@dataclass
class EdgeSplit:
    """Holdout split for link prediction: retained graph, removed edges as
    positives, and an equal number of sampled non-edges as negatives."""

    train_graph: Graph
    positives: list[tuple[int, int]]
    negatives: list[tuple[int, int]]


def load_edge_list(path) -> Graph:
    """Read "u v" lines into a Graph; '#' starts a comment, duplicates collapse.

    Node count is 1 + max id, so ids missing from the file become isolated
    nodes rather than errors.
    """
    pairs = []
    max_id = -1
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            if len(parts) != 2:
                raise ValueError(f"{path}:{lineno}: expected 'u v', found {raw.strip()!r}")
            try:
                u, v = int(parts[0]), int(parts[1])
            except ValueError:
                raise ValueError(f"{path}:{lineno}: non-integer node id in {raw.strip()!r}") from None
            if u < 0 or v < 0:
                raise ValueError(f"{path}:{lineno}: negative node id in {raw.strip()!r}")
            if u == v:
                raise ValueError(f"{path}:{lineno}: self-loop {u} {v}")
            pairs.append((u, v))
            max_id = max(max_id, u, v)
    return Graph(max_id + 1, pairs)


def load_labels(path, n_nodes: int | None = None) -> list[set[int]]:
    """Read "node_id label_id" lines into per-node label sets (multi-label via
    repeated node ids)."""
    entries = []
    max_node = -1
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            if len(parts) != 2:
                raise ValueError(f"{path}:{lineno}: expected 'node label', found {raw.strip()!r}")
            try:
                node, label = int(parts[0]), int(parts[1])
            except ValueError:
                raise ValueError(f"{path}:{lineno}: non-integer entry in {raw.strip()!r}") from None
            if node < 0 or label < 0:
                raise ValueError(f"{path}:{lineno}: negative id in {raw.strip()!r}")
            entries.append((node, label))
            max_node = max(max_node, node)
    if n_nodes is None:
        n_nodes = max_node + 1
    elif max_node >= n_nodes:
        raise ValueError(f"{path}: node id {max_node} >= n_nodes {n_nodes}")
    labels: list[set[int]] = [set() for _ in range(n_nodes)]
    for node, label in entries:
        labels[node].add(label)
    return labels


def generate_sbm(block_sizes, p_in: float, p_out: float, seed=0) -> tuple[Graph, list[set[int]]]:
    """Stochastic block model: intra-block pairs are edges with prob p_in,
    inter-block pairs with prob p_out; node labels are block ids."""
    block_sizes = [int(b) for b in block_sizes]
    if not block_sizes or any(b <= 0 for b in block_sizes):
        raise ValueError(f"block sizes must all be positive, got {block_sizes}")
    for name, p in (("p_in", p_in), ("p_out", p_out)):
        if not 0.0 <= p <= 1.0:
            raise ValueError(f"{name} must be in [0, 1], got {p}")
    rng = np.random.default_rng(seed)
    offsets = np.concatenate([[0], np.cumsum(block_sizes)])
    edges = []
    for a, size_a in enumerate(block_sizes):
        base = offsets[a]
        iu, iv = np.triu_indices(size_a, k=1)
        keep = rng.random(iu.size) < p_in
        edges.extend(zip((base + iu[keep]).tolist(), (base + iv[keep]).tolist()))
        for b in range(a + 1, len(block_sizes)):
            size_b = block_sizes[b]
            mask = rng.random((size_a, size_b)) < p_out
            ru, rv = np.nonzero(mask)
            edges.extend(zip((base + ru).tolist(), (offsets[b] + rv).tolist()))
    labels = [{a} for a, size in enumerate(block_sizes) for _ in range(size)]
    return Graph(int(offsets[-1]), edges), labels


def normalize_adjacency(g: Graph) -> sp.csr_array:
    """Symmetrically normalized adjacency with self-loops:
    D^{-1/2} (A + I) D^{-1/2}, returned as CSR."""
    n = g.n_nodes
    deg = np.array([g.degree(i) + 1 for i in range(n)], dtype=np.float64)
    inv_sqrt = 1.0 / np.sqrt(deg)
    edges = np.array(g.edges(), dtype=np.int64).reshape(-1, 2)
    rows = np.concatenate([edges[:, 0], edges[:, 1], np.arange(n)])
    cols = np.concatenate([edges[:, 1], edges[:, 0], np.arange(n)])
    vals = inv_sqrt[rows] * inv_sqrt[cols]
    return sp.csr_array((vals, (rows, cols)), shape=(n, n))


def split_edges(g: Graph, holdout_fraction: float, seed=0) -> EdgeSplit:
    """Remove floor(fraction * E) edges uniformly and sample as many non-edges.

    Negatives are rejection-sampled uniformly from the non-edges of the
    ORIGINAL graph, without duplicates and without (i, i) pairs.
    """
    if not 0.0 < holdout_fraction < 1.0:
        raise ValueError(f"holdout_fraction must be in (0, 1), got {holdout_fraction}")
    rng = np.random.default_rng(seed)
    edges = g.edges()
    n_hold = int(holdout_fraction * g.n_edges)
    hold_idx = set(rng.choice(g.n_edges, size=n_hold, replace=False).tolist())
    positives = [edges[i] for i in sorted(hold_idx)]
    train_edges = [e for i, e in enumerate(edges) if i not in hold_idx]

    negatives: list[tuple[int, int]] = []
    seen: set[tuple[int, int]] = set()
    attempts = 0
    limit = 100 * max(1, n_hold)
    while len(negatives) < n_hold:
        attempts += 1
        if attempts > limit:
            raise ValueError(
                f"could not sample {n_hold} non-edges after {limit} attempts; "
                "graph is too dense"
            )
        u = int(rng.integers(g.n_nodes))
        v = int(rng.integers(g.n_nodes))
        if u == v:
            continue
        pair = (u, v) if u < v else (v, u)
        if pair in seen or g.has_edge(*pair):
            continue
        seen.add(pair)
        negatives.append(pair)
    return EdgeSplit(Graph(g.n_nodes, train_edges), positives, negatives)


def random_walks(g: Graph, walks_per_node: int, walk_length: int, seed=0) -> list[list[int]]:
    """Uniform random walks, `walks_per_node` starts per node; a walk ends
    early only when it starts at an isolated node."""
    if walk_length < 2:
        raise ValueError(f"walk_length must be >= 2, got {walk_length}")
    rng = np.random.default_rng(seed)
    walks = []
    for node in range(g.n_nodes):
        for _ in range(walks_per_node):
            walk = [node]
            cur = node
            while len(walk) < walk_length:
                nbrs = g.neighbors(cur)
                if nbrs.size == 0:
                    break
                cur = int(nbrs[rng.integers(nbrs.size)])
                walk.append(cur)
            walks.append(walk)
    return walks
