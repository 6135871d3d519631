"""Skip-gram pretrainer: random-walk corpus plus negative-sampling updates,
producing the dense per-node embedding table that the compressor consumes."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.exceptions import NotFittedError

from .graph import Graph, random_walks
from .ops import logistic, softplus


def walk_pairs(walks, window: int) -> np.ndarray:
    """(center, context) pairs within `window` positions in each walk."""
    if window < 1:
        raise ValueError(f"window must be >= 1, got {window}")
    pairs = []
    for walk in walks:
        for i, center in enumerate(walk):
            lo = max(0, i - window)
            hi = min(len(walk), i + window + 1)
            for j in range(lo, hi):
                if j != i:
                    pairs.append((center, walk[j]))
    return np.array(pairs, dtype=np.int64).reshape(-1, 2)


def batch_loss_grads(centers_table, contexts_table, centers, contexts, negatives):
    """Mean skip-gram negative-sampling loss over a pair batch and its
    gradients w.r.t. both tables.

    Per pair: -ln sigma(v_c . u_x) - sum_n ln sigma(-v_c . u_n), with v rows
    from the center table and u rows from the context table.
    """
    n_pairs = centers.shape[0]
    v = centers_table[centers]  # (B, d)
    u = contexts_table[contexts]  # (B, d)
    un = contexts_table[negatives]  # (B, k, d)
    pos_score = (v * u).sum(axis=1)
    neg_score = np.einsum("bkd,bd->bk", un, v)
    loss = (softplus(-pos_score).sum() + softplus(neg_score).sum()) / n_pairs

    coeff_pos = (logistic(pos_score) - 1.0) / n_pairs  # (B,)
    coeff_neg = logistic(neg_score) / n_pairs  # (B, k)
    d_v = coeff_pos[:, None] * u + np.einsum("bk,bkd->bd", coeff_neg, un)
    d_centers = np.zeros_like(centers_table)
    d_contexts = np.zeros_like(contexts_table)
    np.add.at(d_centers, centers, d_v)
    np.add.at(d_contexts, contexts, coeff_pos[:, None] * v)
    np.add.at(d_contexts, negatives, coeff_neg[:, :, None] * v[:, None, :])
    return float(loss), d_centers, d_contexts


class SkipGramEmbedding(BaseEstimator):
    """Skip-gram with negative sampling over uniform random walks.

    Trains two tables (center and context side) with SGD over (center,
    context) pairs harvested from the walk corpus; negatives are drawn
    uniformly over all nodes. The center table is exported as the embedding.

    Args:
        dim: Embedding width.
        walks_per_node: Walk starts per node.
        walk_length: Nodes per walk.
        window: Context window radius within a walk.
        negatives: Negative samples per positive pair.
        epochs: Passes over the harvested pair set.
        learning_rate: Constant per-pair SGD step size.
        batch_pairs: Upper bound on pairs per aggregated update; chunks never
            exceed the node count.
        seed: Seed controlling walks, init and negative draws.
    """

    def __init__(
        self,
        dim: int = 32,
        walks_per_node: int = 10,
        walk_length: int = 40,
        window: int = 5,
        negatives: int = 5,
        epochs: int = 5,
        learning_rate: float = 0.025,
        batch_pairs: int = 1024,
        seed: int = 0,
    ):
        self.dim = dim
        self.walks_per_node = walks_per_node
        self.walk_length = walk_length
        self.window = window
        self.negatives = negatives
        self.epochs = epochs
        self.learning_rate = learning_rate
        self.batch_pairs = batch_pairs
        self.seed = seed

    def fit(self, graph: Graph, y=None) -> "SkipGramEmbedding":
        if self.dim < 2:
            raise ValueError(f"dim must be >= 2, got {self.dim}")
        walk_seed, init_seed, train_seed = np.random.SeedSequence(self.seed).spawn(3)
        walks = random_walks(graph, self.walks_per_node, self.walk_length, seed=walk_seed)
        pairs = walk_pairs(walks, self.window)
        if pairs.size == 0:
            raise ValueError("no training pairs: the graph has no edges")

        init_rng = np.random.default_rng(init_seed)
        n = graph.n_nodes
        centers = init_rng.uniform(-0.5 / self.dim, 0.5 / self.dim, size=(n, self.dim))
        contexts = np.zeros((n, self.dim))

        rng = np.random.default_rng(train_seed)
        # cap chunks at one pair per node so the summed update stays close to
        # sequential per-pair descent even on very small graphs
        chunk = max(1, min(self.batch_pairs, n))
        for _ in range(self.epochs):
            order = rng.permutation(pairs.shape[0])
            for start in range(0, order.size, chunk):
                batch = pairs[order[start : start + chunk]]
                negs = rng.integers(0, n, size=(batch.shape[0], self.negatives))
                _, d_centers, d_contexts = batch_loss_grads(
                    centers, contexts, batch[:, 0], batch[:, 1], negs
                )
                # batch_loss_grads averages over the chunk; undo that so the
                # step size stays a per-pair rate like classic skip-gram SGD
                scale = self.learning_rate * batch.shape[0]
                centers -= scale * d_centers
                contexts -= scale * d_contexts

        self.embedding_ = centers
        self.context_embedding_ = contexts
        self.n_nodes_ = n
        return self

    def fit_transform(self, graph: Graph, y=None) -> np.ndarray:
        return self.fit(graph).embedding_

    def transform(self, node_ids) -> np.ndarray:
        if not hasattr(self, "embedding_"):
            raise NotFittedError("SkipGramEmbedding is not fitted yet")
        return self.embedding_[np.asarray(node_ids, dtype=np.int64)]
