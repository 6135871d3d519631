"""End-to-end compact embeddings from graph topology.

A GCN over the normalized adjacency produces per-node latents from a
trainable input matrix; the compressor relaxes each latent into basis
selections and the decoder sums them into the compact embedding. Training
combines a pairwise topology loss (a neighbor should score above a
non-neighbor) with the latent reconstruction loss.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.exceptions import NotFittedError

from .codebook import (
    Codebook,
    CompressorParams,
    compressor_backward,
    compressor_forward,
    compute_logits,
    decode_codebook,
    hard_codes,
    init_compressor,
    tau_schedule,
)
from .graph import Graph, normalize_adjacency
from .ops import (
    AdamState,
    adam_update,
    glorot_uniform,
    layer_widths,
    logistic,
    sample_standard_gumbel,
    softplus,
    tanh,
    tanh_grad,
)


@dataclass
class Triplet:
    """Anchor node with one sampled neighbor and one sampled non-neighbor."""

    anchor: int
    positive: int
    negative: int


def sample_triplets(g: Graph, anchors, rng: np.random.Generator):
    """One uniform neighbor and one uniform non-neighbor per anchor.

    Anchors with no neighbors or no non-neighbors cannot form a triplet and
    are skipped; the skip count is returned alongside the triplets.
    """
    triplets = []
    skipped = 0
    for anchor in anchors:
        anchor = int(anchor)
        nbrs = g.neighbors(anchor)
        if nbrs.size == 0 or nbrs.size >= g.n_nodes - 1:
            skipped += 1
            continue
        positive = int(nbrs[rng.integers(nbrs.size)])
        negative = None
        for _ in range(100):
            cand = int(rng.integers(g.n_nodes))
            if cand != anchor and not g.has_edge(anchor, cand):
                negative = cand
                break
        if negative is None:
            # dense neighborhoods: fall back to enumerating the complement
            blocked = set(nbrs.tolist()) | {anchor}
            pool = np.array([v for v in range(g.n_nodes) if v not in blocked])
            negative = int(pool[rng.integers(pool.size)])
        triplets.append(Triplet(anchor, positive, negative))
    return triplets, skipped


def loss_topology(ghat_i, ghat_pos, ghat_neg) -> float:
    """-ln sigma(ghat_i . ghat_pos - ghat_i . ghat_neg).

    The logistic wrapper keeps the pairwise objective defined for any sign of
    the similarity difference while still rewarding a larger gap.
    """
    ghat_i = np.asarray(ghat_i, dtype=np.float64)
    diff = float(ghat_i @ ghat_pos - ghat_i @ ghat_neg)
    return float(softplus(-diff))


def loss_topology_grads(ghat_i, ghat_pos, ghat_neg):
    """Gradients of loss_topology w.r.t. all three vectors."""
    ghat_i = np.asarray(ghat_i, dtype=np.float64)
    ghat_pos = np.asarray(ghat_pos, dtype=np.float64)
    ghat_neg = np.asarray(ghat_neg, dtype=np.float64)
    diff = float(ghat_i @ ghat_pos - ghat_i @ ghat_neg)
    coeff = float(logistic(diff)) - 1.0
    return coeff * (ghat_pos - ghat_neg), coeff * ghat_i, -coeff * ghat_i


def gcn_forward(a_hat, g0: np.ndarray, weights):
    """Stacked propagation layers: tanh(a_hat @ G @ W) per layer."""
    out = g0
    caches = []
    for w in weights:
        mixed = a_hat @ out
        out = tanh(mixed @ w)
        caches.append((mixed, out))
    return out, caches


def gcn_backward(a_hat, caches, weights, d_top: np.ndarray):
    """Backprop through the GCN; a_hat is symmetric so no transpose is needed."""
    d_out = d_top
    d_weights = []
    for w, (mixed, out) in zip(reversed(weights), reversed(caches)):
        d_pre = d_out * tanh_grad(out)
        d_weights.append(mixed.T @ d_pre)
        d_out = a_hat @ (d_pre @ w.T)
    d_weights.reverse()
    return d_out, d_weights


def combined_loss_and_grads(
    a_hat,
    g0: np.ndarray,
    weights,
    comp: CompressorParams,
    triplets,
    tau: float,
    noise: np.ndarray,
    recon_weight: float,
    recon_target: np.ndarray | None = None,
):
    """Topology + weighted reconstruction loss over a triplet batch, with
    gradients for g0, every GCN weight and the compressor arrays.

    `noise` holds one Gumbel draw per involved node (sorted unique order over
    all triplet members). The reconstruction term's latent target is treated
    as a constant (stop-gradient): the compressor chases the encoder output,
    never the reverse. Letting gradients flow into the target makes latent
    collapse the global optimum (zero reconstruction error, all nodes on one
    code). Pass `recon_target` to pin the per-anchor target rows explicitly,
    e.g. for finite-difference checks of this objective.
    """
    if recon_weight < 0:
        raise ValueError(f"recon_weight must be >= 0, got {recon_weight}")
    if not triplets:
        raise ValueError("no triplets to train on")
    latent, gcn_caches = gcn_forward(a_hat, g0, weights)

    anchors = np.array([t.anchor for t in triplets], dtype=np.int64)
    positives = np.array([t.positive for t in triplets], dtype=np.int64)
    negatives = np.array([t.negative for t in triplets], dtype=np.int64)
    involved = np.unique(np.concatenate([anchors, positives, negatives]))
    pos_of = {node: i for i, node in enumerate(involved.tolist())}
    ia = np.array([pos_of[a] for a in anchors.tolist()])
    ip = np.array([pos_of[p] for p in positives.tolist()])
    ineg = np.array([pos_of[q] for q in negatives.tolist()])

    ghat, comp_cache = compressor_forward(latent[involved], comp, tau, noise=noise)
    n_trip = len(triplets)

    diff = (ghat[ia] * ghat[ip]).sum(axis=1) - (ghat[ia] * ghat[ineg]).sum(axis=1)
    topo = float(softplus(-diff).sum() / n_trip)
    target = latent[anchors] if recon_target is None else recon_target
    resid = target - ghat[ia]
    recon = float((resid ** 2).sum() / n_trip)
    total = topo + recon_weight * recon

    coeff = (logistic(diff) - 1.0) / n_trip  # (n_trip,)
    d_ghat = np.zeros_like(ghat)
    np.add.at(d_ghat, ia, coeff[:, None] * (ghat[ip] - ghat[ineg]))
    np.add.at(d_ghat, ip, coeff[:, None] * ghat[ia])
    np.add.at(d_ghat, ineg, -coeff[:, None] * ghat[ia])
    np.add.at(d_ghat, ia, -2.0 * recon_weight * resid / n_trip)

    d_latent_involved, comp_grads = compressor_backward(comp_cache, comp, d_ghat, tau)
    d_latent_all = np.zeros_like(latent)
    np.add.at(d_latent_all, involved, d_latent_involved)
    d_g0, d_weights = gcn_backward(a_hat, gcn_caches, weights, d_latent_all)
    return total, topo, recon, d_g0, d_weights, comp_grads, involved


class GraphEmbedder(BaseEstimator):
    """Learn compact multi-hot embeddings directly from an undirected graph.

    fit(graph) trains the GCN, compressor and basis jointly; the epoch
    snapshot with the lowest training loss is kept. The exported artifacts
    are `codebook_` (basis + integer codes) and `embedding_`, the decoded
    rows of that codebook.

    Args:
        n_basis: Number of shared basis vectors (s).
        code_len: Selections per node (t).
        dim: Width of the GCN output, the compressor latent and the final
            embedding.
        gcn_layers: Propagation depth.
        hidden_width: Width of the intermediate GCN layer(s).
        input_dim: Width of the trainable input matrix; defaults to `dim`.
        recon_weight: Weight of the latent reconstruction loss added to the
            pairwise topology loss.
        flavor, block_size: Codebook flavor, as in EmbeddingCompressor.
        learning_rate, batch_size, epochs: Adam step size, anchors per step,
            and training passes.
        tau_init, tau_min, tau_step_epochs: Temperature schedule.
        seed: Controls init, shuffling, triplet sampling and Gumbel draws.
    """

    def __init__(
        self,
        n_basis: int = 128,
        code_len: int = 8,
        dim: int = 256,
        gcn_layers: int = 2,
        hidden_width: int = 1000,
        input_dim: int | None = None,
        recon_weight: float = 0.3,
        flavor: str = "multi_hot",
        block_size: int | None = None,
        learning_rate: float = 1e-3,
        batch_size: int = 128,
        epochs: int = 500,
        tau_init: float = 1.0,
        tau_min: float = 0.5,
        tau_step_epochs: int = 100,
        seed: int = 0,
    ):
        self.n_basis = n_basis
        self.code_len = code_len
        self.dim = dim
        self.gcn_layers = gcn_layers
        self.hidden_width = hidden_width
        self.input_dim = input_dim
        self.recon_weight = recon_weight
        self.flavor = flavor
        self.block_size = block_size
        self.learning_rate = learning_rate
        self.batch_size = batch_size
        self.epochs = epochs
        self.tau_init = tau_init
        self.tau_min = tau_min
        self.tau_step_epochs = tau_step_epochs
        self.seed = seed

    def _validate(self) -> None:
        if self.epochs < 0 or self.batch_size < 1 or self.gcn_layers < 1:
            raise ValueError("epochs must be >= 0; batch_size and gcn_layers >= 1")
        if self.dim < 1:
            raise ValueError(f"dim must be >= 1, got {self.dim}")
        if self.learning_rate <= 0:
            raise ValueError(f"learning_rate must be positive, got {self.learning_rate}")
        if self.recon_weight < 0:
            raise ValueError(f"recon_weight must be >= 0, got {self.recon_weight}")
        if not 0 < self.tau_min <= self.tau_init:
            raise ValueError(f"need 0 < tau_min <= tau_init, got {self.tau_min}, {self.tau_init}")
        if self.tau_step_epochs < 1:
            raise ValueError(f"tau_step_epochs must be >= 1, got {self.tau_step_epochs}")

    def fit(self, graph: Graph, y=None) -> "GraphEmbedder":
        self._validate()
        if graph.n_edges < 1:
            raise ValueError("graph must have at least one edge")
        rng = np.random.default_rng(self.seed)
        a_hat = normalize_adjacency(graph)
        n = graph.n_nodes
        d0 = self.input_dim if self.input_dim else self.dim
        widths = layer_widths(d0, self.dim, self.gcn_layers, hidden=self.hidden_width)

        g0 = glorot_uniform(rng, (n, d0))
        weights = []
        fan_in = d0
        for width in widths:
            weights.append(glorot_uniform(rng, (fan_in, width)))
            fan_in = width
        comp = init_compressor(
            rng, self.dim, self.n_basis, self.code_len, self.dim,
            flavor=self.flavor, block_size=self.block_size,
        )

        params = [g0] + weights + [comp.weight, comp.bias, comp.basis]
        states = [AdamState(learning_rate=self.learning_rate) for _ in params]

        def snapshot():
            return [p.copy() for p in params]

        best_loss = np.inf
        best_params = snapshot()
        history = []
        total_skipped = 0

        for epoch in range(self.epochs):
            tau = tau_schedule(epoch, self.tau_init, self.tau_min, self.tau_step_epochs)
            comp.tau = tau
            order = rng.permutation(n)
            epoch_total, epoch_topo, epoch_recon, n_batches = 0.0, 0.0, 0.0, 0
            for start in range(0, n, self.batch_size):
                batch = order[start : start + self.batch_size]
                triplets, skipped = sample_triplets(graph, batch, rng)
                total_skipped += skipped
                if not triplets:
                    continue
                involved = np.unique(
                    np.array(
                        [[t.anchor, t.positive, t.negative] for t in triplets]
                    ).ravel()
                )
                noise = sample_standard_gumbel(
                    (involved.size, self.code_len, self.n_basis), rng
                )
                total, topo, recon, d_g0, d_weights, comp_grads, _ = combined_loss_and_grads(
                    a_hat, g0, weights, comp, triplets, tau, noise, self.recon_weight
                )
                grads = [d_g0] + d_weights
                grads += [comp_grads["weight"], comp_grads["bias"], comp_grads["basis"]]
                for param, grad, state in zip(params, grads, states):
                    adam_update(param, grad, state)
                epoch_total += total
                epoch_topo += topo
                epoch_recon += recon
                n_batches += 1
            if n_batches == 0:
                raise ValueError("no usable triplets: every anchor was skipped")
            epoch_total /= n_batches
            history.append(
                {
                    "epoch": epoch,
                    "topology_loss": epoch_topo / n_batches,
                    "reconstruction_loss": epoch_recon / n_batches,
                    "combined_loss": epoch_total,
                    "tau": tau,
                }
            )
            if epoch_total < best_loss:
                best_loss = epoch_total
                best_params = snapshot()

        for param, saved in zip(params, best_params):
            param[...] = saved

        latent, _ = gcn_forward(a_hat, g0, weights)
        codes = hard_codes(compute_logits(latent, comp), block_mask=comp.block_mask())
        self.codebook_ = Codebook(
            basis=comp.basis.copy(),
            codes=codes,
            flavor=self.flavor,
            block_size=self.block_size if self.flavor == "kd" else None,
        )
        self.embedding_ = decode_codebook(self.codebook_)
        self.g0_ = g0
        self.gcn_weights_ = weights
        self.compressor_ = comp
        self.a_hat_ = a_hat
        self.history_ = history
        self.best_training_loss_ = best_loss if history else None
        self.skipped_anchors_ = total_skipped
        return self

    def fit_transform(self, graph: Graph, y=None) -> np.ndarray:
        return self.fit(graph).embedding_

    def transform(self, node_ids) -> np.ndarray:
        if not hasattr(self, "embedding_"):
            raise NotFittedError("GraphEmbedder is not fitted yet")
        return self.embedding_[np.asarray(node_ids, dtype=np.int64)]
