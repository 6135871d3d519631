"""Compress a pre-learned embedding table into a shared-basis codebook.

The model is an autoencoder: a tanh MLP encodes each input row to a latent
vector, the compressor head relaxes the latent into soft basis selections,
and the decoder sums the selected basis rows. Training minimizes the mean
squared reconstruction error; the epoch snapshot with the lowest validation
loss is exported as hard integer codes.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.exceptions import NotFittedError

from .codebook import (
    Codebook,
    CompressorParams,
    compressor_backward,
    compressor_forward,
    compute_logits,
    hard_codes,
    init_compressor,
    tau_schedule,
)
from .ops import (
    AdamState,
    adam_update,
    affine,
    check_matrix,
    glorot_uniform,
    layer_widths,
    mse_grad,
    mse_loss,
    sample_standard_gumbel,
    tanh,
    tanh_grad,
)


@dataclass
class DenseLayer:
    weight: np.ndarray
    bias: np.ndarray


def init_encoder(rng: np.random.Generator, dim_in: int, widths) -> list[DenseLayer]:
    layers = []
    fan_in = dim_in
    for width in widths:
        layers.append(
            DenseLayer(weight=glorot_uniform(rng, (fan_in, width)), bias=np.zeros(width))
        )
        fan_in = width
    return layers


def mlp_forward(x: np.ndarray, layers) -> tuple[np.ndarray, list]:
    """Stacked affine + tanh layers; returns the top activation and caches."""
    out = np.atleast_2d(np.asarray(x, dtype=np.float64))
    caches = []
    for layer in layers:
        inp = out
        out = tanh(affine(inp, layer.weight, layer.bias))
        caches.append((inp, out))
    return out, caches


def encode_latent(x: np.ndarray, layers) -> np.ndarray:
    return mlp_forward(x, layers)[0]


def mlp_backward(layers, caches, d_top: np.ndarray):
    """Backprop through the tanh MLP; returns (d_input, [(d_weight, d_bias)])."""
    d_out = d_top
    grads = []
    for layer, (inp, out) in zip(reversed(layers), reversed(caches)):
        d_pre = d_out * tanh_grad(out)
        grads.append((inp.T @ d_pre, d_pre.sum(axis=0)))
        d_out = d_pre @ layer.weight.T
    grads.reverse()
    return d_out, grads


def soft_forward(
    x: np.ndarray,
    encoder,
    comp: CompressorParams,
    tau: float,
    rng: np.random.Generator | None = None,
    noise: np.ndarray | None = None,
):
    """Full soft pass: encode, relax, decode. Returns (x_hat, caches)."""
    latent, enc_caches = mlp_forward(x, encoder)
    x_hat, comp_cache = compressor_forward(latent, comp, tau, rng=rng, noise=noise)
    return x_hat, enc_caches, comp_cache


def reconstruction_loss_and_grads(
    x: np.ndarray, encoder, comp: CompressorParams, tau: float, noise: np.ndarray
):
    """Soft reconstruction loss and gradients for every trainable array.

    `noise` fixes the Gumbel draw so the objective is deterministic, which is
    what both the trainer (one draw per batch) and gradient checks need.
    """
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    x_hat, enc_caches, comp_cache = soft_forward(x, encoder, comp, tau, noise=noise)
    loss = mse_loss(x, x_hat)
    d_xhat = mse_grad(x_hat, x)
    d_latent, comp_grads = compressor_backward(comp_cache, comp, d_xhat, tau)
    _, enc_grads = mlp_backward(encoder, enc_caches, d_latent)
    return loss, enc_grads, comp_grads


class EmbeddingCompressor(BaseEstimator, TransformerMixin):
    """Learn a shared-basis codebook that reconstructs a dense embedding table.

    fit(X) trains on the rows of X; transform(X) returns hard reconstructions
    (sum of the basis rows selected for each input), and encode(X) returns the
    integer codes themselves. The codebook for the fitted table is stored in
    `codebook_`.

    Args:
        n_basis: Number of shared basis vectors (s).
        code_len: Selections per node (t); duplicates are allowed.
        flavor: "multi_hot" (unrestricted selections) or "kd" (selection j is
            confined to the j-th block of `block_size` basis rows).
        block_size: Basis rows per block for the kd flavor; must satisfy
            block_size * code_len == n_basis.
        encoder_layers: Depth of the tanh MLP encoder.
        hidden_width: Encoder latent width; defaults to n_basis // 2.
        learning_rate: Adam step size.
        batch_size: Rows per optimizer step.
        epochs: Passes over the training rows.
        tau_init, tau_min, tau_step_epochs: Temperature schedule; tau drops by
            0.1 every `tau_step_epochs` epochs and never goes below tau_min.
        validation_fraction: Fraction of rows held out from training. After
            each epoch the held-out rows are scored through the noise-free
            soft path and the snapshot with the lowest such loss is exported.
        seed: Controls init, row shuffling and every Gumbel draw.
    """

    def __init__(
        self,
        n_basis: int = 128,
        code_len: int = 8,
        flavor: str = "multi_hot",
        block_size: int | None = None,
        encoder_layers: int = 2,
        hidden_width: int | None = None,
        learning_rate: float = 1e-3,
        batch_size: int = 128,
        epochs: int = 500,
        tau_init: float = 1.0,
        tau_min: float = 0.5,
        tau_step_epochs: int = 100,
        validation_fraction: float = 0.05,
        seed: int = 0,
    ):
        self.n_basis = n_basis
        self.code_len = code_len
        self.flavor = flavor
        self.block_size = block_size
        self.encoder_layers = encoder_layers
        self.hidden_width = hidden_width
        self.learning_rate = learning_rate
        self.batch_size = batch_size
        self.epochs = epochs
        self.tau_init = tau_init
        self.tau_min = tau_min
        self.tau_step_epochs = tau_step_epochs
        self.validation_fraction = validation_fraction
        self.seed = seed

    def _validate(self, dim: int) -> None:
        if self.epochs < 0 or self.batch_size < 1 or self.encoder_layers < 1:
            raise ValueError("epochs must be >= 0; batch_size and encoder_layers >= 1")
        if self.learning_rate <= 0:
            raise ValueError(f"learning_rate must be positive, got {self.learning_rate}")
        if not 0.0 <= self.validation_fraction < 1.0:
            raise ValueError(
                f"validation_fraction must be in [0, 1), got {self.validation_fraction}"
            )
        if not 0 < self.tau_min <= self.tau_init:
            raise ValueError(
                f"need 0 < tau_min <= tau_init, got {self.tau_min}, {self.tau_init}"
            )
        if self.tau_step_epochs < 1:
            raise ValueError(f"tau_step_epochs must be >= 1, got {self.tau_step_epochs}")

    def fit(self, X, y=None) -> "EmbeddingCompressor":
        X = check_matrix(X)
        if X.shape[0] == 0:
            raise ValueError("cannot fit on an empty table")
        n, dim = X.shape
        self._validate(dim)

        rng = np.random.default_rng(self.seed)
        latent_dim = self.hidden_width if self.hidden_width else max(1, self.n_basis // 2)
        widths = layer_widths(dim, latent_dim, self.encoder_layers, hidden=latent_dim)
        encoder = init_encoder(rng, dim, widths)
        comp = init_compressor(
            rng, latent_dim, self.n_basis, self.code_len, dim,
            flavor=self.flavor, block_size=self.block_size,
        )

        perm = rng.permutation(n)
        n_val = int(self.validation_fraction * n)
        val_idx = perm[:n_val]
        train_idx = perm[n_val:]
        # with no held-out rows the training rows double as the monitor set
        monitor_idx = val_idx if n_val > 0 else np.arange(n)

        params = [l.weight for l in encoder] + [l.bias for l in encoder]
        params += [comp.weight, comp.bias, comp.basis]
        states = [AdamState(learning_rate=self.learning_rate) for _ in params]

        # validation runs the soft path without noise (the mode of each
        # categorical), so checkpoint selection is deterministic
        zero_noise = np.zeros((monitor_idx.size, self.code_len, self.n_basis))

        def validation_loss(tau: float) -> float:
            x_hat, _, _ = soft_forward(X[monitor_idx], encoder, comp, tau, noise=zero_noise)
            return mse_loss(X[monitor_idx], x_hat)

        def snapshot():
            return [p.copy() for p in params]

        comp.tau = tau_schedule(0, self.tau_init, self.tau_min, self.tau_step_epochs)
        best_val = validation_loss(comp.tau)
        best_params = snapshot()
        history = []

        for epoch in range(self.epochs):
            tau = tau_schedule(epoch, self.tau_init, self.tau_min, self.tau_step_epochs)
            comp.tau = tau
            order = rng.permutation(train_idx)
            batch_losses = []
            for start in range(0, order.size, self.batch_size):
                batch = order[start : start + self.batch_size]
                noise = sample_standard_gumbel(
                    (batch.size, self.code_len, self.n_basis), rng
                )
                loss, enc_grads, comp_grads = reconstruction_loss_and_grads(
                    X[batch], encoder, comp, tau, noise
                )
                grads = [g for g, _ in enc_grads] + [g for _, g in enc_grads]
                grads += [comp_grads["weight"], comp_grads["bias"], comp_grads["basis"]]
                for param, grad, state in zip(params, grads, states):
                    adam_update(param, grad, state)
                batch_losses.append(loss)
            val_loss = validation_loss(tau)
            history.append(
                {
                    "epoch": epoch,
                    "train_loss": float(np.mean(batch_losses)) if batch_losses else float("nan"),
                    "val_loss": val_loss,
                    "tau": tau,
                }
            )
            if val_loss < best_val:
                best_val = val_loss
                best_params = snapshot()

        for param, saved in zip(params, best_params):
            param[...] = saved

        self.encoder_ = encoder
        self.compressor_ = comp
        self.history_ = history
        self.best_validation_loss_ = best_val
        self.n_features_in_ = dim
        self.latent_dim_ = latent_dim
        self.codebook_ = Codebook(
            basis=comp.basis.copy(),
            codes=self.encode(X),
            flavor=self.flavor,
            block_size=self.block_size if self.flavor == "kd" else None,
        )
        return self

    def _check_fitted_input(self, X) -> np.ndarray:
        if not hasattr(self, "compressor_"):
            raise NotFittedError("EmbeddingCompressor is not fitted yet")
        X = check_matrix(X)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(
                f"X has {X.shape[1]} columns, expected {self.n_features_in_}"
            )
        return X

    def encode(self, X) -> np.ndarray:
        """Integer codes (n_rows, code_len) via the deterministic hard path."""
        X = self._check_fitted_input(X)
        latent = encode_latent(X, self.encoder_)
        weights = compute_logits(latent, self.compressor_)
        return hard_codes(weights, block_mask=self.compressor_.block_mask())

    def transform(self, X) -> np.ndarray:
        """Hard reconstructions: sum of the basis rows selected for each row."""
        codes = self.encode(X)
        return self.compressor_.basis[codes].sum(axis=1)
