"""Shared-basis codebooks with multi-hot integer codes.

A compressor head maps a latent vector to `code_len` categorical weight
vectors over `n_basis` shared basis rows. During training each weight vector
is relaxed to a soft one-hot sample by adding standard Gumbel noise to its
logs and applying a temperature softmax; the decoder sums the selected basis
rows. At export time each selection hardens to the argmax index, leaving a
small basis matrix plus one integer code row per node.

The "kd" flavor restricts selection j to the j-th contiguous block of
`block_size` basis rows, reproducing block-coding baselines.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .ops import (
    TINY,
    affine,
    glorot_uniform,
    logistic,
    sample_standard_gumbel,
    softplus,
    tau_softmax,
    tau_softmax_backward,
)

MULTI_HOT = "multi_hot"
KD = "kd"
FLAVORS = (MULTI_HOT, KD)


def _check_flavor(flavor: str, n_basis: int, code_len: int, block_size: int | None) -> None:
    if flavor not in FLAVORS:
        raise ValueError(f"flavor must be one of {FLAVORS}, got {flavor!r}")
    if flavor == KD:
        if block_size is None or block_size < 1:
            raise ValueError(f"kd flavor needs a positive block_size, got {block_size}")
        if block_size * code_len != n_basis:
            raise ValueError(
                f"kd flavor requires block_size * code_len == n_basis, "
                f"got {block_size} * {code_len} != {n_basis}"
            )


def kd_block_mask(code_len: int, n_basis: int, block_size: int) -> np.ndarray:
    """Boolean (code_len, n_basis) mask; row j allows columns [j*K, (j+1)*K)."""
    if block_size * code_len != n_basis:
        raise ValueError(
            f"kd mask requires block_size * code_len == n_basis, "
            f"got {block_size} * {code_len} != {n_basis}"
        )
    cols = np.arange(n_basis) // block_size
    return cols[None, :] == np.arange(code_len)[:, None]


@dataclass
class CompressorParams:
    """Trainable compressor head: an affine map onto code_len * n_basis logits
    plus the shared basis matrix."""

    weight: np.ndarray  # (latent_dim, code_len * n_basis)
    bias: np.ndarray  # (code_len * n_basis,)
    basis: np.ndarray  # (n_basis, dim)
    code_len: int
    flavor: str = MULTI_HOT
    block_size: int | None = None
    tau: float = 1.0

    @property
    def n_basis(self) -> int:
        return self.basis.shape[0]

    @property
    def dim(self) -> int:
        return self.basis.shape[1]

    @property
    def latent_dim(self) -> int:
        return self.weight.shape[0]

    def block_mask(self) -> np.ndarray | None:
        if self.flavor == KD:
            return kd_block_mask(self.code_len, self.n_basis, self.block_size)
        return None


def init_compressor(
    rng: np.random.Generator,
    latent_dim: int,
    n_basis: int,
    code_len: int,
    dim: int,
    flavor: str = MULTI_HOT,
    block_size: int | None = None,
    tau: float = 1.0,
) -> CompressorParams:
    if n_basis < 1 or code_len < 1:
        raise ValueError(f"n_basis and code_len must be >= 1, got {n_basis}, {code_len}")
    _check_flavor(flavor, n_basis, code_len, block_size)
    return CompressorParams(
        weight=glorot_uniform(rng, (latent_dim, n_basis * code_len)),
        bias=np.zeros(n_basis * code_len),
        basis=glorot_uniform(rng, (n_basis, dim)),
        code_len=code_len,
        flavor=flavor,
        block_size=block_size if flavor == KD else None,
        tau=tau,
    )


@dataclass
class SoftAssignment:
    """Soft selections for a batch: categorical weights `weights` (y), the
    relaxed one-hot rows `probs` (h), and the Gumbel draws that produced them.
    All three have shape (batch, code_len, n_basis)."""

    weights: np.ndarray
    probs: np.ndarray
    noise: np.ndarray


def compute_logits(latent: np.ndarray, params: CompressorParams) -> np.ndarray:
    """Positive categorical weights y for each selection slot.

    The affine output of length code_len * n_basis is reshaped row-major to
    (code_len, n_basis) per input row, then passed through softplus.
    """
    latent = np.atleast_2d(np.asarray(latent, dtype=np.float64))
    z = affine(latent, params.weight, params.bias)
    return softplus(z).reshape(latent.shape[0], params.code_len, params.n_basis)


def sample_soft_assignment(
    weights: np.ndarray,
    tau: float,
    rng: np.random.Generator | None = None,
    noise: np.ndarray | None = None,
    block_mask: np.ndarray | None = None,
) -> SoftAssignment:
    """Draw relaxed one-hot rows: tau_softmax(log y + g) with fresh Gumbel g.

    Adding standard Gumbel noise to log weights makes the argmax distribute
    exactly as the normalized categorical, so the temperature softmax is a
    differentiable stand-in for sampling. Pass `noise` to fix the draw.
    """
    weights = np.asarray(weights, dtype=np.float64)
    if weights.ndim == 2:
        weights = weights[None, :, :]
    if np.any(weights <= 0):
        raise ValueError("categorical weights must be strictly positive")
    if noise is None:
        if rng is None:
            raise ValueError("either rng or noise must be provided")
        noise = sample_standard_gumbel(weights.shape, rng)
    elif noise.shape != weights.shape:
        raise ValueError(f"noise has shape {noise.shape}, expected {weights.shape}")
    logits = np.log(np.maximum(weights, TINY)) + noise
    if block_mask is not None:
        logits = np.where(block_mask[None, :, :], logits, -np.inf)
    return SoftAssignment(weights=weights, probs=tau_softmax(logits, tau), noise=noise)


def kd_sample(
    weights: np.ndarray, tau: float, rng: np.random.Generator, block_size: int
) -> SoftAssignment:
    """Block-restricted sampling: selection j only sees its own K-row block."""
    weights = np.asarray(weights, dtype=np.float64)
    code_len, n_basis = weights.shape[-2], weights.shape[-1]
    mask = kd_block_mask(code_len, n_basis, block_size)
    return sample_soft_assignment(weights, tau, rng, block_mask=mask)


def select_basis(h_row: np.ndarray, basis: np.ndarray) -> np.ndarray:
    """Convex combination of basis rows weighted by a soft one-hot row."""
    h_row = np.asarray(h_row, dtype=np.float64)
    if h_row.shape[-1] != basis.shape[0]:
        raise ValueError(
            f"select_basis: h has shape {h_row.shape}, basis has shape {basis.shape}"
        )
    return h_row @ basis


def compose(selected) -> np.ndarray:
    """Decoder: elementwise sum of the selected component vectors."""
    stack = np.asarray(selected, dtype=np.float64)
    if stack.ndim < 2:
        raise ValueError(f"compose expects >= 1 stacked vectors, got shape {stack.shape}")
    return stack.sum(axis=-2)


def harden(soft: SoftAssignment) -> np.ndarray:
    """Integer codes: argmax of each soft row, ties resolved to the lowest index."""
    return np.argmax(soft.probs, axis=-1).astype(np.int64)


def hard_codes(weights: np.ndarray, block_mask: np.ndarray | None = None) -> np.ndarray:
    """Noise-free export codes: argmax of log y per selection slot (the mode
    of each categorical), so repeated exports are deterministic."""
    weights = np.asarray(weights, dtype=np.float64)
    if weights.ndim == 2:
        weights = weights[None, :, :]
    logits = np.log(np.maximum(weights, TINY))
    if block_mask is not None:
        logits = np.where(block_mask[None, :, :], logits, -np.inf)
    return np.argmax(logits, axis=-1).astype(np.int64)


@dataclass
class Codebook:
    """The compressed artifact: shared basis rows plus integer codes per node."""

    basis: np.ndarray  # (n_basis, dim)
    codes: np.ndarray  # (n_nodes, code_len)
    flavor: str = MULTI_HOT
    block_size: int | None = None

    @property
    def n_basis(self) -> int:
        return self.basis.shape[0]

    @property
    def dim(self) -> int:
        return self.basis.shape[1]

    @property
    def n_nodes(self) -> int:
        return self.codes.shape[0]

    @property
    def code_len(self) -> int:
        return self.codes.shape[1]

    def validate(self) -> None:
        if self.basis.ndim != 2 or self.codes.ndim != 2:
            raise ValueError("codebook arrays must be 2-D")
        if np.any(self.codes < 0) or np.any(self.codes >= self.n_basis):
            raise ValueError(f"codes must lie in [0, {self.n_basis})")
        _check_flavor(self.flavor, self.n_basis, self.code_len, self.block_size)
        if self.flavor == KD:
            blocks = self.codes // self.block_size
            if np.any(blocks != np.arange(self.code_len)[None, :]):
                raise ValueError("kd codes must stay inside their blocks")


def reconstruct_from_codebook(cb: Codebook, node_id: int) -> np.ndarray:
    """Sum of the basis rows named by one node's codes."""
    if not 0 <= node_id < cb.n_nodes:
        raise ValueError(f"node_id {node_id} out of range for {cb.n_nodes} nodes")
    return cb.basis[cb.codes[node_id]].sum(axis=0)


def decode_codebook(cb: Codebook) -> np.ndarray:
    """Reconstructed embedding rows for every node, shape (n_nodes, dim)."""
    return cb.basis[cb.codes].sum(axis=1)


def code_space_size(flavor: str, n_basis: int, code_len: int) -> int:
    """Exact count of distinct code rows: s^t for multi-hot, (s // t)^t for kd."""
    if n_basis < 1 or code_len < 1:
        raise ValueError(f"n_basis and code_len must be >= 1, got {n_basis}, {code_len}")
    if flavor == MULTI_HOT:
        return int(n_basis) ** int(code_len)
    if flavor == KD:
        return (int(n_basis) // int(code_len)) ** int(code_len)
    raise ValueError(f"flavor must be one of {FLAVORS}, got {flavor!r}")


def tau_schedule(
    epoch: int, tau_init: float = 1.0, tau_min: float = 0.5, step_epochs: int = 100
) -> float:
    """Temperature for a 0-based epoch: drop 0.1 every `step_epochs`, floored."""
    if epoch < 0:
        raise ValueError(f"epoch must be >= 0, got {epoch}")
    return max(tau_min, tau_init - 0.1 * (epoch // step_epochs))


@dataclass
class CompressorCache:
    """Forward intermediates needed by compressor_backward."""

    latent: np.ndarray
    pre_act: np.ndarray  # (batch, code_len, n_basis), before softplus
    soft: SoftAssignment
    summed: np.ndarray  # (batch, n_basis), probs summed over selections


def compressor_forward(
    latent: np.ndarray,
    params: CompressorParams,
    tau: float,
    rng: np.random.Generator | None = None,
    noise: np.ndarray | None = None,
) -> tuple[np.ndarray, CompressorCache]:
    """Soft path latent -> reconstruction: logits, Gumbel relaxation, decode."""
    latent = np.atleast_2d(np.asarray(latent, dtype=np.float64))
    z = affine(latent, params.weight, params.bias)
    z = z.reshape(latent.shape[0], params.code_len, params.n_basis)
    weights = softplus(z)
    soft = sample_soft_assignment(weights, tau, rng, noise=noise, block_mask=params.block_mask())
    summed = soft.probs.sum(axis=1)
    return summed @ params.basis, CompressorCache(latent, z, soft, summed)


def compressor_backward(
    cache: CompressorCache, params: CompressorParams, d_out: np.ndarray, tau: float
) -> tuple[np.ndarray, dict[str, np.ndarray]]:
    """Backprop through decode, relaxation, softplus and the affine head.

    Returns the gradient w.r.t. the latent input plus a dict with gradients
    for "weight", "bias" and "basis". Blocked-out kd entries have zero
    probability, so their gradients vanish automatically.
    """
    n, code_len, n_basis = cache.soft.probs.shape
    d_basis = cache.summed.T @ d_out
    d_summed = d_out @ params.basis.T
    d_probs = np.broadcast_to(d_summed[:, None, :], (n, code_len, n_basis))
    d_logits = tau_softmax_backward(cache.soft.probs, d_probs, tau)
    d_weights = d_logits / np.maximum(cache.soft.weights, TINY)
    d_z = (d_weights * logistic(cache.pre_act)).reshape(n, code_len * n_basis)
    d_weight = cache.latent.T @ d_z
    d_bias = d_z.sum(axis=0)
    d_latent = d_z @ params.weight.T
    return d_latent, {"weight": d_weight, "bias": d_bias, "basis": d_basis}
